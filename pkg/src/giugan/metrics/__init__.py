from .eigen import psd_sqrt, symmetric_eigendecomp
from .fid import GaussianFit, fid, frechet_distance
from .inception import inception_score, inception_score_from_probs, softmax
from .proxy import FeatureExtractor, ProxyClassifier, train_proxy_extractor

__all__ = [
    "FeatureExtractor",
    "GaussianFit",
    "ProxyClassifier",
    "fid",
    "frechet_distance",
    "inception_score",
    "inception_score_from_probs",
    "psd_sqrt",
    "softmax",
    "symmetric_eigendecomp",
    "train_proxy_extractor",
]
