"""Small conv classifier standing in for Inception-v3 at desk scale."""

from __future__ import annotations

import logging
import warnings
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from ..autodiff import Tensor, exp, log, no_grad
from ..checkpoint import load_checkpoint, save_checkpoint
from ..data import ImageDataset
from ..nn import Activation, Conv2d, Linear, Module, Sequential
from ..optim import Adam

logger = logging.getLogger(__name__)

BLOB_FLOOR = 0.95
CIFAR_FLOOR = 0.45


class ProxyClassifier(Module):
    def __init__(self, image_size: int, num_classes: int, features: int = 16, width: int = 16, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = dict(image_size=image_size, num_classes=num_classes, features=features, width=width)
        layers: list[Module] = [Conv2d(3, width, 3, 1, 1, rng=rng), Activation("relu")]
        ch, size = width, image_size
        while size > 4:
            layers += [Conv2d(ch, 2 * ch, 4, 2, 1, rng=rng), Activation("relu")]
            ch, size = 2 * ch, size // 2
        self.body = Sequential(*layers)
        self.fc = Linear(ch * size * size, features, rng=rng)
        self.head = Linear(features, num_classes, rng=rng)
        # conv-heavy nets train poorly from the 0.02 GAN init
        for m in self.modules():
            if isinstance(m, (Conv2d, Linear)):
                fan_in = int(np.prod(m.weight.shape[1:]))
                m.weight.data[...] = rng.normal(0.0, np.sqrt(2.0 / fan_in), m.weight.shape)

    def embed(self, x: Tensor) -> Tensor:
        return self.fc(self.body(x)).relu()

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.embed(x))


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    shift = logits - Tensor(logits.data.max(axis=1, keepdims=True))
    logp = shift - log(exp(shift).sum(1, keepdims=True))
    onehot = np.zeros(logits.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    return -(logp * Tensor(onehot)).sum() * (1.0 / len(labels))


class FeatureExtractor:
    """Frozen classifier exposing logits and penultimate features."""

    def __init__(self, net: ProxyClassifier, provenance: Optional[dict[str, Any]] = None):
        self.net = net.eval()
        self.provenance = provenance or {}

    @property
    def num_classes(self) -> int:
        return self.net.config["num_classes"]

    @property
    def feature_dim(self) -> int:
        return self.net.config["features"]

    def _run(self, images, fn, chunk: int = 256) -> np.ndarray:
        images = np.asarray(getattr(images, "data", images), dtype=np.float64)
        out = []
        with no_grad():
            for i in range(0, len(images), chunk):
                out.append(fn(Tensor(images[i : i + chunk])).data)
        return np.concatenate(out)

    def features(self, images) -> np.ndarray:
        return self._run(images, self.net.embed)

    def logits(self, images) -> np.ndarray:
        return self._run(images, self.net)

    def accuracy(self, dataset: ImageDataset) -> float:
        pred = self.logits(dataset.pixels()).argmax(axis=1)
        return float((pred == dataset.labels).mean())

    def save(self, path: Union[str, Path]) -> Path:
        manifest = {"kind": "proxy_extractor", "config": self.net.config, "provenance": self.provenance}
        return save_checkpoint(path, self.net.state_dict(), manifest)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FeatureExtractor":
        arrays, manifest = load_checkpoint(path)
        if manifest.get("kind") != "proxy_extractor":
            raise ValueError(f"{path} does not hold a proxy extractor")
        net = ProxyClassifier(**manifest["config"])
        net.load_state_dict(arrays)
        return cls(net, manifest.get("provenance"))


def train_proxy_extractor(
    dataset: ImageDataset,
    epochs: int = 3,
    seed: int = 0,
    features: int = 16,
    batch_size: int = 64,
    lr: float = 1e-3,
    holdout: float = 0.2,
) -> FeatureExtractor:
    """Fit the classifier on a labeled dataset; accuracy is measured on a held-out split."""
    if dataset.labels is None:
        raise ValueError("proxy extractor training needs labels")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(dataset))
    n_val = max(1, int(len(dataset) * holdout))
    val, train = dataset.subset(perm[:n_val]), dataset.subset(perm[n_val:])
    net = ProxyClassifier(dataset.image_size, max(dataset.num_classes, 2), features, rng=rng)
    opt = Adam(net.parameters(), lr=lr, beta1=0.9, beta2=0.999)
    for epoch in range(epochs):
        net.train()
        order = rng.permutation(len(train))
        for i in range(0, len(order) - batch_size + 1, batch_size):
            idx = order[i : i + batch_size]
            loss = cross_entropy(net(Tensor(train.pixels(idx))), train.labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        logger.debug("proxy epoch %d loss %.4f", epoch, loss.item())
    fe = FeatureExtractor(net)
    acc = fe.accuracy(val)
    floor = CIFAR_FLOOR if dataset.name.startswith("cifar") else BLOB_FLOOR
    fe.provenance = {
        "dataset": dataset.name,
        "n_train": len(train),
        "epochs": epochs,
        "seed": seed,
        "heldout_accuracy": acc,
        "accuracy_floor": floor,
    }
    if acc < floor:
        warnings.warn(f"proxy extractor accuracy {acc:.3f} below floor {floor}", stacklevel=2)
    return fe
