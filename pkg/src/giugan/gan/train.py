"""WGAN-GP training loop with deterministic seeding and run-directory outputs.

Run directory layout::

    config.txt            snapshot that reproduces the run
    metrics.csv           one row per generator iteration
    train.log             losses, learning rates and per-layer sigma estimates
    checkpoints/          iter_XXXXXXX.giuc, final.giuc (crash.giuc on NaN)
    samples/              iter_XXXXXXX.ppm, final.ppm
"""

from __future__ import annotations

import contextlib
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Union

import numpy as np

from ..autodiff import Tensor, no_grad
from ..checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from ..config import RunConfig
from ..data import Batcher, ImageDataset, load_cifar10, synth_blobs, write_image_grid
from ..metrics import FeatureExtractor, fid, inception_score_from_probs, softmax, train_proxy_extractor
from ..optim import make_optimizer
from .losses import NumericError, check_finite, critic_loss, generator_loss
from .models import ModelSpec, Network, build_model, default_discriminator_spec, default_generator_spec

logger = logging.getLogger("giugan.train")

CSV_COLUMNS = ("iteration", "loss_d", "loss_g", "penalty", "is_mean", "is_std", "fid")
CHECKPOINT_KIND = "giugan_run"
GRID_SIZE = 64


def format_row(row: dict[str, Any]) -> list[str]:
    out = []
    for col in CSV_COLUMNS:
        v = row.get(col)
        out.append("" if v is None else (str(v) if isinstance(v, (int, np.integer)) else repr(float(v))))
    return out


def append_csv(path: Union[str, Path], rows: list[dict[str, Any]]) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(format_row(row))


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# -- seeding --------------------------------------------------------------------


@dataclass
class RunStreams:
    """Independent generators derived from one seed."""

    train: np.random.Generator  # init, batches, latents, interpolation weights
    data_seed: int
    eval: np.random.Generator
    extractor_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "RunStreams":
        train, data, ev, ext = np.random.SeedSequence(seed).spawn(4)
        return cls(
            np.random.default_rng(train),
            int(data.generate_state(1)[0]),
            np.random.default_rng(ev),
            int(ext.generate_state(1)[0]),
        )


# -- data and models --------------------------------------------------------------


def make_dataset(cfg: RunConfig, data_seed: int, split: str = "train") -> ImageDataset:
    if cfg.dataset == "synth":
        seed = data_seed if split == "train" else data_seed + 1
        n = cfg.synth_n if split == "train" else max(cfg.eval_samples, 20)
        return synth_blobs(n, cfg.image_size, cfg.synth_classes, seed=seed)
    return load_cifar10(cfg.data_dir or None, split)


def model_specs(cfg: RunConfig) -> tuple[ModelSpec, ModelSpec]:
    g = default_generator_spec(
        cfg.image_size, cfg.width, cfg.latent_dim, cfg.giu_on, cfg.rbn_on, cfg.spectral_norm,
        cfg.giu_kernel, cfg.giu_groups, cfg.se_reduction, cfg.giu_reduction,
    )
    d = default_discriminator_spec(
        cfg.image_size, cfg.width, cfg.giu_on, cfg.spectral_norm,
        cfg.giu_kernel, cfg.giu_groups, cfg.se_reduction, cfg.giu_reduction,
    )
    return g, d


def build_models(cfg: RunConfig, rng: np.random.Generator) -> tuple[Network, Network]:
    g_spec, d_spec = model_specs(cfg)
    return build_model(g_spec, rng), build_model(d_spec, rng)


@contextlib.contextmanager
def frozen(module: Network) -> Iterator[None]:
    """Temporarily stop gradients into ``module``'s parameters."""
    params = module.parameters()
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad = f


def generate(G: Network, z: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Images from G in eval mode without recording a graph."""
    was_training = G.training
    G.eval()
    try:
        with no_grad():
            parts = [G(Tensor(z[i : i + chunk])).data for i in range(0, len(z), chunk)]
    finally:
        G.train(was_training)
    return np.concatenate(parts)


# -- checkpoints ------------------------------------------------------------------


def save_run_checkpoint(path: Union[str, Path], G: Network, D: Network, cfg: RunConfig,
                        iteration: int, extra: Optional[dict[str, Any]] = None) -> Path:
    arrays = {f"G.{k}": v for k, v in G.state_dict().items()}
    arrays.update({f"D.{k}": v for k, v in D.state_dict().items()})
    manifest = {
        "kind": CHECKPOINT_KIND,
        "iteration": iteration,
        "config": cfg.as_dict(),
        "generator": G.spec.to_dict(),
        "discriminator": D.spec.to_dict(),
    }
    manifest.update(extra or {})
    return save_checkpoint(path, arrays, manifest)


def load_run_checkpoint(path: Union[str, Path]) -> tuple[Network, Network, RunConfig, dict[str, Any]]:
    arrays, manifest = load_checkpoint(path)
    if manifest.get("kind") != CHECKPOINT_KIND:
        raise CheckpointError(f"{path}: not a training checkpoint (kind={manifest.get('kind')!r})")
    cfg = RunConfig(**manifest["config"])
    G = build_model(ModelSpec.from_dict(manifest["generator"]))
    D = build_model(ModelSpec.from_dict(manifest["discriminator"]))
    G.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("G.")})
    D.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("D.")})
    return G, D, cfg, manifest


# -- evaluation ---------------------------------------------------------------------


@dataclass
class EvalResult:
    is_mean: float
    is_std: float
    fid: float


def evaluate_images(fake: np.ndarray, fe: FeatureExtractor, real_feats: np.ndarray) -> EvalResult:
    is_mean, is_std = inception_score_from_probs(softmax(fe.logits(fake)))
    return EvalResult(is_mean, is_std, fid(real_feats, fe.features(fake)))


# -- training -----------------------------------------------------------------------


@dataclass
class TrainResult:
    G: Network
    D: Network
    rows: list[dict[str, Any]]
    run_dir: Path
    final_checkpoint: Path
    effective_lr: tuple[float, float] = field(default=(0.0, 0.0))


def _attach_log(run_dir: Path) -> logging.Handler:
    handler = logging.FileHandler(run_dir / "train.log", mode="w")
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    return handler


def _sigma_line(prefix: str, net: Network) -> str:
    return " ".join(f"{prefix}.{k}={sn.sigma:.6g}" for k, sn in net.spectral_norms().items())


def train(
    cfg: RunConfig,
    data: Optional[ImageDataset] = None,
    run_dir: Optional[Union[str, Path]] = None,
    extractor: Optional[FeatureExtractor] = None,
) -> TrainResult:
    """Alternate critic and generator updates for ``cfg.iters`` generator steps.

    All randomness flows from ``cfg.seed``; the same config yields a
    bit-identical ``metrics.csv``.  Raises NumericError after writing
    ``checkpoints/crash.giuc`` if a loss turns non-finite.
    """
    cfg.validate()
    run_dir = Path(run_dir if run_dir is not None else cfg.out_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    (run_dir / "samples").mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(cfg.to_text())
    csv_path = run_dir / "metrics.csv"
    csv_path.write_text("")
    handler = _attach_log(run_dir)
    try:
        return _train(cfg, data, run_dir, csv_path, extractor)
    finally:
        logger.removeHandler(handler)
        handler.close()


def _train(cfg, data, run_dir, csv_path, extractor) -> TrainResult:
    streams = RunStreams.from_seed(cfg.seed)
    rng = streams.train
    data = data if data is not None else make_dataset(cfg, streams.data_seed)
    if data.image_size != cfg.image_size:
        raise ValueError(f"data has {data.image_size}px images, config says {cfg.image_size}")
    G, D = build_models(cfg, rng)
    lr_g, lr_d = cfg.effective_lrs()
    opt_g = make_optimizer(cfg.optimizer, G.parameters(), lr_g, cfg.beta1, cfg.beta2)
    opt_d = make_optimizer(cfg.optimizer, D.parameters(), lr_d, cfg.beta1, cfg.beta2)
    logger.info("lr_G=%r lr_D=%r ttur=%s n_critic=%d", lr_g, lr_d, cfg.ttur, cfg.n_critic)
    logger.info("params G=%d D=%d", G.num_parameters(), D.num_parameters())
    batches = iter(Batcher(data, cfg.batch_size, rng))
    m = cfg.batch_size

    eval_z = real_feats = None
    if cfg.eval_every:
        if extractor is None:
            extractor = train_proxy_extractor(data, cfg.proxy_epochs, seed=streams.extractor_seed)
            extractor.save(run_dir / "proxy_extractor.giuc")
        held = make_dataset(cfg, streams.data_seed, "test")
        pick = streams.eval.permutation(len(held))[: cfg.eval_samples]
        real_feats = extractor.features(held.pixels(np.sort(pick)))
        eval_z = streams.eval.standard_normal((cfg.eval_samples, cfg.latent_dim))
    grid_z = streams.eval.standard_normal((min(GRID_SIZE, cfg.eval_samples), cfg.latent_dim))

    def checkpoint(name: str, it: int) -> Path:
        return save_run_checkpoint(run_dir / "checkpoints" / name, G, D, cfg, it)

    rows: list[dict[str, Any]] = []
    for it in range(1, cfg.iters + 1):
        try:
            for _ in range(cfg.n_critic):
                real = next(batches).pixels
                z = rng.standard_normal((m, cfg.latent_dim))
                with no_grad():
                    fake = G(Tensor(z)).data
                eps = rng.uniform(0.0, 1.0, (m, 1, 1, 1))
                loss_d, penalty = critic_loss(D, real, fake, cfg.gp_lambda, eps=eps)
                check_finite(loss_d=loss_d)
                opt_d.zero_grad()
                loss_d.backward()
                opt_d.step()
            z = rng.standard_normal((m, cfg.latent_dim))
            with frozen(D):
                loss_g = generator_loss(D, G(Tensor(z)))
            check_finite(loss_g=loss_g)
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()
        except NumericError:
            checkpoint("crash.giuc", it)
            logger.error("non-finite loss at iteration %d; crash checkpoint written", it)
            raise
        row: dict[str, Any] = {
            "iteration": it,
            "loss_d": loss_d.item(),
            "loss_g": loss_g.item(),
            "penalty": penalty.item(),
        }
        if cfg.eval_every and it % cfg.eval_every == 0:
            res = evaluate_images(generate(G, eval_z), extractor, real_feats)
            row.update(is_mean=res.is_mean, is_std=res.is_std, fid=res.fid)
            logger.info("eval %d IS=%.4f+-%.4f FID=%.4f", it, res.is_mean, res.is_std, res.fid)
        if cfg.log_every and it % cfg.log_every == 0:
            logger.info("iter %d loss_d=%.5f loss_g=%.5f penalty=%.5f lr_G=%r lr_D=%r",
                        it, row["loss_d"], row["loss_g"], row["penalty"], opt_g.lr, opt_d.lr)
            logger.info("sigma %s %s", _sigma_line("G", G), _sigma_line("D", D))
        if cfg.ckpt_every and it % cfg.ckpt_every == 0:
            checkpoint(f"iter_{it:07d}.giuc", it)
        if cfg.sample_every and it % cfg.sample_every == 0:
            write_image_grid(generate(G, grid_z), run_dir / "samples" / f"iter_{it:07d}.ppm")
        rows.append(row)
        append_csv(csv_path, [row])
    final = checkpoint("final.giuc", cfg.iters)
    write_image_grid(generate(G, grid_z), run_dir / "samples" / "final.ppm")
    return TrainResult(G, D, rows, run_dir, final, (lr_g, lr_d))
