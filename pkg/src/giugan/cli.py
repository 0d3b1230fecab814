"""Command-line entry point: ``giugan {train,sample,eval,check}``.

Exit codes: 0 success, 1 other error, 2 configuration or usage error,
3 non-finite loss, 4 self-check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3, 4

log = logging.getLogger("giugan")


class UsageError(ValueError):
    pass


# -- train --------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides (same keys as the config file)")
    for f in fields(RunConfig):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        kw = {"dest": f"cfg_{f.name}", "default": None, "metavar": "VALUE"}
        if f.type == "bool":
            kw.update(nargs="?", const="true")
        group.add_argument(*flags, **kw)
    p.add_argument("--ablate-giu", action="store_true", help="drop the GIU blocks (giu_on = false)")
    p.add_argument("--ablate-rbn", action="store_true", help="use plain BN everywhere (rbn_on = false)")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(RunConfig)}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.ablate_giu:
        overrides["giu_on"] = "false"
    if args.ablate_rbn:
        overrides["rbn_on"] = "false"
    return load_config(args.config, overrides)


def cmd_train(args: argparse.Namespace) -> int:
    from .gan.train import train

    cfg = config_from_args(args)
    result = train(cfg)
    print(result.run_dir)
    return EXIT_OK


# -- sample -------------------------------------------------------------------------


def sample_images(ckpt: Path, n: int, seed: int) -> np.ndarray:
    from .gan.train import generate, load_run_checkpoint

    if n < 1:
        raise UsageError("--n must be at least 1")
    G, _, cfg, _ = load_run_checkpoint(ckpt)
    z = np.random.default_rng(seed).standard_normal((n, cfg.latent_dim))
    return generate(G, z)


def cmd_sample(args: argparse.Namespace) -> int:
    from .data import write_image_grid

    images = sample_images(Path(args.checkpoint), args.n, args.seed)
    out = write_image_grid(images, args.out, args.cols)
    print(out)
    return EXIT_OK


# -- eval ---------------------------------------------------------------------------


def _run_dir_of(ckpt: Path) -> Path:
    return ckpt.parent.parent if ckpt.parent.name == "checkpoints" else ckpt.parent


def _eval_real_images(cfg: RunConfig, n: int) -> np.ndarray:
    """2n held-out real images: the first n are the reference, the rest the real-vs-real probe."""
    from .data import load_cifar10, synth_blobs
    from .gan.train import RunStreams

    streams = RunStreams.from_seed(cfg.seed)
    if cfg.dataset == "synth":
        return synth_blobs(2 * n, cfg.image_size, cfg.synth_classes, seed=streams.data_seed + 1).pixels()
    test = load_cifar10(cfg.data_dir or None, "test")
    if 2 * n > len(test):
        raise UsageError(f"--n {n} needs {2 * n} test images, only {len(test)} available")
    pick = np.sort(streams.eval.permutation(len(test))[: 2 * n])
    return test.pixels(pick)


def _extractor_for(cfg: RunConfig, run_dir: Path, path: Optional[str]):
    from .gan.train import RunStreams, make_dataset
    from .metrics import FeatureExtractor, train_proxy_extractor

    if path:
        return FeatureExtractor.load(path)
    cached = run_dir / "proxy_extractor.giuc"
    if cached.exists():
        return FeatureExtractor.load(cached)
    log.info("no proxy extractor found; training one")
    streams = RunStreams.from_seed(cfg.seed)
    fe = train_proxy_extractor(make_dataset(cfg, streams.data_seed), cfg.proxy_epochs, seed=streams.extractor_seed)
    fe.save(cached)
    return fe


def cmd_eval(args: argparse.Namespace) -> int:
    from .gan.train import append_csv, evaluate_images, generate, load_run_checkpoint
    from .metrics import fid

    ckpt = Path(args.checkpoint)
    G, _, cfg, manifest = load_run_checkpoint(ckpt)
    if args.dataset:
        cfg = cfg.replace(dataset=args.dataset)
    if args.data_dir:
        cfg = cfg.replace(data_dir=args.data_dir)
    cfg.validate()
    n = args.n
    fe = _extractor_for(cfg, _run_dir_of(ckpt), args.extractor)
    if n < fe.feature_dim + 1 or n < 20:
        raise UsageError(f"--n {n} is too small: need at least {max(fe.feature_dim + 1, 20)} samples")
    real = _eval_real_images(cfg, n)
    ref_feats = fe.features(real[:n])
    z = np.random.default_rng(args.seed).standard_normal((n, cfg.latent_dim))
    res = evaluate_images(generate(G, z), fe, ref_feats)
    real_fid = fid(ref_feats, fe.features(real[n:]))
    noise = np.random.default_rng(args.seed).uniform(-1.0, 1.0, real[:n].shape)
    noise_fid = fid(ref_feats, fe.features(noise))
    out = Path(args.out) if args.out else _run_dir_of(ckpt) / "eval.csv"
    append_csv(out, [{"iteration": int(manifest.get("iteration", 0)), "is_mean": res.is_mean,
                      "is_std": res.is_std, "fid": res.fid}])
    print(f"proxy-IS   {res.is_mean:.4f} +- {res.is_std:.4f}")
    print(f"proxy-FID  {res.fid:.4f}")
    print(f"baseline real-vs-real FID  {real_fid:.4f}")
    print(f"baseline noise FID         {noise_fid:.4f}")
    print(out)
    return EXIT_OK


# -- check --------------------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    from .verify import CHECKS, run_checks

    if args.list:
        for name in CHECKS:
            print(name)
        return EXIT_OK
    try:
        results = run_checks(args.only or None)
    except KeyError as e:
        raise UsageError(str(e)) from None
    for r in results:
        print(json.dumps({"property": r.name, "passed": r.passed, "value": r.value,
                          "threshold": r.threshold, "seconds": round(r.seconds, 4), "detail": r.detail}))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


# -- entry --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")
    parser = argparse.ArgumentParser(prog="giugan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a GAN; writes a self-describing run directory")
    p.add_argument("--config", help="key = value config file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", parents=[common], help="write a PPM grid of generated images")
    p.add_argument("checkpoint")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--out", default="samples.ppm")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", parents=[common], help="proxy-IS and proxy-FID of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", choices=("synth", "cifar10"), default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--extractor", default=None, help="saved proxy extractor (trained if omitted)")
    p.add_argument("--out", default=None, help="CSV to append to (default: <run>/eval.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", parents=[common], help="run the numerical self-checks")
    p.add_argument("--only", nargs="+", metavar="NAME")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .gan.losses import NumericError

    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(logging.WARNING if args.quiet else logging.INFO)
    logging.basicConfig(level=logging.INFO, format="%(message)s", handlers=[handler])
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"giugan: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"giugan: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"giugan: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
