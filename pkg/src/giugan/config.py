"""Run configuration: a flat ``key = value`` file with ``#`` comments.

Unknown keys are errors.  Booleans accept true/false/1/0/yes/no/on/off.
A run directory keeps a snapshot (``config.txt``) that reproduces the run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Union

TTUR_LR_D = 4e-4
TTUR_LR_G = 1e-4
IMAGE_SIZES = (8, 16, 32)
OPTIMIZERS = ("adam", "rmsprop", "adagrad")
DATASETS = ("synth", "cifar10")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    dataset: str = "synth"
    data_dir: str = ""
    image_size: int = 8
    synth_n: int = 4096
    synth_classes: int = 4
    # schedule
    iters: int = 1000
    batch_size: int = 16
    n_critic: int = 1
    seed: int = 0
    # objective and optimizer
    gp_lambda: float = 10.0
    optimizer: str = "adam"
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.0
    beta2: float = 0.9
    ttur: bool = False
    # model
    latent_dim: int = 64
    width: int = 16
    giu_on: bool = True
    rbn_on: bool = True
    spectral_norm: bool = True
    giu_kernel: int = 3
    giu_groups: int = 1
    giu_reduction: int = 4
    se_reduction: int = 4
    # cadence and outputs
    log_every: int = 100
    ckpt_every: int = 0
    sample_every: int = 0
    eval_every: int = 0
    eval_samples: int = 256
    proxy_epochs: int = 3
    out_dir: str = "runs/default"
    extractor: str = ""

    def effective_lrs(self) -> tuple[float, float]:
        """(lr_g, lr_d) after the two-timescale override."""
        return (TTUR_LR_G, TTUR_LR_D) if self.ttur else (self.lr_g, self.lr_d)

    def validate(self) -> "RunConfig":
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.dataset in DATASETS, f"dataset must be one of {DATASETS}")
        need(self.image_size in IMAGE_SIZES, f"image_size must be one of {IMAGE_SIZES}")
        need(self.dataset != "cifar10" or self.image_size == 32, "cifar10 images are 32x32")
        need(self.iters >= 0, "iters must be >= 0")
        need(self.batch_size >= 2, "batch_size must be >= 2")
        need(self.n_critic >= 1, "n_critic must be >= 1")
        need(self.synth_n >= self.batch_size, "synth_n must be at least batch_size")
        need(self.synth_classes >= 1, "synth_classes must be >= 1")
        need(self.gp_lambda >= 0, "gp_lambda must be >= 0")
        need(self.optimizer in OPTIMIZERS, f"optimizer must be one of {OPTIMIZERS}")
        need(self.lr_g > 0 and self.lr_d > 0, "learning rates must be positive")
        need(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "betas must lie in [0, 1)")
        need(self.latent_dim >= 1 and self.width >= 1, "latent_dim and width must be positive")
        need(self.giu_kernel % 2 == 1, "giu_kernel must be odd")
        need(self.giu_groups >= 1, "giu_groups must be >= 1")
        for key in ("log_every", "ckpt_every", "sample_every", "eval_every"):
            need(getattr(self, key) >= 0, f"{key} must be >= 0")
        need(self.eval_every == 0 or self.eval_samples >= 20, "eval_samples must be >= 20")
        return self

    def to_text(self) -> str:
        lines = ["# giugan run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_value(key: str, raw: Any) -> Any:
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    if not isinstance(raw, str):
        raw = format_value(raw)
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key} ({kind}): {raw!r}") from None
    return text


def parse_config_text(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(key, raw)
    return out


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        values.update(parse_config_text(text))
    for key, raw in (overrides or {}).items():
        values[key] = parse_value(key, raw)
    return RunConfig(**values).validate()
