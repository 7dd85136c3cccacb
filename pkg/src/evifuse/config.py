"""Run configuration: a flat key = value text format with typed validation.

One file describes a full experiment: data source, architecture, objective
weights, split, conflict injection, and run count. Unknown keys are rejected
with their line number, values are validated per key, and the canonical
serialization (sorted keys, normalized values) gives every configuration a
stable hash used to name run directories.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
import hashlib

from .data import SplitSpec
from .losses import LossConfig
from .network import NetConfig

__all__ = ["RunConfig", "ConfigError"]


class ConfigError(ValueError):
    """Raised for unparseable, unknown, or invalid configuration input."""


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(part.strip()) for part in text.split(","))


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs, flat and diffable."""

    data: str = "synthetic"
    data_dir: str = ""
    views: int = 3
    classes: int = 4
    instances: int = 1000
    dim: tuple = (10,)
    separation: float = 5.0
    train_fraction: float = 0.8
    hidden: tuple = (64,)
    head: str = "softplus"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    normalize_inputs: bool = True
    anneal_epochs: int = 10
    beta: float = 1.0
    gamma: float = 1.0
    noise_fraction: float = 0.0
    noise_sigma: float = 0.0
    unaligned_fraction: float = 0.0
    seed: int = 0
    runs: int = 1
    output_dir: str = "runs"

    def __post_init__(self):
        if self.data not in ("synthetic", "csv"):
            raise ConfigError(f"data must be 'synthetic' or 'csv', got {self.data!r}")
        if self.data == "csv" and not self.data_dir:
            raise ConfigError("data = csv requires data_dir")
        if self.views < 1 or self.classes < 2 or self.instances < 1:
            raise ConfigError("views >= 1, classes >= 2, instances >= 1 required")
        dim = tuple(int(d) for d in self.dim)
        if any(d < 1 for d in dim):
            raise ConfigError("dim entries must be positive")
        if len(dim) not in (1, self.views):
            raise ConfigError(f"dim needs 1 or {self.views} entries, got {len(dim)}")
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigError("hidden needs at least one positive width")
        if self.separation < 0.0:
            raise ConfigError("separation must be nonnegative")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.head not in ("softplus", "relu"):
            raise ConfigError(f"head must be softplus or relu, got {self.head!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if not (self.learning_rate > 0.0):
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.anneal_epochs < 1:
            raise ConfigError("epochs, batch_size and anneal_epochs must be positive")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ConfigError("beta and gamma must be nonnegative")
        for name in ("noise_fraction", "unaligned_fraction"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "hidden", hidden)

    # ------------------------------------------------------------------
    # Parsing
    # ------------------------------------------------------------------

    _PARSERS = {
        "data": str,
        "data_dir": str,
        "views": int,
        "classes": int,
        "instances": int,
        "dim": _parse_int_list,
        "separation": float,
        "train_fraction": float,
        "hidden": _parse_int_list,
        "head": str,
        "optimizer": str,
        "learning_rate": float,
        "epochs": int,
        "batch_size": int,
        "normalize_inputs": _parse_bool,
        "anneal_epochs": int,
        "beta": float,
        "gamma": float,
        "noise_fraction": float,
        "noise_sigma": float,
        "unaligned_fraction": float,
        "seed": int,
        "runs": int,
        "output_dir": str,
    }

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        """Parse ``key = value`` lines; '#' starts a comment.

        Raises
        ------
        ConfigError
            Naming the source and line for unknown keys, bad syntax, repeated
            keys, or invalid values.
        """
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in cls._PARSERS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: repeated key {key!r}")
            try:
                values[key] = cls._PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
        try:
            return cls(**values)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read(), source=str(path))

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    # ------------------------------------------------------------------
    # Canonical form
    # ------------------------------------------------------------------

    def canonical(self) -> str:
        """Sorted, normalized ``key = value`` text; hash input and file form."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        # output_dir is where results land, not what the experiment is
        lines = [
            line
            for line in self.canonical().splitlines()
            if not line.startswith("output_dir ")
        ]
        return hashlib.sha256(("\n".join(lines) + "\n").encode()).hexdigest()[:12]

    # ------------------------------------------------------------------
    # Component configs
    # ------------------------------------------------------------------

    def view_dims(self) -> tuple:
        if len(self.dim) == 1:
            return self.dim * self.views
        return self.dim

    def loss_config(self) -> LossConfig:
        return LossConfig(T=self.anneal_epochs, beta=self.beta, gamma=self.gamma)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(train_fraction=self.train_fraction, seed=self.seed)

    def net_config(self, view_dims, n_classes: int) -> NetConfig:
        chains = tuple((int(d), *self.hidden, int(n_classes)) for d in view_dims)
        return NetConfig(
            layer_sizes=chains,
            head=self.head,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            normalize_inputs=self.normalize_inputs,
        )
