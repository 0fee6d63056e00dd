"""Run configuration.

A run is fully described by a `RunConfig`: one immutable record per section.
The text format is flat, one `section.field = value` per line; nested records
(such as the compound-scaling coefficients of KnightPupil) use one more dotted
level. `#` starts a comment. Tuples are written as comma lists.
"""

import logging
import typing
from pathlib import Path
from typing import NamedTuple, Optional

from evdata.augment import AugmentConfig
from evdata.base import ConfigError
from evdata.encode import EncodeConfig
from evdata.synth import TrajectoryConfig, EventGenConfig
from gazenet.models import SpatiotemporalNetConfig, KnightPupilConfig

logger = logging.getLogger(__name__)

model_kinds = ("spatiotemporal", "knightpupil")


class TrainConfig(NamedTuple):
    model: str = "knightpupil"
    epochs: int = 600
    batch_size: int = 24
    optimizer: str = "adam"            # adam | adamw
    lr: float = 0.001
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    schedule: str = "step"             # step | cosine | constant
    warmup_fraction: float = 0.025
    step_epochs: int = 200
    step_gamma: float = 0.5
    train_length: int = 30             # label steps per window
    train_stride: int = 15
    val_stride: int = 30
    val_fraction: float = 0.25
    loss: str = "mse"                  # mse | l1 | smooth_l1
    sparsity_lambda: Optional[float] = None   # None: the model's own setting
    checkpoints: tuple = ("best_dist", "best_val_loss", "final")
    prefetch: int = 2                  # batches queued ahead, 0 disables
    seed: int = 0

    @classmethod
    def preset(cls, name):
        """Training set-ups of the two networks"""
        if name == "spatiotemporal":
            return cls(model="spatiotemporal", epochs=200, batch_size=32, optimizer="adamw",
                       lr=0.002, weight_decay=0.005, schedule="cosine",
                       train_length=50, train_stride=25, val_stride=50)
        if name == "knightpupil":
            return cls()
        raise ConfigError(f"unknown preset '{name}'")

    @property
    def input_kind(self):
        return "binned" if self.model == "spatiotemporal" else "voxel"

    def validate(self):
        if self.model not in model_kinds:
            raise ConfigError(f"unknown model '{self.model}', expected one of {model_kinds}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "adamw"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")
        if self.schedule not in ("step", "cosine", "constant"):
            raise ConfigError(f"unknown schedule '{self.schedule}'")
        if self.loss not in ("mse", "l1", "smooth_l1"):
            raise ConfigError(f"unknown loss '{self.loss}'")
        if self.train_length < 1 or self.train_stride < 1 or self.val_stride < 1:
            raise ConfigError("window length and strides must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError(f"validation fraction must be in (0, 1), got {self.val_fraction}")
        if self.sparsity_lambda is not None and self.sparsity_lambda < 0:
            raise ConfigError("sparsity weight must be >= 0")
        unknown = set(self.checkpoints) - {"best_dist", "best_val_loss", "final"}
        if unknown:
            raise ConfigError(f"unknown checkpoint kinds {sorted(unknown)}")
        return self


class RunConfig(NamedTuple):
    trajectory: TrajectoryConfig = TrajectoryConfig()
    events: EventGenConfig = EventGenConfig()
    augment: AugmentConfig = AugmentConfig()
    encode: EncodeConfig = EncodeConfig()
    spatiotemporal: SpatiotemporalNetConfig = SpatiotemporalNetConfig()
    knightpupil: KnightPupilConfig = KnightPupilConfig()
    train: TrainConfig = TrainConfig()

    @property
    def model_config(self):
        return getattr(self, self.train.model)

    def with_seed(self, seed):
        """Make `seed` the single top-level seed of the run"""
        return self._replace(train=self.train._replace(seed=seed),
                             augment=self.augment._replace(seed=seed))

    def validate(self):
        for section in self:
            try:
                section.validate()
            except ConfigError:
                raise
            except ValueError as ex:
                raise ConfigError(str(ex)) from ex
        return self

    def dumps(self):
        return "".join(f"{k} = {v}\n" for k, v in sorted(flatten(self).items()))

    def save(self, path):
        Path(path).write_text(self.dumps())


def _is_record(value):
    return isinstance(value, tuple) and hasattr(value, "_fields")


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def flatten(record, prefix=""):
    out = dict()
    for name, value in record._asdict().items():
        key = f"{prefix}{name}"
        if _is_record(value):
            out.update(flatten(value, key + "."))
        else:
            out[key] = _format(value)
    return out


def _parse_scalar(text, kind, key):
    text = text.strip()
    try:
        if kind is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text, 0)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse '{text}' as {kind.__name__}") from None


def parse_value(text, annotation, default, key):
    """Parse `text` for a field declared as `annotation` with `default`."""

    if typing.get_origin(annotation) is typing.Union:
        if text.strip().lower() == "none":
            return None
        annotation = next(a for a in typing.get_args(annotation) if a is not type(None))

    if annotation is tuple or isinstance(default, tuple):
        kind = type(default[0]) if default else str
        return tuple(_parse_scalar(t, kind, key) for t in text.split(",") if t.strip())

    return _parse_scalar(text, annotation, key)


def apply_override(record, path, text, key=None):
    key = key or ".".join(path)
    name = path[0]
    if name not in record._fields:
        raise ConfigError(f"unknown configuration key '{key}'")
    current = getattr(record, name)

    if _is_record(current):
        if len(path) < 2:
            raise ConfigError(f"'{key}' is a section, not a value")
        return record._replace(**{name: apply_override(current, path[1:], text, key)})

    if len(path) != 1:
        raise ConfigError(f"unknown configuration key '{key}'")
    annotation = typing.get_type_hints(type(record))[name]
    return record._replace(**{name: parse_value(text, annotation, current, key)})


def parse_assignment(line, where="override"):
    key, sep, value = line.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"{where}: expected 'section.field = value', got '{line}'")
    return key.strip(), value.strip()


def loads_config(text, overrides=(), base=None, source="<config>"):
    """Defaults (or `base`), then the assignments in `text`, then `key=value` overrides."""

    config = base if base is not None else RunConfig()
    assignments = list()

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            assignments.append(parse_assignment(line, f"{source}:{lineno}"))

    assignments.extend(parse_assignment(o) for o in overrides)

    for key, value in assignments:
        config = apply_override(config, key.split("."), value)
        logger.debug(f"config {key} = {value}")

    return config.validate()


def load_config(path=None, overrides=(), base=None):
    text = Path(path).read_text() if path is not None else ""
    return loads_config(text, overrides, base, source=str(path))
