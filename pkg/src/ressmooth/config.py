"""Declarative experiment configuration and its INI-file parser.

A config file has sections [dataset], [model], [optimizer], [regularizer]
and [run]; keys mirror the dataclass fields below. Unknown sections or keys
are a hard error so typos in grid scripts cannot pass silently.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .annealing import AnnealSchedule
from .errors import ConfigError
from .optim import AdaGradConfig, AdamConfig, SgdConfig
from .smoothing import SmoothingConfig

DATASET_KINDS = ("fashion_mnist", "cifar10")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_files: tuple = ()  # cifar10 binary batches
    test_files: tuple = ()
    take: int = 0  # fixed-size uniform subset of the train split; 0 = all
    subsample_ratio: float = 1.0
    seed: int = 0
    augment: bool = False

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "fashion_mnist":
            missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                       if not getattr(self, k)]
            if missing:
                raise ConfigError(f"dataset kind fashion_mnist needs {', '.join(missing)}")
        else:
            if not self.train_files or not self.test_files:
                raise ConfigError("dataset kind cifar10 needs train_files and test_files")
        if self.take < 0:
            raise ConfigError(f"take must be >= 0, got {self.take}")
        if not 0.0 < self.subsample_ratio <= 1.0:
            raise ConfigError(f"subsample_ratio must be in (0, 1], got {self.subsample_ratio}")


@dataclass(frozen=True)
class ModelSpec:
    hidden: tuple = (256,)
    output_activation: str = "softmax"

    def __post_init__(self):
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.output_activation not in ("softmax", "identity"):
            raise ConfigError(f"output_activation must be softmax or identity")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    model: ModelSpec
    optimizer: object  # SgdConfig | AdamConfig | AdaGradConfig
    epochs: int
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    label_smoothing: float = 0.0
    batch_size: int = 128
    trials: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if self.label_smoothing > 0.0 and self.smoothing.mode != "off":
            raise ConfigError("label smoothing and residual smoothing are alternatives; "
                              "pick one")


_SECTION_KEYS = {
    "dataset": {"kind", "train_images", "train_labels", "test_images", "test_labels",
                "train_files", "test_files", "take", "subsample_ratio", "seed", "augment"},
    "model": {"hidden", "output_activation"},
    "optimizer": {"kind", "lr_high", "lr_low", "drop_at", "momentum", "weight_decay",
                  "lr", "beta1", "beta2", "eps"},
    "regularizer": {"mode", "schedule", "mu", "b", "alpha", "n_steps", "eps_std",
                    "local_scale", "const_s", "label_smoothing"},
    "run": {"epochs", "batch_size", "trials", "base_seed"},
}

_OPT_KEYS = {
    "sgd": {"kind", "lr_high", "lr_low", "drop_at", "momentum", "weight_decay"},
    "adam": {"kind", "lr", "beta1", "beta2", "eps"},
    "adagrad": {"kind", "lr", "eps"},
}


def _to_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None


def _to_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None


def _to_bool(section, key, raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparsable config: {exc}") from None

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    for required in ("dataset", "model", "optimizer", "run"):
        if required not in parser:
            raise ConfigError(f"missing section [{required}]")

    def resolve(p: str) -> str:
        if base_dir is None or not p:
            return p
        return str((base_dir / p)) if not Path(p).is_absolute() else p

    ds = parser["dataset"]
    if "kind" not in ds:
        raise ConfigError("missing key 'kind' in [dataset]")
    dataset = DatasetSpec(
        kind=ds["kind"].strip(),
        train_images=resolve(ds.get("train_images", "").strip()),
        train_labels=resolve(ds.get("train_labels", "").strip()),
        test_images=resolve(ds.get("test_images", "").strip()),
        test_labels=resolve(ds.get("test_labels", "").strip()),
        train_files=tuple(resolve(p.strip()) for p in ds.get("train_files", "").split(",") if p.strip()),
        test_files=tuple(resolve(p.strip()) for p in ds.get("test_files", "").split(",") if p.strip()),
        take=_to_int("dataset", "take", ds.get("take", "0")),
        subsample_ratio=_to_float("dataset", "subsample_ratio", ds.get("subsample_ratio", "1.0")),
        seed=_to_int("dataset", "seed", ds.get("seed", "0")),
        augment=_to_bool("dataset", "augment", ds.get("augment", "false")),
    )

    md = parser["model"]
    hidden_raw = md.get("hidden", "256")
    try:
        hidden = tuple(int(h.strip()) for h in hidden_raw.split(",") if h.strip())
    except ValueError:
        raise ConfigError(f"[model] hidden = {hidden_raw!r} is not a width list") from None
    model = ModelSpec(hidden=hidden, output_activation=md.get("output_activation", "softmax").strip())

    op = parser["optimizer"]
    opt_kind = op.get("kind", "sgd").strip()
    if opt_kind not in _OPT_KEYS:
        raise ConfigError(f"unknown optimizer kind {opt_kind!r}")
    for key in op:
        if key not in _OPT_KEYS[opt_kind]:
            raise ConfigError(f"key {key!r} does not apply to optimizer kind {opt_kind!r}")
    if opt_kind == "sgd":
        optimizer = SgdConfig(
            lr_high=_to_float("optimizer", "lr_high", op.get("lr_high", "0.1")),
            lr_low=_to_float("optimizer", "lr_low", op.get("lr_low", "0.001")),
            drop_at=_to_float("optimizer", "drop_at", op.get("drop_at", "0.75")),
            momentum=_to_float("optimizer", "momentum", op.get("momentum", "0.9")),
            weight_decay=_to_float("optimizer", "weight_decay", op.get("weight_decay", "0.0")),
        )
    elif opt_kind == "adam":
        optimizer = AdamConfig(
            lr=_to_float("optimizer", "lr", op.get("lr", "0.001")),
            beta1=_to_float("optimizer", "beta1", op.get("beta1", "0.9")),
            beta2=_to_float("optimizer", "beta2", op.get("beta2", "0.999")),
            eps=_to_float("optimizer", "eps", op.get("eps", "1e-8")),
        )
    else:
        optimizer = AdaGradConfig(
            lr=_to_float("optimizer", "lr", op.get("lr", "0.01")),
            eps=_to_float("optimizer", "eps", op.get("eps", "1e-10")),
        )

    if "regularizer" in parser:
        rg = parser["regularizer"]
        smoothing = SmoothingConfig(
            mode=rg.get("mode", "off").strip(),
            alpha=_to_float("regularizer", "alpha", rg.get("alpha", "0.0")),
            n_steps=_to_int("regularizer", "n_steps", rg.get("n_steps", "1")),
            eps_std=_to_float("regularizer", "eps_std", rg.get("eps_std", "1e-8")),
            local_scale=_to_float("regularizer", "local_scale", rg.get("local_scale", "1.0")),
        )
        schedule = AnnealSchedule(
            kind=rg.get("schedule", "off").strip(),
            mu=_to_float("regularizer", "mu", rg.get("mu", "0.75")),
            b=_to_float("regularizer", "b", rg.get("b", "0.5")),
            const_s=_to_float("regularizer", "const_s", rg.get("const_s", "1.0")),
        )
        label_smoothing = _to_float("regularizer", "label_smoothing",
                                    rg.get("label_smoothing", "0.0"))
    else:
        smoothing = SmoothingConfig()
        schedule = AnnealSchedule()
        label_smoothing = 0.0

    rn = parser["run"]
    if "epochs" not in rn:
        raise ConfigError("missing key 'epochs' in [run]")
    return ExperimentConfig(
        dataset=dataset,
        model=model,
        optimizer=optimizer,
        epochs=_to_int("run", "epochs", rn["epochs"]),
        smoothing=smoothing,
        schedule=schedule,
        label_smoothing=label_smoothing,
        batch_size=_to_int("run", "batch_size", rn.get("batch_size", "128")),
        trials=_to_int("run", "trials", rn.get("trials", "5")),
        base_seed=_to_int("run", "base_seed", rn.get("base_seed", "0")),
    )


def parse_config(path) -> ExperimentConfig:
    """Parse a config file; relative dataset paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=path.parent)
