"""Pipeline configuration: a validated, JSON-loadable hyperparameter set."""

import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

DESCRIPTORS = ("sift", "hog2x2", "hog3x3", "color")
CLASSIFIERS = ("knn", "ecoc_svm", "cnn4", "cnn16")
KERNELS = ("linear", "gaussian")
OPTIMIZER_KINDS = ("adadelta", "rmsprop")
AUGMENT_MODES = ("none", "shear", "zoom")


@dataclass(frozen=True)
class PipelineConfig:
    """Every stage's tunables; defaults follow the teeth-classification setup."""

    descriptor: str = "sift"
    input_size: int = 128
    dictionary_m: int = 200
    pyramid_levels: int = 2
    classifier: str = "ecoc_svm"
    seed: int = 0
    # dictionary learning / encoding
    sample_count: int = 20000
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    llc_knn: int = 5
    llc_beta: float = 1e-4
    # classical classifiers
    knn_k: int = 5
    svm_c: float = 10.0
    svm_kernel: str = "linear"
    svm_gamma: float = 0.0  # 0 means 1/dim at train time
    # network training
    epochs: int = 30
    batch_size: int = 32
    optimizer: str = "adadelta"
    augment: str = "none"
    width_scale: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ConfigError(f"descriptor must be one of {DESCRIPTORS}, got {self.descriptor!r}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        if self.svm_kernel not in KERNELS:
            raise ConfigError(f"svm_kernel must be one of {KERNELS}, got {self.svm_kernel!r}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZER_KINDS}, got {self.optimizer!r}")
        if self.augment not in AUGMENT_MODES:
            raise ConfigError(f"augment must be one of {AUGMENT_MODES}, got {self.augment!r}")
        positives = {
            "input_size": self.input_size, "dictionary_m": self.dictionary_m,
            "sample_count": self.sample_count, "kmeans_max_iter": self.kmeans_max_iter,
            "llc_knn": self.llc_knn, "knn_k": self.knn_k, "epochs": self.epochs,
            "batch_size": self.batch_size, "threads": self.threads,
        }
        for name, value in positives.items():
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.input_size < 8:
            raise ConfigError(f"input_size must be at least 8, got {self.input_size}")
        if self.dictionary_m < 2:
            raise ConfigError(f"dictionary_m must be at least 2, got {self.dictionary_m}")
        if not 0 <= self.pyramid_levels <= 4:
            raise ConfigError(f"pyramid_levels must be 0-4, got {self.pyramid_levels}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name, value in (("kmeans_tol", self.kmeans_tol), ("llc_beta", self.llc_beta),
                            ("svm_c", self.svm_c), ("width_scale", self.width_scale)):
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.svm_gamma < 0:
            raise ConfigError(f"svm_gamma must be >= 0 (0 = 1/dim), got {self.svm_gamma}")


def config_from_dict(data, task=None) -> PipelineConfig:
    """Build a config from a JSON object, rejecting unknown keys.

    When ``input_size`` is absent it defaults by task: 128 for teeth
    crops, 640 for whole-radiograph sex classification.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(data).__name__}")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    if "input_size" not in data and task == "sex":
        data["input_size"] = 640
    for f in fields(PipelineConfig):
        if f.name in data and f.type in (float, "float") \
                and isinstance(data[f.name], int) \
                and not isinstance(data[f.name], bool):
            data[f.name] = float(data[f.name])
    return PipelineConfig(**data)


def load_config(path, task=None) -> PipelineConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, task=task)


def save_config(cfg: PipelineConfig, path):
    with open(path, "w") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
