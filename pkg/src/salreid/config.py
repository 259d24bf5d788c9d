"""Configuration dataclasses for the whole pipeline.

Every tunable lives here with its default, and the full bundle round-trips
through an INI-style file (section headers, ``key=value`` lines) so that a
run is reproducible from its config file plus one seed.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class GridConfig:
    """Dense patch grid and descriptor layout."""

    patch_size: int = 10
    stride: int = 4
    scales: tuple[float, ...] = (0.5, 0.75, 1.0)
    color_bins: int = 32
    sift_cells: int = 4
    sift_orient_bins: int = 8
    adjacency_relax: int = 2

    def __post_init__(self) -> None:
        if self.patch_size <= 0:
            raise ValueError("patch_size must be positive")
        if not (0 < self.stride <= self.patch_size):
            raise ValueError("stride must be in (0, patch_size]")
        if not self.scales or any(not (0.0 < s <= 1.0) for s in self.scales):
            raise ValueError("all scale factors must lie in (0, 1]")
        if self.adjacency_relax < 0:
            raise ValueError("adjacency_relax must be >= 0")

    @property
    def descriptor_dim(self) -> int:
        color = self.color_bins * 3 * len(self.scales)
        sift = self.sift_cells * self.sift_cells * self.sift_orient_bins * 3
        return color + sift


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian similarity kernel between patch descriptors.

    The default bandwidth is the empirical median of matched-patch
    distances from a calibration run; scorers never hardcode it.
    """

    sigma: float = 0.28

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class SaliencyConfig:
    """Per-patch saliency estimation parameters.

    ``sigma0`` converts a raw saliency score into a salient-probability;
    the default is the median KNN score from a calibration image set.
    """

    method: str = "knn"
    alpha_k: float = 0.5
    sigma0: float = 1.0
    nu: float = 0.1
    rbf_sigma: float = 0.0  # 0 = per-patch median pairwise distance
    ocsvm_tol: float = 1e-6
    ocsvm_max_iter: int = 10_000

    def __post_init__(self) -> None:
        if self.method not in ("knn", "ocsvm"):
            raise ValueError("method must be 'knn' or 'ocsvm'")
        if not (0.0 < self.alpha_k < 1.0):
            raise ValueError("alpha_k must lie in (0, 1)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if not (0.0 < self.nu <= 1.0):
            raise ValueError("nu must lie in (0, 1]")
        if self.rbf_sigma < 0:
            raise ValueError("rbf_sigma must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """Structural ranking trainer (n-slack cutting plane)."""

    C: float = 100.0
    epsilon: float = 1e-3
    max_iters: int = 100
    qp_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class TrialConfig:
    """Evaluation protocol: repeated random even splits."""

    trials: int = 10
    split_fraction: float = 0.5
    seed: int = 0
    single_shot: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (0.0 < self.split_fraction < 1.0):
            raise ValueError("split_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class MatchConfig:
    """Saliency-aware scorer parameters."""

    alpha_sdc: float = 1.0
    mu_sal: float = 1.0
    flip_fusion_sign: bool = False

    def __post_init__(self) -> None:
        if self.alpha_sdc <= 0:
            raise ValueError("alpha_sdc must be positive")
        if self.mu_sal <= 0:
            raise ValueError("mu_sal must be positive")


@dataclass(frozen=True)
class AnnotationConfig:
    """Human-annotation scoring bandwidths and quorum."""

    sigma_avg: float = 4.0
    sigma_std: float = 2.0
    min_labelers: int = 1
    gallery_size: int = 32

    def __post_init__(self) -> None:
        if self.sigma_avg <= 0 or self.sigma_std <= 0:
            raise ValueError("bandwidths must be positive")
        if self.gallery_size < 2:
            raise ValueError("gallery_size must be >= 2")


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    trial: TrialConfig = field(default_factory=TrialConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)

    @property
    def seed(self) -> int:
        return self.trial.seed

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, trial=replace(self.trial, seed=seed))


_SECTIONS = {
    "grid": GridConfig,
    "kernel": KernelConfig,
    "saliency": SaliencyConfig,
    "train": TrainConfig,
    "trial": TrialConfig,
    "match": MatchConfig,
    "annotation": AnnotationConfig,
}


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) if not isinstance(v, float) else format(v, "g") for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(raw: str, target_type):
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if target_type is str:
        return raw.strip()
    # tuples of floats (the only compound field type used)
    return tuple(float(part) for part in raw.split(",") if part.strip())


def dump_config(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case (e.g. train C)
    for section, _ in _SECTIONS.items():
        sub = getattr(cfg, section)
        parser[section] = {f.name: _format_value(getattr(sub, f.name)) for f in fields(sub)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_config(path: str | Path | None = None, text: str | None = None) -> PipelineConfig:
    """Load a pipeline config; missing sections or keys keep their defaults.

    The REID_SEED environment variable, when set, overrides the configured
    seed so batch launchers can vary it without editing files.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if text is not None:
        parser.read_string(text)
    elif path is not None:
        read = parser.read(str(path))
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")

    parts = {}
    for section, cls in _SECTIONS.items():
        kwargs = {}
        if parser.has_section(section):
            type_by_name = {f.name: f.type for f in fields(cls)}
            defaults = cls()
            for key, raw in parser.items(section):
                if key not in type_by_name:
                    raise KeyError(f"unknown config key [{section}] {key}")
                kwargs[key] = _parse_value(raw, type(getattr(defaults, key)))
        parts[section] = cls(**kwargs)
    cfg = PipelineConfig(**parts)

    env_seed = os.environ.get("REID_SEED")
    if env_seed is not None:
        cfg = cfg.with_seed(int(env_seed))
    return cfg


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg))
