"""Experiment configuration: one master seed, per-stage knobs, text round-trip.

Config files are line-oriented ``key = value`` text; every key has a default
and command-line flags override file values. Stage seeds are derived from the
master seed by fixed offsets so a whole run is reproducible from one number.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .dataset import ClassLabel

# Fixed seed offsets per pipeline stage.
SEED_FOREST = 1
SEED_IMPORTANCE = 2
SEED_REBALANCE = 3
SEED_KMEANS = 4
SEED_ADABOOST = 5
SEED_SPLIT = 6

# Fig. 5-style rebalancing defaults: squeeze the two majority classes,
# inflate the two minorities, leave Probe untouched.
DEFAULT_REBALANCE_TARGETS: dict[ClassLabel, int] = {
    ClassLabel.NORMAL: 20000,
    ClassLabel.DOS: 20000,
    ClassLabel.U2R: 4000,
    ClassLabel.R2L: 4000,
}


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    feature_count: int = 23      # features kept after forest ranking
    clusters: int = 3            # k-means K
    nt: int = 5                  # boosting rounds
    forest_size: int = 50
    rebalance_targets: dict[ClassLabel, int] | None = None
    attack_classes_only: bool = False  # strict 4-class boosting mode
    entropy_window: int = 20
    entropy_warmup: int = 3
    interval_seconds: float = 5.0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    threads: int = 1

    def __post_init__(self):
        for name in ("feature_count", "clusters", "nt", "forest_size",
                     "entropy_window", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.feature_count > 41:
            raise ValueError("feature_count exceeds the 41-feature schema")
        if self.interval_seconds <= 0:
            raise ValueError("interval_seconds must be positive")

    def seed(self, offset: int) -> int:
        return self.master_seed + offset

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "rebalance_targets":
                v = _targets_to_text(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


def _targets_to_text(targets: dict[ClassLabel, int] | None) -> str:
    if not targets:
        return "none"
    return ",".join(f"{ClassLabel(c).display}:{n}" for c, n in sorted(targets.items()))


def _targets_from_text(text: str) -> dict[ClassLabel, int] | None:
    text = text.strip()
    if text.lower() in ("", "none"):
        return None
    targets = {}
    for part in text.split(","):
        name, count = part.split(":")
        targets[ClassLabel.from_name(name.strip())] = int(count)
    return targets


_FIELD_PARSERS = {
    "master_seed": int,
    "feature_count": int,
    "clusters": int,
    "nt": int,
    "forest_size": int,
    "rebalance_targets": _targets_from_text,
    "attack_classes_only": lambda s: s.strip().lower() in ("true", "1", "yes"),
    "entropy_window": int,
    "entropy_warmup": int,
    "interval_seconds": float,
    "kmeans_max_iter": int,
    "kmeans_tol": float,
    "threads": int,
}


def config_from_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines over a base config (defaults if omitted)."""
    cfg = base or RunConfig()
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_PARSERS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        overrides[key] = _FIELD_PARSERS[key](value)
    return replace(cfg, **overrides)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return config_from_text(fh.read(), base)
