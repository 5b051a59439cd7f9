"""Run configuration: a strict JSON schema with documented bounds."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Optional

from ..metrics import DIRECTIONS, Direction, Metric
from ..scenario import ParameterRange, ScenarioSpace, TemplateId
from ..simulator.behavior import Profile
from ..simulator.templates import ActorId, get_template


class Mode(str, Enum):
    EXPLORE = "Explore"
    GRID = "Grid"
    ANALYZE_ONLY = "AnalyzeOnly"


class ClusterSpace(str, Enum):
    KERNEL = "Kernel"
    DISTANCE = "Distance"


class Branch(str, Enum):
    BEHAVIOR = "Behavior"
    CRITICALITY = "Criticality"


# DBSCAN eps in the 3-D kernel embedding, read off the k-distance profiles of
# default runs (above the knee, where the cluster count stops changing).
DEFAULT_EPS = 0.2

# (lower, upper) inclusive bounds for numeric fields
BOUNDS = {
    "budget": (1, 100_000),
    "n_init": (1, 10_000),
    "grid_steps": (2, 200),
    "seed": (0, 2 ** 63 - 1),
    "pool_size": (2, 1 << 20),
    "n_features": (1, 100_000),
    "stride": (1, 1000),
    "band": (0, 100_000),
    "gamma": (1e-12, 1e12),
    "target_median": (1e-12, 1e12),
    "k": (1, 64),
    "eps_behavior": (1e-12, 1e12),
    "eps_criticality": (1e-12, 1e12),
    "min_pts": (1, 10_000),
    "archetypes": (1, 10_000),
    "prototypes": (0, 10_000),
    "nonconvex_threshold": (0.0, 1e12),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    template: str = TemplateId.SCENARIO1.value
    profile: str = Profile.NORMAL.value
    parameters: Optional[list] = None
    metric: str = Metric.WTTC.value
    pair: Optional[list] = None
    direction: Optional[str] = None
    mode: str = Mode.EXPLORE.value
    budget: int = 400
    n_init: int = 10
    grid_steps: int = 15
    seed: int = 0
    target: Optional[float] = None
    pool_size: int = 4096
    n_features: int = 500
    stride: int = 4
    band: Optional[int] = None
    gamma: float = 100.0
    target_median: float = 0.1
    k: int = 3
    cluster_space: str = ClusterSpace.KERNEL.value
    eps_behavior: float = DEFAULT_EPS
    eps_criticality: float = DEFAULT_EPS
    min_pts: int = 5
    archetypes: int = 15
    prototypes: int = 1
    nonconvex_threshold: Optional[float] = 0.1
    reduce_branch: str = Branch.CRITICALITY.value
    out_dir: str = "run"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _enum(TemplateId, self.template, "template")
        _enum(Profile, self.profile, "profile")
        _enum(Metric, self.metric, "metric")
        _enum(Mode, self.mode, "mode")
        _enum(ClusterSpace, self.cluster_space, "cluster_space")
        _enum(Branch, self.reduce_branch, "reduce_branch")
        if self.direction is not None:
            _enum(Direction, self.direction, "direction")
        if self.pair is not None:
            if not isinstance(self.pair, (list, tuple)) or len(self.pair) != 2:
                raise ConfigError("pair must be a list of two actor ids")
            for a in self.pair:
                _enum(ActorId, a, "pair")
            if self.pair[0] == self.pair[1]:
                raise ConfigError("pair needs two distinct actors")
        for name, (lo, hi) in BOUNDS.items():
            value = getattr(self, name)
            if value is None:
                continue
            integral = isinstance(getattr(RunConfig, name, 0.0), int) or name in ("band",)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be numeric, got {value!r}")
            if integral and not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if not (math.isfinite(value) and lo <= value <= hi):
                raise ConfigError(f"{name}={value} outside [{lo}, {hi}]")
        if self.target is not None and not math.isfinite(self.target):
            raise ConfigError("target must be finite")
        if self.mode == Mode.EXPLORE.value and self.budget < self.n_init:
            raise ConfigError(f"budget ({self.budget}) must be >= n_init ({self.n_init})")
        if not isinstance(self.out_dir, str) or not self.out_dir:
            raise ConfigError("out_dir must be a non-empty path")
        self.space()

    # resolved views -------------------------------------------------------

    def template_obj(self):
        return get_template(self.template, self.profile).with_space(self.space())

    def space(self) -> ScenarioSpace:
        base = get_template(self.template).space
        if self.parameters is None:
            return base
        if not isinstance(self.parameters, list) or not self.parameters:
            raise ConfigError("parameters must be a non-empty list of ranges")
        by_name = {p.name: p for p in base.parameters}
        out = []
        for item in self.parameters:
            if not isinstance(item, dict):
                raise ConfigError("each parameter range must be an object")
            extra = set(item) - {"name", "lower", "upper", "unit"}
            if extra:
                raise ConfigError(f"unknown parameter keys: {sorted(extra)}")
            name = item.get("name")
            if name not in by_name:
                raise ConfigError(f"unknown parameter {name!r} for {self.template}")
            default = by_name[name]
            try:
                out.append(ParameterRange(name, float(item.get("lower", default.lower)),
                                          float(item.get("upper", default.upper)),
                                          item.get("unit", default.unit)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"parameter {name}: {exc}") from exc
        if [p.name for p in out] != base.names:
            raise ConfigError(f"parameters must list {base.names} in order")
        return ScenarioSpace(base.template_id, tuple(out))

    def actor_pair(self) -> tuple:
        if self.pair is None:
            return get_template(self.template).primary_pair
        return (ActorId(self.pair[0]), ActorId(self.pair[1]))

    def resolved_direction(self) -> Direction:
        if self.direction is None:
            return DIRECTIONS[Metric(self.metric)]
        return Direction(self.direction)

    def eps(self, branch) -> float:
        if Branch(branch) is Branch.BEHAVIOR:
            return float(self.eps_behavior)
        return float(self.eps_criticality)

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)


def _enum(enum_cls, value, name):
    try:
        enum_cls(value)
    except ValueError:
        allowed = [e.value for e in enum_cls]
        raise ConfigError(f"{name}={value!r} not one of {allowed}") from None
