"""Logical scenarios as parameter spaces, concrete scenarios as points in them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class TemplateId(str, Enum):
    SCENARIO1 = "Scenario1"
    SCENARIO2 = "Scenario2"


class Source(str, Enum):
    GRID = "Grid"
    INITIAL = "Initial"
    OPTIMIZER = "Optimizer"


@dataclass(frozen=True)
class ParameterRange:
    name: str
    lower: float
    upper: float
    unit: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError(f"parameter {self.name!r}: bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(
                f"parameter {self.name!r}: lower ({self.lower}) must be < upper ({self.upper})")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ScenarioSpace:
    template_id: TemplateId
    parameters: tuple[ParameterRange, ...]

    def __post_init__(self):
        object.__setattr__(self, "template_id", TemplateId(self.template_id))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.parameters:
            raise ValueError("a scenario space needs at least one parameter")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names: {names}")

    @property
    def dim(self) -> int:
        return len(self.parameters)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for p in self.parameters])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for p in self.parameters])

    def contains(self, values, tol: float = 1e-9) -> bool:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            return False
        slack = tol * (self.upper - self.lower)
        return bool(np.all(values >= self.lower - slack) and np.all(values <= self.upper + slack))

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id.value,
            "parameters": [
                {"name": p.name, "lower": p.lower, "upper": p.upper, "unit": p.unit}
                for p in self.parameters
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpace":
        return cls(TemplateId(data["template_id"]),
                   tuple(ParameterRange(**p) for p in data["parameters"]))


class IdAllocator:
    """Monotonically increasing scenario ids; one allocator per run keeps
    ids reproducible."""

    def __init__(self, start: int = 0):
        self._next = start

    def take(self) -> int:
        value = self._next
        self._next += 1
        return value


_default_ids = IdAllocator()


@dataclass(frozen=True)
class ConcreteScenario:
    values: tuple[float, ...]
    source: Source = Source.OPTIMIZER
    id: int = field(default_factory=lambda: _default_ids.take())

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "source", Source(self.source))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def as_dict(self, space: ScenarioSpace) -> dict[str, float]:
        return dict(zip(space.names, self.values))


def make_scenario(space: ScenarioSpace, values: Sequence[float],
                  source: Source = Source.OPTIMIZER, id: int | None = None) -> ConcreteScenario:
    """Validate ``values`` against ``space`` and wrap them in a ConcreteScenario."""
    values = np.asarray(values, dtype=float)
    if values.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} values, got shape {values.shape}")
    if not space.contains(values):
        raise ValueError(f"values {values.tolist()} outside the scenario space bounds")
    values = np.clip(values, space.lower, space.upper)
    if id is None:
        return ConcreteScenario(tuple(values), source)
    return ConcreteScenario(tuple(values), source, id)


def grid_axes(space: ScenarioSpace, steps_per_dim: int) -> list[np.ndarray]:
    if steps_per_dim < 2:
        raise ValueError(f"steps_per_dim must be >= 2, got {steps_per_dim}")
    return [np.linspace(p.lower, p.upper, steps_per_dim) for p in space.parameters]


def sample_grid(space: ScenarioSpace, steps_per_dim: int,
                ids: IdAllocator | None = None) -> list[ConcreteScenario]:
    """Full Cartesian grid, both endpoints included, last dimension varying fastest."""
    axes = grid_axes(space, steps_per_dim)
    ids = ids or _default_ids
    return [ConcreteScenario(values, Source.GRID, ids.take()) for values in itertools.product(*axes)]


def normalize(scenario: ConcreteScenario, space: ScenarioSpace) -> np.ndarray:
    values = scenario.as_array() if isinstance(scenario, ConcreteScenario) else np.asarray(scenario, float)
    return (values - space.lower) / (space.upper - space.lower)


def denormalize(u, space: ScenarioSpace, source: Source = Source.OPTIMIZER,
                ids: IdAllocator | None = None) -> ConcreteScenario:
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dim,):
        raise ValueError(f"expected a {space.dim}-vector, got shape {u.shape}")
    if np.any(u < 0.0) or np.any(u > 1.0) or not np.all(np.isfinite(u)):
        raise ValueError(f"unit vector components must lie in [0, 1], got {u.tolist()}")
    values = space.lower + u * (space.upper - space.lower)
    return ConcreteScenario(tuple(values), source, (ids or _default_ids).take())
