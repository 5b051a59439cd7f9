"""Select -> simulate -> evaluate loop over the normalized scenario space."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from ..metrics import DIRECTIONS, Direction, Metric, compute_series, summarize
from ..scenario import (ConcreteScenario, IdAllocator, ScenarioSpace, Source, denormalize,
                        normalize, sample_grid)
from ..simulator.engine import SimulationTrace, simulate
from ..simulator.templates import ScenarioTemplate
from .gp import DEFAULT_HYPER_GRID, GPModel, fit_gp
from .thompson import DEFAULT_FEATURES, thompson_next as _thompson_index

logger = logging.getLogger(__name__)

DEFAULT_POOL_SIZE = 4096
DEFAULT_N_INIT = 10


class StopReason(str, Enum):
    BUDGET_EXHAUSTED = "BudgetExhausted"
    TARGET_REACHED = "TargetReached"


@dataclass
class LogEntry:
    scenario: ConcreteScenario
    objective: float
    iteration: int


@dataclass
class ExplorationLog:
    space: ScenarioSpace
    entries: list = field(default_factory=list)
    direction: Direction = Direction.MINIMIZE
    termination: StopReason = StopReason.BUDGET_EXHAUSTED
    traces: dict = field(default_factory=dict, repr=False)

    def minimized(self) -> np.ndarray:
        y = np.array([e.objective for e in self.entries], dtype=float)
        return -y if self.direction is Direction.MAXIMIZE else y

    @property
    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(self.minimized()) if self.entries else np.zeros(0)

    @property
    def best(self) -> LogEntry:
        return self.entries[int(np.argmin(self.minimized()))]

    @property
    def scenarios(self) -> list[ConcreteScenario]:
        return [e.scenario for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "direction": self.direction.value,
            "termination": self.termination.value,
            "entries": [
                {"iteration": e.iteration, "id": e.scenario.id, "source": e.scenario.source.value,
                 "values": list(e.scenario.values), "objective": e.objective}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExplorationLog":
        space = ScenarioSpace.from_dict(data["space"])
        entries = [
            LogEntry(ConcreteScenario(tuple(e["values"]), Source(e["source"]), e["id"]),
                     float(e["objective"]), int(e["iteration"]))
            for e in data["entries"]
        ]
        return cls(space, entries, Direction(data["direction"]), StopReason(data["termination"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "id"] + self.space.names + ["objective", "best_so_far"])
        for e, best in zip(self.entries, self.best_so_far):
            w.writerow([e.iteration, e.scenario.id] + [repr(v) for v in e.scenario.values]
                       + [repr(e.objective), repr(float(best))])
        return buf.getvalue()


def candidate_pool(dim: int, seed: int, size: int = DEFAULT_POOL_SIZE) -> np.ndarray:
    """Scrambled Sobol points in [0,1]^dim, in sequence order."""
    sampler = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng([seed, 0x5EED]))
    m = int(np.ceil(np.log2(max(size, 2))))
    return sampler.random_base2(m)[:size]


def thompson_next(model: GPModel, candidate_pool, rng_seed, space: ScenarioSpace | None = None,
                  n_features: int = DEFAULT_FEATURES):
    """Pool candidate minimizing one random-feature posterior sample.

    The pool may hold ConcreteScenarios (then ``space`` is needed to
    normalize them) or unit vectors; the chosen element is returned as given.
    """
    pool = list(candidate_pool) if not isinstance(candidate_pool, np.ndarray) else candidate_pool
    if len(pool) == 0:
        raise ValueError("candidate pool is empty")
    if isinstance(pool[0], ConcreteScenario):
        if space is None:
            raise ValueError("space is required for a pool of ConcreteScenarios")
        U = np.array([normalize(c, space) for c in pool])
    else:
        U = np.atleast_2d(np.asarray(pool, dtype=float))
    return pool[_thompson_index(model, U, rng_seed, n_features)]


def minimize(objective: Callable[[ConcreteScenario], float], space: ScenarioSpace,
             budget: int, seed: int = 0, n_init: int = DEFAULT_N_INIT,
             pool_size: int = DEFAULT_POOL_SIZE, n_features: int = DEFAULT_FEATURES,
             hyper_grid: dict | None = None, target: float | None = None,
             direction: Direction = Direction.MINIMIZE,
             ids: IdAllocator | None = None) -> ExplorationLog:
    """Bayesian optimization of ``objective`` (raw metric value) over ``space``.

    ``target`` is on the raw objective scale; exploration stops once the best
    value reaches it.
    """
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if budget < n_init:
        raise ValueError(f"budget ({budget}) must be >= n_init ({n_init})")
    direction = Direction(direction)
    ids = ids or IdAllocator()
    sign = -1.0 if direction is Direction.MAXIMIZE else 1.0
    pool = candidate_pool(space.dim, seed, max(pool_size, n_init + 1))
    available = np.ones(len(pool), dtype=bool)
    log = ExplorationLog(space, direction=direction)
    X, y = [], []

    def evaluate(idx: int, source: Source, iteration: int):
        available[idx] = False
        scenario = denormalize(pool[idx], space, source, ids)
        value = float(objective(scenario))
        log.entries.append(LogEntry(scenario, value, iteration))
        X.append(pool[idx])
        y.append(sign * value)
        return value

    def reached() -> bool:
        return target is not None and min(y) <= sign * target

    for i in range(n_init):
        evaluate(i, Source.INITIAL, i)
        if reached():
            log.termination = StopReason.TARGET_REACHED
            return log

    for it in range(n_init, budget):
        if not available.any():
            break
        model = fit_gp(np.array(X), np.array(y), hyper_grid or DEFAULT_HYPER_GRID)
        free = np.flatnonzero(available)
        rng = np.random.default_rng([seed, it])
        choice = free[_thompson_index(model, pool[free], rng, n_features)]
        evaluate(int(choice), Source.OPTIMIZER, it)
        logger.debug("iteration %d: objective %.4g, best %.4g", it, log.entries[-1].objective,
                     min(y))
        if reached():
            log.termination = StopReason.TARGET_REACHED
            break
    return log


def scenario_objective(template: ScenarioTemplate, metric, pair, traces: dict | None = None):
    """Objective callable: simulate, compute the metric series, summarize."""
    metric = Metric(metric)

    def objective(scenario: ConcreteScenario) -> float:
        trace = simulate(scenario, template)
        if traces is not None:
            traces[scenario.id] = trace
        series = compute_series(metric, trace, pair[0], pair[1], template)
        return summarize(series)

    return objective


def explore(space: ScenarioSpace, template: ScenarioTemplate, metric, pair, budget: int,
            seed: int = 0, keep_traces: bool = True, direction=None, **kwargs) -> ExplorationLog:
    """Bayesian-optimization exploration of a logical scenario for one metric.

    ``direction`` defaults to the metric's criticality direction.
    """
    template = template.with_space(space)
    traces = {} if keep_traces else None
    direction = DIRECTIONS[Metric(metric)] if direction is None else Direction(direction)
    log = minimize(scenario_objective(template, metric, pair, traces), space, budget, seed,
                   direction=direction, **kwargs)
    if traces is not None:
        log.traces = traces
    return log


def grid_explore(space: ScenarioSpace, template: ScenarioTemplate, metric, pair, steps: int,
                 keep_traces: bool = True, ids: IdAllocator | None = None) -> ExplorationLog:
    """Evaluate every point of the full grid (baseline)."""
    template = template.with_space(space)
    traces = {} if keep_traces else None
    objective = scenario_objective(template, metric, pair, traces)
    log = ExplorationLog(space, direction=DIRECTIONS[Metric(metric)])
    for i, scenario in enumerate(sample_grid(space, steps, ids or IdAllocator())):
        log.entries.append(LogEntry(scenario, float(objective(scenario)), i))
    if traces is not None:
        log.traces = traces
    return log
