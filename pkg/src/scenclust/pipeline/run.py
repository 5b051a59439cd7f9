"""Stage runner: explore -> metrics -> distances -> embed -> cluster -> reduce -> plots.

Every stage persists its artifacts under the run directory and records their
sha256 in manifest.json before the next stage starts. A stage is skipped when
the previous manifest holds the same input key and its artifacts still hash
to the recorded values.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..embedding import ClusterAssignment, Embedding, dbscan, embed_distances
from ..explorer import ExplorationLog, explore, grid_explore
from ..metrics import Metric, compute_series
from ..reduction import ReducedScenarioSet, reduce
from ..scenario import IdAllocator
from ..similarity import (DistanceMatrix, build_distance_matrix, extract_trajectory,
                          series_sequence)
from ..simulator.engine import SimulationTrace
from ..simulator.templates import ActorId
from .config import Branch, ClusterSpace, Mode, RunConfig

logger = logging.getLogger(__name__)

STAGES = ("explore", "metrics", "distances", "embed", "cluster", "reduce", "plots")
MANIFEST = "manifest.json"
FORMAT_VERSION = 1

# config fields each stage depends on (upstream artifact hashes are added on top)
STAGE_FIELDS = {
    "explore": ("template", "profile", "parameters", "metric", "pair", "direction", "mode",
                "budget", "n_init", "grid_steps", "seed", "target", "pool_size", "n_features"),
    "metrics": ("template", "profile", "parameters", "metric", "pair"),
    "distances": ("stride", "band", "metric"),
    "embed": ("gamma", "target_median", "k"),
    "cluster": ("cluster_space", "eps_behavior", "eps_criticality", "min_pts"),
    "reduce": ("archetypes", "prototypes", "nonconvex_threshold", "seed", "reduce_branch"),
    "plots": ("template",),
}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    space: dict = field(default_factory=dict)
    status: str = "Running"
    failed_stage: str | None = None
    error: str | None = None
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def summary(self) -> dict:
        out = {}
        explore_info = self.stages.get("explore", {}).get("info", {})
        if explore_info:
            out["n_scenarios"] = len(explore_info["traces"])
            out["collisions"] = sum(t["termination"] == "Collision" for t in explore_info["traces"])
        cl = self.stages.get("cluster", {}).get("info", {})
        if cl:
            out["n_clusters"] = {b: v["n_clusters"] for b, v in cl.items()}
            out["noise_fraction"] = {b: v["noise_fraction"] for b, v in cl.items()}
        red = self.stages.get("reduce", {}).get("info", {})
        if red:
            out["reduced_size"] = red["reduced_set"]["size"]
            out["reduced_branch"] = red["reduced_set"]["branch"]
        return out

    def artifacts(self, stage: str) -> dict:
        if stage not in self.stages:
            raise PipelineError(stage, "stage has not completed in this run directory")
        return self.stages[stage]["artifacts"]

    def info(self, stage: str) -> dict:
        if stage not in self.stages:
            raise PipelineError(stage, "stage has not completed in this run directory")
        return self.stages[stage]["info"]

    def to_dict(self, timings: bool = True) -> dict:
        data = {
            "format": FORMAT_VERSION,
            "config": self.config,
            "space": self.space,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "stages": {s: self.stages[s] for s in STAGES if s in self.stages},
            "summary": self.summary,
            "warnings": list(self.warnings),
        }
        if timings:
            data["timings"] = self.timings
        return data

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"

    def fingerprint(self) -> str:
        """Hash of the manifest without timings (the determinism check)."""
        return hashlib.sha256(self.to_json(timings=False).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(config=data["config"], space=data.get("space", {}),
                   status=data.get("status", "Running"), failed_stage=data.get("failed_stage"),
                   error=data.get("error"), stages=data.get("stages", {}),
                   timings=data.get("timings", {}), warnings=data.get("warnings", []))

    @classmethod
    def load(cls, run_dir) -> "RunManifest":
        path = Path(run_dir) / MANIFEST
        if not path.exists():
            raise FileNotFoundError(f"no {MANIFEST} in {run_dir}")
        return cls.from_dict(json.loads(path.read_text()))

    def save(self, run_dir) -> Path:
        path = Path(run_dir) / MANIFEST
        path.write_text(self.to_json())
        return path


def verify_artifacts(run_dir, artifacts: dict) -> bool:
    run_dir = Path(run_dir)
    for rel, digest in artifacts.items():
        p = run_dir / rel
        if not p.is_file() or sha256_file(p) != digest:
            return False
    return True


class Runner:
    def __init__(self, config: RunConfig):
        self.config = config
        self.dir = Path(config.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        try:
            self.previous = RunManifest.load(self.dir)
        except (FileNotFoundError, json.JSONDecodeError, KeyError):
            self.previous = None
        echo = config.to_dict()
        echo.pop("out_dir")  # the manifest lives there; keeps runs comparable across directories
        self.manifest = RunManifest(config=echo, space=config.space().to_dict())
        self.template = config.template_obj()
        self.pair = config.actor_pair()
        self._traces: dict = {}
        self._series: dict = {}

    # plumbing -------------------------------------------------------------

    def path(self, stage: str, rel: str) -> Path:
        """Resolve an artifact of ``stage``; refuses anything the manifest does not list."""
        if rel not in self.manifest.artifacts(stage):
            raise PipelineError(stage, f"artifact {rel} is not listed in the manifest")
        return self.dir / rel

    def write(self, rel: str, text: str) -> str:
        p = self.dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return rel

    def _key(self, stage: str, upstream) -> str:
        cfg = self.config.to_dict()
        payload = {
            "stage": stage,
            "config": {f: cfg[f] for f in STAGE_FIELDS[stage]},
            "upstream": {u: self.manifest.stages[u]["artifacts"] for u in upstream},
        }
        return _digest(payload)

    def stage(self, name: str, upstream, fn):
        key = self._key(name, upstream)
        prev = self.previous.stages.get(name) if self.previous else None
        t0 = time.perf_counter()
        if prev and prev.get("key") == key and verify_artifacts(self.dir, prev["artifacts"]):
            logger.info("stage %s: reusing persisted artifacts", name)
            self.manifest.stages[name] = prev
            self.manifest.timings[name] = {"seconds": 0.0, "reused": True}
            self.manifest.warnings.extend(prev["info"].get("warnings", []))
            return prev["info"]
        logger.info("stage %s: running", name)
        try:
            artifacts, info = fn()
        except PipelineError as exc:
            self.fail(name, str(exc))
            raise
        except Exception as exc:
            self.fail(name, f"{type(exc).__name__}: {exc}")
            raise PipelineError(name, str(exc)) from exc
        self.manifest.stages[name] = {
            "key": key,
            "artifacts": {rel: sha256_file(self.dir / rel) for rel in sorted(artifacts)},
            "info": info,
        }
        self.manifest.timings[name] = {"seconds": round(time.perf_counter() - t0, 3),
                                       "reused": False}
        self.manifest.warnings.extend(info.get("warnings", []))
        self.manifest.save(self.dir)
        return info

    def fail(self, stage: str, message: str):
        self.manifest.status = "Failed"
        self.manifest.failed_stage = stage
        self.manifest.error = message
        self.manifest.save(self.dir)

    # data access ----------------------------------------------------------

    def scenario_log(self) -> ExplorationLog:
        return ExplorationLog.from_dict(json.loads(self.path("explore", "exploration/log.json").read_text()))

    def traces(self) -> list[SimulationTrace]:
        out = []
        for meta in self.manifest.info("explore")["traces"]:
            rel = meta["path"]
            if rel not in self._traces:
                self._traces[rel] = SimulationTrace.from_csv(self.path("explore", rel).read_text(),
                                                             meta)
            out.append(self._traces[rel])
        return out

    def series_values(self) -> list[np.ndarray]:
        out = []
        for item in self.manifest.info("metrics")["series"]:
            rel = item["path"]
            if rel not in self._series:
                data = np.loadtxt(self.path("metrics", rel), delimiter=",", skiprows=1, ndmin=2)
                self._series[rel] = data[:, 1].copy()
            out.append(self._series[rel])
        return out

    def matrix(self, branch) -> DistanceMatrix:
        rel = self.manifest.info("distances")[Branch(branch).value]["path"]
        return DistanceMatrix.load(self.path("distances", rel))

    def embedding(self, branch) -> Embedding:
        info = self.manifest.info("embed")[Branch(branch).value]
        emb = Embedding.from_csv(self.path("embed", info["path"]).read_text(), info["gamma"])
        emb.scale = info["scale"]
        emb.negative_mass = info["negative_mass"]
        return emb

    def assignment(self, branch) -> ClusterAssignment:
        info = self.manifest.info("cluster")[Branch(branch).value]
        return ClusterAssignment.from_csv(self.path("cluster", info["path"]).read_text(),
                                          info["eps"], info["min_pts"])

    # stages ---------------------------------------------------------------

    def run_explore(self):
        cfg = self.config
        space = cfg.space()
        ids = IdAllocator()
        if cfg.mode == Mode.GRID.value:
            log = grid_explore(space, self.template, cfg.metric, self.pair, cfg.grid_steps, ids=ids)
        else:
            log = explore(space, self.template, cfg.metric, self.pair, cfg.budget, seed=cfg.seed,
                          n_init=cfg.n_init, pool_size=cfg.pool_size, n_features=cfg.n_features,
                          target=cfg.target, direction=cfg.resolved_direction(), ids=ids)
        artifacts = [self.write("exploration/log.json", log.to_json()),
                     self.write("exploration/log.csv", log.to_csv())]
        metas = []
        for e in log.entries:
            trace = log.traces[e.scenario.id]
            rel = f"traces/trace_{e.scenario.id:05d}.csv"
            artifacts.append(self.write(rel, trace.to_csv()))
            self._traces[rel] = trace
            metas.append({"path": rel, **trace.meta()})
        best = log.best
        info = {
            "mode": cfg.mode,
            "termination": log.termination.value,
            "best": {"id": best.scenario.id, "objective": best.objective,
                     "values": list(best.scenario.values)},
            "traces": metas,
        }
        return artifacts, info

    def run_metrics(self):
        metric = Metric(self.config.metric)
        artifacts, series = [], []
        for trace in self.traces():
            s = compute_series(metric, trace, self.pair[0], self.pair[1], self.template)
            rel = f"series/series_{trace.scenario_id:05d}.csv"
            artifacts.append(self.write(rel, s.to_csv()))
            self._series[rel] = np.asarray(s.values, dtype=float)
            series.append({"id": trace.scenario_id, "path": rel, "summary": s.summary})
        info = {"metric": metric.value, "pair": [a.value for a in self.pair],
                "direction": self.config.resolved_direction().value, "series": series}
        return artifacts, info

    def run_distances(self):
        cfg = self.config
        traces = self.traces()
        ids = [t.scenario_id for t in traces]
        ego = build_distance_matrix([extract_trajectory(t, ActorId.EGO, cfg.stride) for t in traces],
                                    "EgoTrajectoryDTW", cfg.band)
        crit = build_distance_matrix([series_sequence(v, i, cfg.stride)
                                      for v, i in zip(self.series_values(), ids)],
                                     f"{cfg.metric}DTW", cfg.band)
        info, artifacts = {}, []
        for branch, dm, rel in ((Branch.BEHAVIOR, ego, "matrices/ego_dtw.csv"),
                                (Branch.CRITICALITY, crit, f"matrices/{cfg.metric.lower()}_dtw.csv")):
            artifacts.append(self.write(rel, dm.to_csv()))
            info[branch.value] = {"path": rel, "kind": dm.kind, "n": dm.n}
        return artifacts, info

    def run_embed(self):
        cfg = self.config
        info, artifacts = {}, []
        for branch in Branch:
            emb = embed_distances(self.matrix(branch), cfg.gamma, cfg.k, cfg.target_median)
            rel = f"embedding/{branch.value.lower()}.csv"
            artifacts.append(self.write(rel, emb.to_csv()))
            info[branch.value] = {"path": rel, "gamma": emb.gamma, "k": emb.k,
                                  "scale": emb.scale, "negative_mass": emb.negative_mass,
                                  "eigenvalues": [float(v) for v in emb.eigenvalues]}
        return artifacts, info

    def run_cluster(self):
        cfg = self.config
        info, artifacts = {}, []
        for branch in Branch:
            emb = self.embedding(branch)
            eps = cfg.eps(branch)
            if cfg.cluster_space == ClusterSpace.DISTANCE.value:
                dm = self.matrix(branch)
                assignment = dbscan(distances=dm.D * emb.scale, eps=eps, min_pts=cfg.min_pts,
                                    ids=dm.ids)
            else:
                assignment = dbscan(emb.coordinates, eps, cfg.min_pts, ids=emb.ids)
            rel = f"clusters/{branch.value.lower()}.csv"
            artifacts.append(self.write(rel, assignment.to_csv()))
            sizes = np.bincount(assignment.labels[assignment.labels >= 0],
                                minlength=assignment.n_clusters)
            info[branch.value] = {"path": rel, "eps": eps, "min_pts": cfg.min_pts,
                                  "space": cfg.cluster_space,
                                  "n_clusters": assignment.n_clusters,
                                  "noise_fraction": assignment.noise_fraction,
                                  "sizes": [int(s) for s in sizes]}
        return artifacts, info

    def run_reduce(self):
        cfg = self.config
        log = self.scenario_log()
        params = {e.scenario.id: dict(zip(log.space.names, map(float, e.scenario.values)))
                  for e in log.entries}
        info, artifacts, texts, notes = {}, [], {}, []
        for branch in Branch:
            assignment = self.assignment(branch)
            if assignment.n_clusters == 0:
                reduced = ReducedScenarioSet([], {}, [f"{branch.value}: all points are noise, "
                                                      "nothing to reduce"])
            else:
                reduced = reduce(assignment, self.embedding(branch), self.matrix(branch),
                                 cfg.archetypes, cfg.prototypes, seed=cfg.seed,
                                 nonconvex_threshold=cfg.nonconvex_threshold)
            notes.extend(w if w.startswith(branch.value) else f"{branch.value}: {w}"
                         for w in reduced.warnings)
            rel = f"reduced/{branch.value.lower()}.json"
            texts[branch] = reduced.to_json(params)
            artifacts.append(self.write(rel, texts[branch]))
            info[branch.value] = {"path": rel, "size": reduced.total,
                                  "methods": {str(k): v for k, v in reduced.cluster_methods.items()}}
        chosen = Branch(cfg.reduce_branch)
        artifacts.append(self.write("reduced_set.json", texts[chosen]))
        info["reduced_set"] = {"path": "reduced_set.json", "branch": chosen.value,
                               "size": info[chosen.value]["size"]}
        info["warnings"] = notes
        return artifacts, info

    def run_plots(self):
        from .plots import emit_plots
        paths = emit_plots(self.manifest, self.dir)
        return [str(Path(p).relative_to(self.dir)) for p in paths], {
            "plots": [str(Path(p).relative_to(self.dir)) for p in paths]}

    # driver ---------------------------------------------------------------

    def execute(self, stop_after: str | None = None) -> RunManifest:
        if stop_after is not None and stop_after not in STAGES:
            raise ValueError(f"unknown stage {stop_after!r}")
        plan = [
            ("explore", (), self.run_explore),
            ("metrics", ("explore",), self.run_metrics),
            ("distances", ("explore", "metrics"), self.run_distances),
            ("embed", ("distances",), self.run_embed),
            ("cluster", ("distances", "embed"), self.run_cluster),
            ("reduce", ("explore", "distances", "embed", "cluster"), self.run_reduce),
            ("plots", ("explore", "metrics", "embed", "cluster"), self.run_plots),
        ]
        for name, upstream, fn in plan:
            if name == "explore" and self.config.mode == Mode.ANALYZE_ONLY.value:
                self.adopt_exploration()
            else:
                self.stage(name, upstream, fn)
            if name == stop_after:
                break
        self.manifest.status = "Completed"
        self.manifest.save(self.dir)
        return self.manifest

    def adopt_exploration(self):
        """AnalyzeOnly: take the persisted exploration stage as is."""
        prev = self.previous.stages.get("explore") if self.previous else None
        if prev is None:
            self.fail("explore", "AnalyzeOnly needs a completed exploration in the run directory")
            raise PipelineError("explore", "no persisted exploration to analyze")
        if not verify_artifacts(self.dir, prev["artifacts"]):
            self.fail("explore", "persisted traces do not match their recorded hashes")
            raise PipelineError("explore", "persisted traces do not match their recorded hashes")
        self.manifest.stages["explore"] = prev
        self.manifest.timings["explore"] = {"seconds": 0.0, "reused": True}


def run(config: RunConfig, stop_after: str | None = None) -> RunManifest:
    """Execute the pipeline for ``config`` and return the written manifest."""
    return Runner(config).execute(stop_after)


def report(manifest: RunManifest) -> str:
    """Plain-text digest of a manifest."""
    cfg = manifest.config
    lines = [f"status: {manifest.status}"]
    if manifest.failed_stage:
        lines.append(f"failed stage: {manifest.failed_stage} ({manifest.error})")
    lines.append(f"template: {cfg['template']}  profile: {cfg['profile']}  mode: {cfg['mode']}  "
                 f"metric: {cfg['metric']}  seed: {cfg['seed']}")
    s = manifest.summary
    if "n_scenarios" in s:
        best = manifest.info("explore")["best"]
        lines.append(f"scenarios: {s['n_scenarios']}  collisions: {s['collisions']}  "
                     f"best objective: {best['objective']:.4g} (id {best['id']})")
    for branch, n in s.get("n_clusters", {}).items():
        lines.append(f"{branch}: {n} clusters, noise {s['noise_fraction'][branch]:.1%}")
    if "reduced_size" in s:
        lines.append(f"reduced set ({s['reduced_branch']}): {s['reduced_size']} scenarios")
    for stage, t in manifest.timings.items():
        lines.append(f"  {stage:<10} {t['seconds']:8.2f} s{'  (reused)' if t['reused'] else ''}")
    for w in manifest.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
