"""Dynamic time warping distances between scenario sequences."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .simulator.engine import SimulationTrace

# workqueue is always available; the TBB probe warns on older system TBBs
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

DEFAULT_STRIDE = 4


@dataclass
class Sequence:
    points: np.ndarray
    scenario_id: int = -1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("a sequence needs at least one point")
        self.points = np.ascontiguousarray(pts)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@numba.njit(cache=True)
def _dtw_kernel(a, b, band):
    n, m = a.shape[0], b.shape[0]
    d = a.shape[1]
    inf = np.inf
    prev = np.full(m + 1, inf)
    cur = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[0] = inf
        lo, hi = 1, m
        if band >= 0:
            # band is measured on the diagonal rescaled to the m/n aspect ratio
            center = (i * m) / n
            lo = max(1, int(np.floor(center - band)))
            hi = min(m, int(np.ceil(center + band)))
            for j in range(1, lo):
                cur[j] = inf
        for j in range(lo, hi + 1):
            acc = 0.0
            for k in range(d):
                diff = a[i - 1, k] - b[j - 1, k]
                acc += diff * diff
            cost = np.sqrt(acc)
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        for j in range(hi + 1, m + 1):
            cur[j] = inf
        prev, cur = cur, prev
    return prev[m]


def _as_points(x) -> np.ndarray:
    if isinstance(x, Sequence):
        return x.points
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return np.ascontiguousarray(pts)


def dtw(a, b, band: int | None = None) -> float:
    """Accumulated Euclidean cost of the optimal warping path (no normalization).

    Steps (1,0), (0,1), (1,1); both ends anchored. ``band`` optionally limits
    |i*m/n - j| (a Sakoe-Chiba window, in points of ``b``).
    """
    pa, pb = _as_points(a), _as_points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("dtw needs non-empty sequences")
    if pa.shape[1] != pb.shape[1]:
        raise ValueError(f"dimensionality mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return float(_dtw_kernel(pa, pb, -1 if band is None else int(band)))


def strided_indices(n: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def extract_trajectory(trace: SimulationTrace, actor, stride: int = DEFAULT_STRIDE) -> Sequence:
    """(x, y) positions every ``stride`` frames, final frame always included."""
    i = trace.index(actor)
    idx = strided_indices(trace.n_frames, stride)
    return Sequence(trace.positions[idx, i, :], trace.scenario_id)


def series_sequence(values, scenario_id: int, stride: int = DEFAULT_STRIDE) -> Sequence:
    values = np.asarray(values, dtype=float)
    idx = strided_indices(len(values), stride)
    return Sequence(values[idx], scenario_id)


@dataclass
class DistanceMatrix:
    ids: list
    D: np.ndarray
    kind: str = "EgoTrajectoryDTW"

    def __post_init__(self):
        self.ids = [int(i) for i in self.ids]
        self.D = np.asarray(self.D, dtype=float)

    @property
    def n(self) -> int:
        return len(self.ids)

    def submatrix(self, positions) -> np.ndarray:
        positions = np.asarray(positions)
        return self.D[np.ix_(positions, positions)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.kind] + [str(i) for i in self.ids])
        for i, row in zip(self.ids, self.D):
            w.writerow([str(i)] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        kind, ids = rows[0][0], [int(v) for v in rows[0][1:]]
        D = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(len(ids), len(ids))
        return cls(ids, D, kind)

    @classmethod
    def load(cls, path) -> "DistanceMatrix":
        return cls.from_csv(Path(path).read_text())


@numba.njit(cache=True, parallel=True)
def _pairwise(flat, offsets, dims, band, rows, cols):
    out = np.empty(rows.shape[0])
    for p in numba.prange(rows.shape[0]):
        i, j = rows[p], cols[p]
        a = flat[offsets[i]:offsets[i + 1]]
        b = flat[offsets[j]:offsets[j + 1]]
        out[p] = _dtw_kernel(a, b, band)
    return out


def build_distance_matrix(sequences, kind: str = "EgoTrajectoryDTW",
                          band: int | None = None) -> DistanceMatrix:
    """Symmetric DTW matrix; each unordered pair is computed exactly once."""
    sequences = [s if isinstance(s, Sequence) else Sequence(s) for s in sequences]
    n = len(sequences)
    if n < 2:
        raise ValueError("need at least two sequences")
    dims = {s.dim for s in sequences}
    if len(dims) != 1:
        raise ValueError(f"mixed sequence dimensionality: {sorted(dims)}")
    flat = np.ascontiguousarray(np.vstack([s.points for s in sequences]))
    offsets = np.concatenate([[0], np.cumsum([len(s) for s in sequences])]).astype(np.int64)
    rows, cols = np.triu_indices(n, k=1)
    vals = _pairwise(flat, offsets, dims.pop(), -1 if band is None else int(band),
                     rows.astype(np.int64), cols.astype(np.int64))
    D = np.zeros((n, n))
    D[rows, cols] = vals
    D[cols, rows] = vals
    return DistanceMatrix([s.scenario_id for s in sequences], D, kind)
