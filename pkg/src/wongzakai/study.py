"""Coupled Monte Carlo convergence studies.

For each path index the study draws one fine lattice and evaluates the two
trajectories of the chosen pair at every coarse level ``m`` on that same
lattice.  Per path and level it records ``sup_t |A(t) - B(t)|^{2p}``; the
report holds the mean over paths, its standard error and a weighted
log-log fit against ``m``.

Paths are processed in fixed chunks of ``chunk_size``.  The chunking does
not depend on the number of workers and the final sums use ``math.fsum``,
so reports are identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import build_model, default_x0
from .errors import ArgumentError, NumericalError, StructuralError
from .noise import sample_increments
from .schemes import Trajectory, simulate

PAIRS = ("WZ-vs-ref", "EM-vs-ref", "WZ-vs-EM")
_PAIR_SCHEMES = {"WZ-vs-ref": ("wz", "ref"), "EM-vs-ref": ("em", "ref"), "WZ-vs-EM": ("wz", "em")}

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("artifact")
except Exception:  # pragma: no cover - not installed
    VERSION = "0+unknown"


@dataclass
class StudySpec:
    model: str
    params: dict = field(default_factory=dict)
    x0: list | None = None
    T: float = 1.0
    p: float = 2.0
    m_list: list = field(default_factory=lambda: [4, 8, 16, 32, 64])
    m_fine: int = 1024
    paths: int = 200
    base_seed: int = 0
    pair: str = "WZ-vs-ref"
    inner_steps: int | None = None
    chunk_size: int = 25

    def validate(self):
        if not self.p > 1:
            raise ArgumentError(f"p must exceed 1 (rate p - 1 = {self.p - 1:g} is untestable)")
        if self.pair not in PAIRS:
            raise ArgumentError(f"pair must be one of {PAIRS}")
        ms = list(self.m_list)
        if not ms or any(b <= a for a, b in zip(ms, ms[1:])):
            raise ArgumentError("m_list must be nonempty and strictly increasing")
        if any(m < 1 or self.m_fine % m for m in ms):
            raise ArgumentError("every m must divide m_fine")
        if max(ms) > self.m_fine // 4:
            raise ArgumentError("max(m) must be at most m_fine / 4")
        if self.paths < 2:
            raise ArgumentError("need at least 2 paths")
        if self.chunk_size < 1:
            raise ArgumentError("chunk_size must be positive")


@dataclass
class ConvergenceReport:
    spec: dict
    rows: list
    slope: float | None
    intercept: float | None
    residual: float | None
    degenerate: bool
    metadata: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        """Per-level table ``m,delta_m,estimate,stderr,paths``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "delta_m", "estimate", "stderr", "paths"])
            for row in self.rows:
                w.writerow([row["m"], repr(row["delta_m"]), repr(row["estimate"]),
                            repr(row["stderr"]), row["paths"]])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([row["estimate"] for row in self.rows])


def sup_error_moment(traj_a, traj_b, p: float, space=None) -> float:
    """``(max_t |A(t) - B(t)|)^{2p}`` over the common monitoring grid."""
    if isinstance(traj_a, Trajectory):
        if not isinstance(traj_b, Trajectory):
            raise StructuralError("both arguments must be trajectories")
        if traj_a.space != traj_b.space:
            raise StructuralError("trajectories live in different spaces")
        if traj_a.times.shape != traj_b.times.shape or not np.array_equal(traj_a.times, traj_b.times):
            raise StructuralError("trajectories use different monitoring grids")
        space = traj_a.space
        a, b = traj_a.states, traj_b.states
    else:
        a, b = np.asarray(traj_a, dtype=float), np.asarray(traj_b, dtype=float)
        if a.shape != b.shape:
            raise StructuralError("state arrays have different shapes")
    diff = a - b
    nrm = space.norm_array(diff) if space is not None else np.linalg.norm(diff, axis=-1)
    return float(np.max(nrm) ** (2 * p))


def fit_rate(points) -> tuple[float, float, float]:
    """Weighted least squares of ``log estimate`` on ``log m``.

    ``points`` holds ``(m, estimate, stderr)`` triples; weights are
    ``1 / (stderr / estimate)^2`` (unit weights when every stderr is 0).
    Returns ``(slope, intercept, max |residual|)``.
    """
    pts = [tuple(p) for p in points]
    if len(pts) < 3:
        raise ArgumentError("need at least 3 points")
    m = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    se = np.array([p[2] if len(p) > 2 else 0.0 for p in pts], dtype=float)
    if np.any(~(e > 0)):
        raise ArgumentError("estimates must be positive")
    rel = se / e
    if np.all(rel > 0):
        w = 1 / rel**2
    elif np.all(rel == 0):
        w = np.ones_like(e)
    else:
        w = 1 / np.maximum(rel, np.min(rel[rel > 0])) ** 2
    x, y = np.log(m), np.log(e)
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    resid = y - X @ coef
    return float(coef[1]), float(coef[0]), float(np.max(np.abs(resid)))


def _chunk_errors(spec: StudySpec, start: int, stop: int) -> np.ndarray:
    """Per-path sup errors ``(stop - start, len(m_list))``."""
    model = build_model(spec.model, **spec.params)
    x0 = default_x0(model) if spec.x0 is None else np.asarray(spec.x0, dtype=float)
    inc = sample_increments(spec.base_seed, range(start, stop), model.r, spec.T, spec.m_fine)
    first, second = _PAIR_SCHEMES[spec.pair]
    out = np.empty((stop - start, len(spec.m_list)))

    def run(scheme, m):
        try:
            return simulate(scheme, model, x0, inc, spec.T, m,
                            inner_steps=spec.inner_steps if scheme == "wz" else None)
        except NumericalError as exc:
            exc.seed, exc.m = spec.base_seed, (spec.m_fine if scheme == "ref" else m)
            if exc.path is not None:
                exc.path = start + exc.path
            raise

    ref = run("ref", None) if second == "ref" else None
    for col, m in enumerate(spec.m_list):
        a = run(first, m)
        b = ref if ref is not None else run(second, m)
        nrm = model.space.norm_array(a - b)
        out[:, col] = np.max(nrm, axis=1) ** (2 * spec.p)
    return out


def _chunk_task(args):
    spec, start, stop = args
    return start, _chunk_errors(spec, start, stop)


def path_errors(spec: StudySpec, workers: int = 1) -> np.ndarray:
    """All per-path sup errors ``(paths, len(m_list))`` in path order."""
    spec.validate()
    chunks = [(spec, s, min(s + spec.chunk_size, spec.paths)) for s in range(0, spec.paths, spec.chunk_size)]
    errs = np.empty((spec.paths, len(spec.m_list)))
    if workers <= 1:
        results = map(_chunk_task, chunks)
        for start, block in results:
            errs[start:start + len(block)] = block
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, block in pool.map(_chunk_task, chunks):
                errs[start:start + len(block)] = block
    return errs


def summarize(spec: StudySpec, errs: np.ndarray, wall_time: float = 0.0,
              degenerate_below: float | None = None) -> ConvergenceReport:
    M = errs.shape[0]
    rows = []
    for col, m in enumerate(spec.m_list):
        e = errs[:, col]
        mean = math.fsum(e) / M
        var = math.fsum((e - mean) ** 2) / (M - 1)
        rows.append(dict(m=int(m), delta_m=spec.T / m, estimate=mean,
                         stderr=math.sqrt(var / M), paths=int(M)))
    if degenerate_below is None:
        degenerate_below = (1e-8) ** (2 * spec.p)
    degenerate = any(row["estimate"] <= degenerate_below for row in rows)
    slope = intercept = resid = None
    if not degenerate and len(rows) >= 3:
        slope, intercept, resid = fit_rate([(r["m"], r["estimate"], r["stderr"]) for r in rows])
    meta = {"version": VERSION, "wall_time_s": wall_time,
            "predicted_slope": -(spec.p - 1)}
    return ConvergenceReport(asdict(spec), rows, slope, intercept, resid, degenerate, meta)


def run_study(spec: StudySpec, workers: int = 1, log=None) -> ConvergenceReport:
    """Run the coupled study described by ``spec``."""
    t0 = time.perf_counter()
    errs = path_errors(spec, workers)
    report = summarize(spec, errs, time.perf_counter() - t0)
    if log is not None:
        for row in report.rows:
            log(f"m={row['m']:>6d}  estimate={row['estimate']:.6e}  stderr={row['stderr']:.2e}")
    return report


def synthetic_report(spec: StudySpec, constant: float = 1.0, rate: float | None = None) -> ConvergenceReport:
    """Report built from exact power-law errors ``constant * m^rate`` (no simulation)."""
    rate = -(spec.p - 1) if rate is None else rate
    ms = np.asarray(spec.m_list, dtype=float)
    errs = np.tile(constant * ms**rate, (2, 1))
    return summarize(spec, errs)
