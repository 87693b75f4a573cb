"""Brownian lattices, the polygonal (Wong-Zakai) noise and Gaussian moments.

A :class:`BrownianLattice` stores ``r`` channels of Brownian increments on
the finest uniform grid ``k T / m_fine``.  Every coarser level ``m`` (a
divisor of ``m_fine``) is obtained by summing blocks of fine increments, so
all approximation levels see the same Brownian path.

Seeding rule: the lattice for path index ``i`` under base seed ``s`` draws
from ``PCG64(SeedSequence(s, spawn_key=(i,)))``, which is the ``i``-th child
of ``SeedSequence(s).spawn``.  A lattice without a path index uses
``SeedSequence(s)`` directly.  Increments are drawn as one
``standard_normal((r, m_fine))`` call and scaled by ``sqrt(T / m_fine)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ArgumentError, StructuralError


def _rng(seed: int, path: int | None) -> np.random.Generator:
    if path is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(int(path),))
    return np.random.Generator(np.random.PCG64(ss))


def _check_fine(m_fine: int):
    if m_fine < 1 or (m_fine & (m_fine - 1)) != 0:
        raise ArgumentError(f"m_fine must be a power of two, got {m_fine}")


@dataclass(frozen=True, eq=False)
class BrownianLattice:
    r: int
    T: float
    m_fine: int
    increments: np.ndarray = field(repr=False)
    seed: int | None = None
    path: int | None = None

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        if inc.shape != (self.r, self.m_fine):
            raise StructuralError(f"increments must have shape ({self.r}, {self.m_fine})")
        if not self.T > 0:
            raise ArgumentError("horizon T must be positive")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @classmethod
    def sample(cls, seed: int, r: int, T: float, m_fine: int, path: int | None = None):
        _check_fine(m_fine)
        z = _rng(seed, path).standard_normal((r, m_fine))
        return cls(r, float(T), m_fine, z * math.sqrt(T / m_fine), seed=seed, path=path)

    @classmethod
    def zeros(cls, r: int, T: float, m_fine: int):
        return cls(r, float(T), m_fine, np.zeros((r, m_fine)))

    @property
    def dt(self) -> float:
        return self.T / self.m_fine

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m_fine + 1) * self.dt

    def path_values(self) -> np.ndarray:
        """``B^j`` at the fine nodes, shape ``(r, m_fine + 1)``."""
        return np.concatenate([np.zeros((self.r, 1)), np.cumsum(self.increments, axis=1)], axis=1)


def sample_increments(base_seed: int, paths, r: int, T: float, m_fine: int) -> np.ndarray:
    """Stacked fine increments ``(len(paths), r, m_fine)`` for the given path indices."""
    _check_fine(m_fine)
    scale = math.sqrt(T / m_fine)
    out = np.empty((len(paths), r, m_fine))
    for row, i in enumerate(paths):
        out[row] = _rng(base_seed, i).standard_normal((r, m_fine)) * scale
    return out


def bracket(t: float, m: int, T: float) -> tuple[float, float]:
    """Cell ``([t]_m^-, [t]_m^+)`` containing ``t``; ``t = T`` maps to the last cell."""
    if m < 1:
        raise ArgumentError("m must be a positive integer")
    if not 0 <= t <= T:
        raise ArgumentError(f"t = {t} outside [0, {T}]")
    k = min(int(math.floor(t * m / T)), m - 1)
    return k * T / m, (k + 1) * T / m


def cells_per_block(m_fine: int, m: int) -> int:
    if m < 1 or m_fine % m:
        raise ArgumentError(f"m = {m} does not divide m_fine = {m_fine}")
    return m_fine // m


def coarsen_increments(increments: np.ndarray, m: int) -> np.ndarray:
    """Block sums of fine increments along the last axis."""
    m_fine = increments.shape[-1]
    L = cells_per_block(m_fine, m)
    return increments.reshape(increments.shape[:-1] + (m, L)).sum(axis=-1)


def coarsen(lat: BrownianLattice, m: int) -> np.ndarray:
    """Increments of the level-``m`` grid, shape ``(r, m)``."""
    return coarsen_increments(lat.increments, m)


def polygonal_derivative(lat: BrownianLattice, m: int, j: int, t: float) -> float:
    """Slope of the polygonal path ``B_m^j`` at ``t`` (channel ``j`` is 1-based)."""
    if not 1 <= j <= lat.r:
        raise ArgumentError(f"channel {j} outside 1..{lat.r}")
    lo, _ = bracket(t, m, lat.T)
    k = int(round(lo * m / lat.T))
    return float(coarsen(lat, m)[j - 1, k] / (lat.T / m))


def polygonal_path(lat: BrownianLattice, m: int, j: int, t: float) -> float:
    """Value ``B_m^j(t)`` of the piecewise linear interpolation."""
    lo, hi = bracket(t, m, lat.T)
    L = cells_per_block(lat.m_fine, m)
    b = lat.path_values()[j - 1]
    k = int(round(lo * m / lat.T))
    b_lo, b_hi = b[k * L], b[(k + 1) * L]
    return float(b_lo + (t - lo) / (hi - lo) * (b_hi - b_lo))


def gaussian_even_moment(q: float, sigma2: float) -> float:
    """``E|X|^{2q}`` for ``X ~ N(0, sigma2)``: ``2^q Gamma(q+1/2)/Gamma(1/2) sigma2^q``."""
    if not (q > 0 and sigma2 > 0):
        raise ArgumentError("q and sigma2 must be positive")
    if float(q).is_integer() and q < 100:
        # (2q - 1)!! exactly
        return float(math.prod(range(1, 2 * int(q), 2)) * sigma2**q)
    if q < 100:
        return float(2.0**q * special.gamma(q + 0.5) / math.sqrt(math.pi) * sigma2**q)
    log = q * math.log(2.0) + special.gammaln(q + 0.5) - 0.5 * math.log(math.pi)
    return float(math.exp(log + q * math.log(sigma2)))


def sup_derivative_samples(ensemble, m: int, q: float, j: int = 1, T: float | None = None):
    """Per-path ``max_k |Delta B_k / delta_m|^{2q}`` for channel ``j``.

    ``ensemble`` is a sequence of lattices or an increment array
    ``(paths, r, m_fine)``; the latter needs ``T``.
    """
    if isinstance(ensemble, np.ndarray):
        if T is None:
            raise ArgumentError("T is required for raw increment arrays")
        inc = ensemble
    else:
        ensemble = list(ensemble)
        if not ensemble:
            raise ArgumentError("empty ensemble")
        T = ensemble[0].T
        inc = np.stack([lat.increments for lat in ensemble])
    if inc.shape[0] == 0:
        raise ArgumentError("empty ensemble")
    delta = T / m
    coarse = coarsen_increments(inc[:, j - 1, :], m)
    return np.max(np.abs(coarse / delta), axis=-1) ** (2 * q)


def sup_derivative_moment(ensemble, m: int, q: float, j: int = 1, T: float | None = None) -> float:
    """Monte Carlo estimate of ``E[sup_t |dB_m^j/dt|^{2q}]``."""
    return float(np.mean(sup_derivative_samples(ensemble, m, q, j, T)))


def dump_lattice(lat: BrownianLattice, path, binary: bool = False) -> None:
    """Write the increments for debugging.

    CSV mode writes ``channel,cell,increment`` rows (channel and cell
    0-based).  Binary mode writes the raw ``(r, m_fine)`` array as
    little-endian float64 in channel-major order, no header.
    """
    if binary:
        np.ascontiguousarray(lat.increments, dtype="<f8").tofile(path)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "cell", "increment"])
        for j in range(lat.r):
            for k in range(lat.m_fine):
                w.writerow([j, k, repr(float(lat.increments[j, k]))])


def load_lattice(path, r: int, T: float, binary: bool = False, seed=None, path_index=None):
    """Inverse of :func:`dump_lattice`."""
    if binary:
        inc = np.fromfile(path, dtype="<f8")
        if inc.size % r:
            raise StructuralError("binary dump size is not a multiple of r")
        inc = inc.reshape(r, -1)
    else:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        m_fine = max(int(row["cell"]) for row in rows) + 1
        inc = np.zeros((r, m_fine))
        for row in rows:
            inc[int(row["channel"]), int(row["cell"])] = float(row["increment"])
    return BrownianLattice(r, float(T), inc.shape[1], inc, seed=seed, path=path_index)
