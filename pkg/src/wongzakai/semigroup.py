"""C_0-semigroups S_t and their generators on the finite truncations.

Three realizations:

``SpectralSemigroup``
    diagonal in an eigenbasis, ``S_t e_k = exp(lambda_k t) e_k``.
``GridShiftSemigroup``
    the shift ``S_t h(x) = h(x + t)`` on a maturity grid, linear
    interpolation between nodes and hold-last-value beyond the last node.
``ProductSemigroup``
    blockwise action on a product space.

Besides ``apply`` and ``generator_apply`` each semigroup can build the
per-lag convolution kernels used by the time integrators, see
:meth:`SemigroupModel.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ArgumentError, StructuralError
from .hilbert import HVector, SpaceDescriptor, as_array

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def phi2(z):
    """``(exp(z) - 1 - z) / z**2``, by Taylor series near zero."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    # sum_{n>=0} z^n / (n+2)!
    term = np.full_like(zs, 0.5)
    acc = term.copy()
    for n in range(1, 12):
        term = term * zs / (n + 2)
        acc = acc + term
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.expm1(zl) - zl) / (zl * zl)
    return out


@dataclass(frozen=True)
class Kernels:
    """Convolution kernels on a uniform substep grid of width ``h``.

    ``M[n]`` is ``S_{n h}`` for ``n = 0..L``.  ``Ka[l]`` and ``Kb[l]`` are the
    weights with which the left and right endpoint values of a linearly
    interpolated integrand on one substep enter the state ``l`` substeps
    after the end of that substep::

        int_{t_i}^{t_{i+1}} S_{t_n - s} F(s) ds = Ka[l] F_i + Kb[l] F_{i+1},
        l = n - 1 - i.

    Diagonal kernels are stored as vectors, everything else as matrices.
    """

    diagonal: bool
    h: float
    M: np.ndarray
    Ka: np.ndarray
    Kb: np.ndarray


def act(op: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply a diagonal (vector) or dense (matrix) operator to ``v[..., d]``."""
    if op.ndim == 1:
        return op * v
    return v @ op.T


class SemigroupModel:
    space: SpaceDescriptor
    kind: str
    diagonal: bool

    def operator(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def _generate(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _propagate(self, t: float, a: np.ndarray) -> np.ndarray:
        return act(self.operator(t), a)

    def apply(self, t: float, v):
        """``S_t v``.  Accepts an HVector or a coefficient array ``(..., d)``."""
        if t < 0:
            raise ArgumentError(f"semigroup time must be nonnegative, got {t}")
        a = as_array(v, self.space)
        out = a.copy() if t == 0 else self._propagate(float(t), a)
        return HVector(self.space, out) if isinstance(v, HVector) else out

    def generator_apply(self, v):
        """``A v`` under this realization."""
        a = as_array(v, self.space)
        out = self._generate(a)
        return HVector(self.space, out) if isinstance(v, HVector) else out

    def kernels(self, h: float, L: int) -> Kernels:
        return _cached_kernels(self, float(h), int(L))

    def _build_kernels(self, h: float, L: int) -> Kernels:
        raise NotImplementedError

    def substep_coefficients(self, tau: float, H: float):
        """Dense-output weights inside a substep of width ``H`` (diagonal only).

        Returns ``(S_tau, A, B)`` with
        ``xi(t_i + tau) = S_tau xi_i + A F_i + B F_{i+1}``.
        """
        raise StructuralError("dense output is only available for diagonal semigroups")


@lru_cache(maxsize=64)
def _cached_kernels(sg: SemigroupModel, h: float, L: int) -> Kernels:
    return sg._build_kernels(h, L)


class SpectralSemigroup(SemigroupModel):
    kind = "spectral-diagonal"
    diagonal = True

    def __init__(self, eigenvalues):
        self.eigenvalues = np.asarray(eigenvalues, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.eigenvalues)):
            raise ArgumentError("eigenvalues must be finite")
        self.eigenvalues.setflags(write=False)
        self.space = SpaceDescriptor.spectral(self.eigenvalues)

    def __repr__(self):
        return f"SpectralSemigroup(dim={self.space.dim})"

    def operator(self, t):
        return np.exp(self.eigenvalues * t)

    def _generate(self, a):
        return self.eigenvalues * a

    def _build_kernels(self, h, L):
        lam = self.eigenvalues
        z = lam * h
        n = np.arange(L + 1)[:, None]
        M = np.exp(lam * (n * h))
        g1, g2 = phi1(z), phi2(z)
        Ka = M[:L] * (h * (g1 - g2))
        Kb = M[:L] * (h * g2)
        return Kernels(True, h, M, Ka, Kb)

    def substep_coefficients(self, tau, H):
        lam = self.eigenvalues
        z = lam * tau
        b = tau * tau * phi2(z) / H
        return np.exp(z), tau * phi1(z) - b, b


class GridShiftSemigroup(SemigroupModel):
    """Left shift of a forward curve sampled on ``space.grid``."""

    kind = "grid-shift"
    diagonal = False
    shift_extension = "hold-last-value"

    def __init__(self, space: SpaceDescriptor):
        if space.kind != "weighted-grid":
            raise StructuralError("grid-shift semigroup needs a weighted-grid space")
        self.space = space
        self.x = space.grid_array

    def __repr__(self):
        return f"GridShiftSemigroup(nodes={self.space.dim})"

    def _interp_index(self, t):
        x = self.x
        y = x + t
        j = np.searchsorted(x, y, side="right") - 1
        j = np.clip(j, 0, len(x) - 2)
        w = (y - x[j]) / (x[j + 1] - x[j])
        beyond = y >= x[-1]
        w = np.where(beyond, 1.0, np.clip(w, 0.0, 1.0))
        j = np.where(beyond, len(x) - 2, j)
        return j, w

    def operator(self, t):
        d = self.space.dim
        j, w = self._interp_index(t)
        M = np.zeros((d, d))
        rows = np.arange(d)
        np.add.at(M, (rows, j), 1.0 - w)
        np.add.at(M, (rows, j + 1), w)
        return M

    def _propagate(self, t, a):
        j, w = self._interp_index(t)
        return a[..., j] * (1.0 - w) + a[..., j + 1] * w

    def _generate(self, a):
        return self.space.grid_derivative(a)

    def _build_kernels(self, h, L):
        u = h * (_GL_NODES + 1) / 2
        wq = h * _GL_WEIGHTS / 2
        M = np.stack([self.operator(n * h) for n in range(L + 1)])
        Ka = np.zeros((L,) + M.shape[1:])
        Kb = np.zeros_like(Ka)
        for l in range(L):
            for uq, w in zip(u, wq):
                S = self.operator(l * h + h - uq)
                Ka[l] += w * (1 - uq / h) * S
                Kb[l] += w * (uq / h) * S
        return Kernels(False, h, M, Ka, Kb)


class ProductSemigroup(SemigroupModel):
    """Blockwise semigroup on a product space."""

    kind = "product"

    def __init__(self, *components: SemigroupModel):
        self.components = tuple(components)
        self.space = SpaceDescriptor.product(*(c.space for c in components))
        self.diagonal = all(c.diagonal for c in components)

    def __repr__(self):
        return f"ProductSemigroup({', '.join(map(repr, self.components))})"

    def _blocks(self, a):
        return [a[..., s] for s in self.space.block_slices]

    def _combine(self, ops):
        if self.diagonal:
            return np.concatenate(ops, axis=-1)
        mats = [np.diag(o) if o.ndim == 1 else o for o in ops]
        return scipy.linalg.block_diag(*mats)

    def operator(self, t):
        return self._combine([c.operator(t) for c in self.components])

    def _propagate(self, t, a):
        return np.concatenate(
            [c._propagate(t, b) for c, b in zip(self.components, self._blocks(a))], axis=-1
        )

    def _generate(self, a):
        return np.concatenate(
            [c._generate(b) for c, b in zip(self.components, self._blocks(a))], axis=-1
        )

    def _build_kernels(self, h, L):
        parts = [c.kernels(h, L) for c in self.components]

        def stack(name):
            arrs = [getattr(p, name) for p in parts]
            return np.stack([self._combine([a[i] for a in arrs]) for i in range(len(arrs[0]))])

        return Kernels(self.diagonal, h, stack("M"), stack("Ka"), stack("Kb"))

    def substep_coefficients(self, tau, H):
        if not self.diagonal:
            return super().substep_coefficients(tau, H)
        parts = [c.substep_coefficients(tau, H) for c in self.components]
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def dirichlet_laplacian_eigenvalues(modes: int) -> np.ndarray:
    """Eigenvalues ``-k^2`` of the Dirichlet Laplacian on (0, pi), k = 1..modes."""
    k = np.arange(1, modes + 1, dtype=float)
    return -(k**2)


def build_perturbed_spectral(base_eigenvalues, scale: float, shift: float) -> SpectralSemigroup:
    """Spectral semigroup of ``scale * A0 + shift * Id`` for diagonal ``A0``.

    ``Delta - m^2`` is ``scale=1, shift=-m^2``; the cable operator
    ``(lam^2 Delta - Id) / tau`` is ``scale=lam^2/tau, shift=-1/tau``.
    """
    if not (np.isfinite(scale) and np.isfinite(shift)):
        raise ArgumentError("scale and shift must be finite")
    base = np.asarray(base_eigenvalues, dtype=float)
    return SpectralSemigroup(scale * base + shift)
