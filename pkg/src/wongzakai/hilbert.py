"""Finite truncations of the state space H and of the domain D(A).

Three kinds of space are supported:

* ``spectral``: coefficients in an orthonormal eigenbasis of the generator,
  plain Euclidean norm.
* ``weighted-grid``: forward curves sampled on a maturity grid, with the
  discrete weighted Sobolev norm ``|h(0)|^2 + int |h'(x)|^2 exp(beta x) dx``.
* ``product``: concatenation of factor blocks in declared order.

Everything that acts on coefficients accepts arrays of shape ``(..., dim)``
so that whole batches of Monte Carlo paths can be processed at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import StructuralError

SPECTRAL = "spectral"
WEIGHTED_GRID = "weighted-grid"
PRODUCT = "product"


@dataclass(frozen=True, eq=True)
class SpaceDescriptor:
    kind: str
    dim: int
    eigenvalues: tuple = ()
    grid: tuple = ()
    beta: float = 0.0
    factors: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise StructuralError(f"dim must be >= 1, got {self.dim}")
        if self.kind == SPECTRAL:
            if len(self.eigenvalues) != self.dim:
                raise StructuralError("spectral space needs one eigenvalue per mode")
        elif self.kind == WEIGHTED_GRID:
            if len(self.grid) != self.dim:
                raise StructuralError("weighted-grid space needs one maturity per node")
            if not self.beta > 0:
                raise StructuralError(f"weight exponent must be positive, got {self.beta}")
            g = np.asarray(self.grid)
            if self.dim > 1 and not np.all(np.diff(g) > 0):
                raise StructuralError("maturity grid must be strictly increasing")
            if g[0] < 0:
                raise StructuralError("maturities must be nonnegative")
            if self.dim < 2:
                raise StructuralError("weighted-grid space needs at least two nodes")
        elif self.kind == PRODUCT:
            if not self.factors:
                raise StructuralError("product space needs factors")
            if sum(f.dim for f in self.factors) != self.dim:
                raise StructuralError("product dim must equal the sum of factor dims")
        else:
            raise StructuralError(f"unknown space kind {self.kind!r}")

    @classmethod
    def spectral(cls, eigenvalues) -> "SpaceDescriptor":
        eig = tuple(float(e) for e in np.atleast_1d(eigenvalues))
        return cls(SPECTRAL, len(eig), eigenvalues=eig)

    @classmethod
    def weighted_grid(cls, grid, beta: float) -> "SpaceDescriptor":
        g = tuple(float(x) for x in grid)
        return cls(WEIGHTED_GRID, len(g), grid=g, beta=float(beta))

    @classmethod
    def product(cls, *factors: "SpaceDescriptor") -> "SpaceDescriptor":
        return cls(PRODUCT, sum(f.dim for f in factors), factors=tuple(factors))

    # -- cached numeric helpers (not part of equality) ----------------------

    @cached_property
    def grid_array(self) -> np.ndarray:
        return np.asarray(self.grid, dtype=float)

    @cached_property
    def _quad_weights(self) -> np.ndarray:
        # trapezoid weights times exp(beta x); zero contribution past the last node
        x = self.grid_array
        dx = np.diff(x)
        w = np.zeros_like(x)
        w[:-1] += dx / 2
        w[1:] += dx / 2
        return w * np.exp(self.beta * x)

    @cached_property
    def block_slices(self) -> tuple:
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + f.dim))
            start += f.dim
        return tuple(out)

    # -- numerics on raw coefficient arrays --------------------------------

    def check(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[-1:] != (self.dim,):
            raise StructuralError(
                f"coefficient array has trailing shape {a.shape[-1:]}, expected ({self.dim},)"
            )
        return a

    def grid_derivative(self, a: np.ndarray) -> np.ndarray:
        """Central differences inside, one-sided at both ends (weighted-grid only)."""
        if self.kind != WEIGHTED_GRID:
            raise StructuralError("grid derivative needs a weighted-grid space")
        return np.gradient(a, self.grid_array, axis=-1, edge_order=1)

    def norm_sq_array(self, a) -> np.ndarray:
        a = self.check(a)
        if self.kind == SPECTRAL:
            return np.einsum("...i,...i->...", a, a)
        if self.kind == WEIGHTED_GRID:
            d = self.grid_derivative(a)
            return a[..., 0] ** 2 + np.einsum("...i,i->...", d * d, self._quad_weights)
        return sum(f.norm_sq_array(a[..., s]) for f, s in zip(self.factors, self.block_slices))

    def norm_array(self, a) -> np.ndarray:
        return np.sqrt(self.norm_sq_array(a))


@dataclass(frozen=True, eq=False)
class HVector:
    """A coefficient vector living in ``space``.  Immutable."""

    space: SpaceDescriptor
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape != (self.space.dim,):
            raise StructuralError(
                f"{c.shape[0]} coefficients given for a space of dim {self.space.dim}"
            )
        if not np.all(np.isfinite(c)):
            raise StructuralError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, space: SpaceDescriptor) -> "HVector":
        return cls(space, np.zeros(space.dim))

    def _other(self, other: "HVector") -> np.ndarray:
        if not isinstance(other, HVector):
            return NotImplemented
        if other.space != self.space:
            raise StructuralError("vectors live in different spaces")
        return other.coeffs

    def __add__(self, other):
        c = self._other(other)
        if c is NotImplemented:
            return c
        return HVector(self.space, self.coeffs + c)

    def __sub__(self, other):
        c = self._other(other)
        if c is NotImplemented:
            return c
        return HVector(self.space, self.coeffs - c)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return HVector(self.space, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return HVector(self.space, -self.coeffs)

    def block(self, i: int) -> "HVector":
        """The i-th factor block of a product-space vector."""
        if self.space.kind != PRODUCT:
            raise StructuralError("block() needs a product-space vector")
        return HVector(self.space.factors[i], self.coeffs[self.space.block_slices[i]])

    def __len__(self):
        return self.space.dim


def as_array(v, space: SpaceDescriptor | None = None) -> np.ndarray:
    """Coefficients of ``v`` (HVector or array), checking ``space`` if given."""
    if isinstance(v, HVector):
        if space is not None and v.space != space:
            raise StructuralError("vector lives in a different space")
        return v.coeffs
    a = np.asarray(v, dtype=float)
    if space is not None:
        space.check(a)
    return a


def norm(v: HVector) -> float:
    """Norm of ``v`` in its space (Euclidean, weighted-grid or product)."""
    return float(v.space.norm_array(v.coeffs))


def graph_norm(v: HVector, semigroup) -> float:
    """``sqrt(|v|^2 + |A v|^2)`` for the generator A of ``semigroup``."""
    if v.space != semigroup.space:
        raise StructuralError("vector and semigroup live in different spaces")
    av = semigroup.generator_apply(v.coeffs)
    return float(np.sqrt(v.space.norm_sq_array(v.coeffs) + v.space.norm_sq_array(av)))
