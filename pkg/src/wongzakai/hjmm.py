"""Forward-rate curves under the Musiela parametrization with stochastic volatility.

State ``(r, v)``: a forward curve ``r(x)`` sampled on a maturity grid and a
scalar volatility factor ``v``.  The curve space carries the weighted norm

    |h|_beta^2 = |h(0)|^2 + int_0^inf |h'(x)|^2 exp(beta x) dx,

the curve semigroup is the maturity shift and the volatility family is

    gamma_j(h, v)(x) = (1 + tanh(v) / 2) c_j exp(-a_j x),   a_j > beta' / 2,
    lambda_j(v) = nu_j / (1 + v^2),   mu(v) = kappa (theta - tanh(v)).

The Ito drift of the curve is the no-arbitrage drift
``alpha = sum_j gamma_j * int_0^x gamma_j``.  The assembled generic model
uses ``alpha - beta_corr`` (curve) and ``mu - sum_j lambda_j lambda_j' / 2``
(factor) as its Stratonovich drift ``b``, so that ``b + rho / 2`` is the Ito
drift ``(alpha, mu)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ArgumentError, NumericalError, ParameterError
from .hilbert import HVector, SpaceDescriptor
from .model import SPDEModel
from .noise import BrownianLattice, cells_per_block
from .schemes import FP_FAIL, FP_MAX_SWEEPS, FP_MIN_SWEEPS, FP_TOL
from .semigroup import _GL_NODES, _GL_WEIGHTS, GridShiftSemigroup, ProductSemigroup, SpectralSemigroup


def default_grid(x_max: float = 30.0) -> np.ndarray:
    """Monthly to 5y, quarterly to 10y, then annual to ``x_max``."""
    g = np.concatenate([np.arange(0, 5, 1 / 12), np.arange(5, 10, 0.25), np.arange(10, x_max + 1e-9, 1.0)])
    return np.unique(np.round(g, 12))


@dataclass(frozen=True, eq=False)
class ForwardCurve:
    grid: np.ndarray
    values: np.ndarray
    beta: float = 0.5

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise ArgumentError("grid and values must be 1-D arrays of equal length")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("curve values must be finite")
        if not self.beta > 0:
            raise ArgumentError("beta must be positive")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, grid=None, beta: float = 0.5) -> "ForwardCurve":
        g = default_grid() if grid is None else np.asarray(grid, dtype=float)
        return cls(g, fn(g), beta)

    @property
    def space(self) -> SpaceDescriptor:
        return SpaceDescriptor.weighted_grid(self.grid, self.beta)

    def as_hvector(self) -> HVector:
        return HVector(self.space, self.values)

    def __call__(self, x):
        """Evaluate with linear interpolation, flat beyond the last maturity."""
        return np.interp(x, self.grid, self.values)

    @property
    def long_rate(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class HJMMState:
    curve: ForwardCurve
    v: float

    def as_hvector(self, space: SpaceDescriptor) -> HVector:
        return HVector(space, np.append(self.curve.values, self.v))

    @classmethod
    def from_hvector(cls, x: HVector, beta: float) -> "HJMMState":
        grid = x.space.factors[0].grid_array
        return cls(ForwardCurve(grid, x.coeffs[:-1], beta), float(x.coeffs[-1]))


def _default_r0(x):
    return 0.02 + 0.015 * (1 - np.exp(-0.5 * x))


@dataclass(frozen=True)
class HJMMParams:
    beta: float = 0.5
    beta_prime: float = 1.0
    c: tuple = (0.01, 0.02)
    a: tuple = (1.0, 1.5)
    nu: tuple = (0.3, 0.2)
    kappa: float = 1.0
    theta: float = 0.0
    grid: tuple | None = None
    r0: tuple | None = None
    v0: float = 0.0

    def __post_init__(self):
        for name in ("c", "a", "nu"):
            object.__setattr__(self, name, tuple(float(z) for z in getattr(self, name)))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(z) for z in self.grid))
        if self.r0 is not None:
            object.__setattr__(self, "r0", tuple(float(z) for z in self.r0))
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        if not self.beta_prime > self.beta:
            raise ParameterError("beta_prime must exceed beta")
        if not (len(self.c) == len(self.a) == len(self.nu) >= 1):
            raise ParameterError("c, a and nu must have the same positive length")
        bad = [a for a in self.a if not a > self.beta_prime / 2]
        if bad:
            raise ParameterError(f"decay rates {bad} must exceed beta_prime / 2 = {self.beta_prime / 2:g}")
        if self.r0 is not None and len(self.r0) != len(self.x):
            raise ParameterError("r0 must have one value per grid node")

    @classmethod
    def from_dict(cls, d: dict) -> "HJMMParams":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown HJMM parameters {sorted(extra)}")
        return cls(**d)

    @property
    def r(self) -> int:
        return len(self.c)

    @property
    def x(self) -> np.ndarray:
        return default_grid() if self.grid is None else np.asarray(self.grid)

    def initial_curve(self) -> np.ndarray:
        return _default_r0(self.x) if self.r0 is None else np.asarray(self.r0)

    # -- coefficient functions (scalar or batched v) --------------------------

    def vol_level(self, v):
        return 1 + 0.5 * np.tanh(v)

    def vol_level_prime(self, v):
        return 0.5 / np.cosh(v) ** 2

    def lam(self, j, v):
        return self.nu[j] / (1 + np.square(v))

    def lam_prime(self, j, v):
        return -2 * self.nu[j] * v / (1 + np.square(v)) ** 2

    def mu(self, v):
        return self.kappa * (self.theta - np.tanh(v))

    def shape(self, j) -> np.ndarray:
        return self.c[j] * np.exp(-self.a[j] * self.x)

    def gamma(self, j, h, v):
        """``gamma_j(h, v)`` on the grid; ``h`` is unused by this family."""
        return np.asarray(self.vol_level(v))[..., None] * self.shape(j)


def hbeta_norm(curve: ForwardCurve) -> float:
    """Discrete weighted norm: central-difference slope, trapezoid, flat tail."""
    return float(curve.space.norm_array(curve.values))


def integral_operator(curve: ForwardCurve) -> ForwardCurve:
    """``x -> int_0^x h``, cumulative trapezoid on the grid."""
    return ForwardCurve(curve.grid, cumulative_trapezoid(curve.values, curve.grid, initial=0.0), curve.beta)


def _alpha(params: HJMMParams, h, v):
    x = params.x
    out = 0.0
    for j in range(params.r):
        g = params.gamma(j, h, v)
        out = out + g * cumulative_trapezoid(g, x, axis=-1, initial=0.0)
    return out


def hjm_drift(params: HJMMParams, curve: ForwardCurve, v: float) -> ForwardCurve:
    """No-arbitrage drift ``sum_j gamma_j * I gamma_j`` (pointwise product on the grid)."""
    return ForwardCurve(curve.grid, _alpha(params, curve.values, v), curve.beta)


def _beta_curve(params: HJMMParams, v):
    lp = np.asarray(params.vol_level_prime(v))[..., None]
    return 0.5 * sum(lp * np.asarray(params.lam(j, v))[..., None] * params.shape(j) for j in range(params.r))


def _beta_scalar(params: HJMMParams, v):
    return 0.5 * sum(params.lam(j, v) * params.lam_prime(j, v) for j in range(params.r))


def wz_beta_correction(params: HJMMParams, curve: ForwardCurve, v: float):
    """Halved Stratonovich correction, split into curve and factor parts.

    Curve: ``1/2 sum_j (D_r gamma_j[gamma_j] + D_v gamma_j lambda_j)``; the
    first term vanishes for this family.  Factor: ``1/2 sum_j lambda_j lambda_j'``.
    """
    return ForwardCurve(curve.grid, _beta_curve(params, v) + 0 * curve.values, curve.beta), float(
        _beta_scalar(params, v)
    )


def _sampler(params: HJMMParams):
    x = params.x

    def sample(rng, n):
        coef = rng.standard_normal((n, 3)) * np.array([0.02, 0.02, 0.01])
        h = coef[:, :1] + coef[:, 1:2] * np.exp(-0.5 * x) + coef[:, 2:3] * x * np.exp(-x)
        v = rng.standard_normal((n, 1))
        return np.concatenate([h, v], axis=1)

    return sample


def build_hjmm_model(params: HJMMParams | None = None) -> SPDEModel:
    """Assemble the HJMM equation on ``H_beta x R`` as a generic model."""
    params = HJMMParams() if params is None else params
    x = params.x
    d = len(x)
    curve_space = SpaceDescriptor.weighted_grid(x, params.beta)
    semigroup = ProductSemigroup(GridShiftSemigroup(curve_space), SpectralSemigroup([0.0]))

    def split(z):
        return z[..., :d], z[..., d]

    def drift(z):
        h, v = split(z)
        curve = _alpha(params, h, v) - _beta_curve(params, v)
        scalar = params.mu(v) - _beta_scalar(params, v)
        return np.concatenate([curve, np.asarray(scalar)[..., None]], axis=-1)

    vols, jacs = [], []
    for j in range(params.r):

        def sig(z, j=j):
            h, v = split(z)
            return np.concatenate([params.gamma(j, h, v), np.asarray(params.lam(j, v))[..., None]], axis=-1)

        def jac(z, dz, j=j):
            h, v = split(z)
            dv = np.asarray(dz)[..., d]
            curve = (params.vol_level_prime(v) * dv)[..., None] * params.shape(j)
            scalar = params.lam_prime(j, v) * dv
            return np.concatenate([curve, np.asarray(scalar)[..., None]], axis=-1)

        vols.append(sig)
        jacs.append(jac)

    return SPDEModel(
        name="hjmm",
        semigroup=semigroup,
        drift=drift,
        vols=vols,
        vol_jacobians=jacs,
        sampler=_sampler(params),
        params={"hjmm": params, "x0": np.append(params.initial_curve(), params.v0)},
    )


def hjmm_wz_stepper(params: HJMMParams, lat: BrownianLattice, m: int, r0=None, v0=None):
    """Wong-Zakai approximation written directly on curves.

    Evaluates, on each coarse cell ``[k delta, (k+1) delta]`` and at every
    fine time ``t``,

        rho(t, x) = rho(k delta, x + t - k delta)
                    + int (alpha - beta_corr + sum_j dB_j/delta gamma_j)(s, x + t - s) ds,
        zeta(t)   = zeta(k delta) + int (mu - sum_j lambda_j lambda_j'/2
                                           + sum_j dB_j/delta lambda_j)(s) ds,

    with point evaluation by linear interpolation (flat beyond the last
    maturity), the integrands linear in ``s`` between fine times, and
    4-point Gauss-Legendre in ``s`` for the curve part.  Returns curves
    ``(m_fine + 1, d)`` and factor values ``(m_fine + 1,)``.
    """
    x = params.x
    d = len(x)
    N = lat.m_fine
    L = cells_per_block(N, m)
    h = lat.T / N
    delta = lat.T / m
    slopes = lat.increments.reshape(params.r, m, L).sum(axis=-1) / delta
    u = h * (_GL_NODES + 1) / 2
    wq = h * _GL_WEIGHTS / 2

    def integrand(rho, zeta, beta):
        g = [params.gamma(j, rho, zeta) for j in range(params.r)]
        curve = _alpha(params, rho, zeta) - _beta_curve(params, zeta) + sum(b * gj for b, gj in zip(beta, g))
        scal = params.mu(zeta) - _beta_scalar(params, zeta) + sum(b * params.lam(j, zeta) for j, b in enumerate(beta))
        return curve, float(scal)

    def shifted(values, s):
        return np.interp(x + s, x, values)

    def cell_piece(G_left, G_right, lag):
        # int over one fine step, evaluated `lag` steps after its end
        out = np.zeros(d)
        for uq, w in zip(u, wq):
            s = lag * h + h - uq
            out += w * ((1 - uq / h) * shifted(G_left, s) + (uq / h) * shifted(G_right, s))
        return out

    curves = np.empty((N + 1, d))
    zetas = np.empty(N + 1)
    curves[0] = params.initial_curve() if r0 is None else np.asarray(r0, dtype=float)
    zetas[0] = params.v0 if v0 is None else float(v0)
    for k in range(m):
        beta = slopes[:, k]
        rho_k, zeta_k = curves[k * L].copy(), zetas[k * L]
        G = [None] * (L + 1)
        Z = [0.0] * (L + 1)
        G[0], Z[0] = integrand(rho_k, zeta_k, beta)
        for n in range(L):
            known = shifted(rho_k, (n + 1) * h)
            for i in range(n):
                known += cell_piece(G[i], G[i + 1], n - i)
            known_z = zeta_k + sum(h / 2 * (Z[i] + Z[i + 1]) for i in range(n))

            def update(G_right, Z_right):
                return known + cell_piece(G[n], G_right, 0), known_z + h / 2 * (Z[n] + Z_right)

            rho1, zeta1 = update(G[n], Z[n])
            for sweep in range(1, FP_MAX_SWEEPS + 1):
                Gr, Zr = integrand(rho1, zeta1, beta)
                new_rho, new_zeta = update(Gr, Zr)
                change = max(np.max(np.abs(new_rho - rho1)), abs(new_zeta - zeta1))
                scale = max(1.0, np.max(np.abs(new_rho)), abs(new_zeta))
                rho1, zeta1 = new_rho, new_zeta
                if sweep >= FP_MIN_SWEEPS and change <= FP_TOL * scale:
                    break
            else:
                if not change <= FP_FAIL * scale:
                    raise NumericalError("HJMM stepper fixed point did not converge", time=(k * L + n + 1) * h)
            G[n + 1], Z[n + 1] = integrand(rho1, zeta1, beta)
            curves[k * L + n + 1] = rho1
            zetas[k * L + n + 1] = zeta1
    return curves, zetas


def bond_price(curve: ForwardCurve, maturity: float) -> float:
    """``exp(-int_0^T h(x) dx)`` for the linearly interpolated curve."""
    if not 0 <= maturity <= curve.grid[-1]:
        raise ArgumentError(f"maturity {maturity} outside [0, {curve.grid[-1]}]")
    inside = curve.grid[curve.grid < maturity]
    xs = np.append(inside, maturity)
    return float(np.exp(-np.trapezoid(curve(xs), xs)))


def read_curve_csv(path, beta: float = 0.5) -> ForwardCurve:
    """Curve from ``maturity,rate`` rows (header required)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    grid = np.array([float(r["maturity"]) for r in rows])
    vals = np.array([float(r["rate"]) for r in rows])
    return ForwardCurve(grid, vals, beta)


def write_curve_csv(curve: ForwardCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["maturity", "rate"])
        for xi, hi in zip(curve.grid, curve.values):
            w.writerow([repr(float(xi)), repr(float(hi))])


def write_bond_prices_csv(curve: ForwardCurve, maturities, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["maturity", "price"])
        for T in maturities:
            w.writerow([repr(float(T)), repr(bond_price(curve, T))])
