"""Time integrators: accelerated exponential Euler-Maruyama, exponential
Euler and the Wong-Zakai pathwise integrator.

All schemes report states on the fine lattice grid ``n T / m_fine`` whatever
the coarse step count ``m`` is, so sup-over-time errors of different levels
are taken on the same monitoring grid.

The batched entry point :func:`simulate` takes fine increments of shape
``(paths, r, m_fine)`` and returns states ``(paths, m_fine + 1, d)``; each
row is computed independently of the others.  The single-path functions
wrap it for one :class:`~wongzakai.noise.BrownianLattice`.

Implementation notes
--------------------
Inside a coarse cell ``[k delta, (k+1) delta]`` with ``L`` fine steps of
width ``h`` the Euler-Maruyama state is

    Y(t_n) = S_{n h} Y_k + int S_{t_n - s} b_hat(Y_k) ds
             + sum_j sum_{i<n} S_{t_n - s_i} sigma_j(Y_k) dB^j_i.

For diagonal semigroups this is evaluated by the one-step recursion
``Y_{n+1} = S_h (Y_n + sum_j sigma_j dB^j_n) + Phi_h b_hat``, which is the
same expression regrouped; other semigroups (the maturity shift) use the
direct per-lag form so that each state is one interpolation away from the
cell's left value, avoiding the numerical diffusion of repeated
interpolation.

The Wong-Zakai integrator treats the integrand ``b(xi) + sum_j sigma_j(xi)
beta_j`` (``beta_j`` the constant cell slope of the polygonal noise) as
linear between substep endpoints and integrates the semigroup against it
exactly (diagonal) or by 4-point Gauss-Legendre (shift).  The implicit
endpoint value is found by an exponential Euler predictor followed by
fixed-point sweeps: at least 2, at most 8, stopping once the update falls
below ``1e-10`` relative to ``max(1, |xi|_inf)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NumericalError, StructuralError
from .hilbert import HVector, SpaceDescriptor, as_array
from .model import SPDEModel
from .noise import BrownianLattice, cells_per_block
from .semigroup import act

BLOWUP = 1e12
FP_TOL = 1e-10
FP_MIN_SWEEPS = 2
FP_MAX_SWEEPS = 8
FP_FAIL = 1e-6

SCHEMES = ("em", "ee", "wz", "ref")


@dataclass(frozen=True)
class SchemeConfig:
    """``m`` coarse steps; ``inner_steps`` Wong-Zakai substeps per coarse
    cell (default: the fine steps per cell); ``monitoring`` the fine grid
    resolution (default: the lattice's ``m_fine``)."""

    m: int
    inner_steps: int | None = None
    monitoring: int | None = None

    def resolve(self, m_fine: int) -> "SchemeConfig":
        monitoring = m_fine if self.monitoring is None else self.monitoring
        if monitoring != m_fine:
            raise ArgumentError("monitoring resolution must equal the lattice's m_fine")
        L = cells_per_block(m_fine, self.m)
        inner = L if self.inner_steps is None else self.inner_steps
        if inner < 1 or L % inner:
            raise ArgumentError(f"inner_steps = {inner} must divide the {L} fine steps per cell")
        return SchemeConfig(self.m, inner, monitoring)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    scheme: str
    m: int
    space: SpaceDescriptor = field(repr=False)
    seed: int | None = None
    path: int | None = None

    def state(self, i: int) -> HVector:
        return HVector(self.space, self.states[i])

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """``time,coeff_0,...`` rows preceded by ``# key=value`` header lines."""
        d = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            fh.write(f"# scheme={self.scheme}\n# m={self.m}\n# seed={self.seed}\n# path={self.path}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time"] + [f"coeff_{i}" for i in range(d)])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_trajectory_csv(path):
    """Times, states and header fields of a file written by :meth:`Trajectory.to_csv`."""
    meta, rows = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            else:
                rows.append(line)
    data = np.array([[float(v) for v in r.strip().split(",")] for r in rows[1:]])
    return data[:, 0], data[:, 1:], meta


# -- helpers -----------------------------------------------------------------


def _guard(model: SPDEModel, block: np.ndarray, first_index: int, h: float):
    """Raise NumericalError if any state in ``block (B, n, d)`` is bad."""
    nrm = model.space.norm_array(block)
    bad = ~np.isfinite(nrm) | (nrm > BLOWUP)
    if np.any(bad):
        rows, cols = np.nonzero(bad)
        first = np.argmin(cols)
        t = (first_index + cols[first]) * h
        raise NumericalError(
            f"state norm exceeded {BLOWUP:g} at t = {t:g}", time=float(t), path=int(rows[first])
        )


def _dense_apply_many(ops: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``ops (n, d, d)`` applied to ``v (B, d)`` -> ``(B, n, d)``."""
    return np.einsum("nde,be->bnd", ops, v)


def _prepare(model, x0, increments, T, m):
    x0 = as_array(x0, model.space).reshape(-1)
    if not np.all(np.isfinite(x0)):
        raise ArgumentError("initial state must be finite")
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 3 or inc.shape[1] != model.r:
        raise StructuralError(f"increments must have shape (paths, {model.r}, m_fine)")
    B, _, N = inc.shape
    L = cells_per_block(N, m)
    h = T / N
    states = np.empty((B, N + 1, model.dim))
    states[:, 0] = x0
    return x0, inc, B, N, L, h, states


# -- Euler-Maruyama ----------------------------------------------------------


def _em_batch(model: SPDEModel, x0, increments, T: float, m: int) -> np.ndarray:
    x0, inc, B, N, L, h, states = _prepare(model, x0, increments, T, m)
    K = model.semigroup.kernels(h, L)
    y = np.broadcast_to(x0, (B, model.dim)).copy()
    if K.diagonal:
        S1 = K.M[1]
        phi = K.Ka[0] + K.Kb[0]
        for k in range(m):
            bh = model.b_hat(y)
            g = [sig(y) for sig in model.vols]
            drift = phi * bh
            cur = y
            for n in range(L):
                i = k * L + n
                noise = sum(inc[:, j, i, None] * g[j] for j in range(model.r))
                cur = S1 * (cur + noise) + drift
                states[:, i + 1] = cur
            _guard(model, states[:, k * L + 1:(k + 1) * L + 1], k * L + 1, h)
            y = cur
        return states
    cum = np.cumsum(K.Ka + K.Kb, axis=0)  # cum[n-1] = int_0^{n h} S_u du
    for k in range(m):
        bh = model.b_hat(y)
        g = [sig(y) for sig in model.vols]
        block = inc[:, :, k * L:(k + 1) * L]
        v = sum(block[:, j, :, None] * g[j][:, None, :] for j in range(model.r))
        out = _dense_apply_many(K.M[1:], y) + _dense_apply_many(cum, bh)
        for n in range(1, L + 1):
            lags = n - np.arange(n)
            out[:, n - 1] += np.einsum("ide,bie->bd", K.M[lags], v[:, :n])
        states[:, k * L + 1:(k + 1) * L + 1] = out
        _guard(model, out, k * L + 1, h)
        y = out[:, -1]
    return states


# -- exponential Euler ---------------------------------------------------------


def _ee_batch(model: SPDEModel, x0, increments, T: float, m: int) -> np.ndarray:
    x0, inc, B, N, L, h, states = _prepare(model, x0, increments, T, m)
    K = model.semigroup.kernels(h, L)
    tau = h * np.arange(1, L + 1)
    y = np.broadcast_to(x0, (B, model.dim)).copy()
    for k in range(m):
        bh = model.b_hat(y)
        g = [sig(y) for sig in model.vols]
        w = np.cumsum(inc[:, :, k * L:(k + 1) * L], axis=-1)
        inner = y[:, None, :] + tau[None, :, None] * bh[:, None, :]
        inner = inner + sum(w[:, j, :, None] * g[j][:, None, :] for j in range(model.r))
        if K.diagonal:
            out = K.M[None, 1:] * inner
        else:
            out = np.einsum("nde,bne->bnd", K.M[1:], inner)
        states[:, k * L + 1:(k + 1) * L + 1] = out
        _guard(model, out, k * L + 1, h)
        y = out[:, -1]
    return states


# -- Wong-Zakai ----------------------------------------------------------------


def _fixed_point(F, base, kb, f_left, beta, t: float):
    """Solve ``x = base + kb F(x, beta)`` row by row.

    Rows stop iterating independently once converged, so each row's result
    does not depend on the rest of the batch.
    """
    x = base + act(kb, f_left)
    active = np.arange(x.shape[0])
    delta = scale = None
    for sweep in range(1, FP_MAX_SWEEPS + 1):
        new = base[active] + act(kb, F(x[active], beta[active]))
        delta = np.max(np.abs(new - x[active]), axis=-1)
        scale = np.maximum(1.0, np.max(np.abs(new), axis=-1))
        x[active] = new
        if sweep >= FP_MIN_SWEEPS:
            keep = ~(delta <= FP_TOL * scale)
            active, delta, scale = active[keep], delta[keep], scale[keep]
            if active.size == 0:
                return x
    bad = ~(delta <= FP_FAIL * scale)
    if np.any(bad):
        raise NumericalError(
            "Wong-Zakai fixed-point sweeps did not converge", time=t, path=int(active[bad][0])
        )
    return x


def _wz_batch(model: SPDEModel, x0, increments, T: float, m: int,
              inner_steps: int | None = None, ito_drift: bool = False) -> np.ndarray:
    x0, inc, B, N, L, h, states = _prepare(model, x0, increments, T, m)
    n_sub = L if inner_steps is None else inner_steps
    if n_sub < 1 or L % n_sub:
        raise ArgumentError(f"inner_steps = {n_sub} must divide the {L} fine steps per cell")
    delta = T / m
    slopes = inc.reshape(B, model.r, m, L).sum(axis=-1) / delta
    drift = model.b_hat if ito_drift else model.b

    def F(x, beta):
        out = drift(x)
        for j, sig in enumerate(model.vols):
            out = out + beta[:, j, None] * sig(x)
        return out

    sg = model.semigroup
    xi = np.broadcast_to(x0, (B, model.dim)).copy()
    if sg.diagonal:
        q = L // n_sub
        H = delta / n_sub
        KH = sg.kernels(H, 1)
        S_H, a0, b0 = KH.M[1], KH.Ka[0], KH.Kb[0]
        dense = [sg.substep_coefficients(j * h, H) for j in range(1, q)]
        for k in range(m):
            beta = slopes[:, :, k]
            f0 = F(xi, beta)
            for s in range(n_sub):
                i0 = k * L + s * q
                base = S_H * xi + a0 * f0
                xi1 = _fixed_point(F, base, b0, f0, beta, (i0 + q) * h)
                f1 = F(xi1, beta)
                for j, (St, At, Bt) in enumerate(dense, start=1):
                    states[:, i0 + j] = St * xi + At * f0 + Bt * f1
                states[:, i0 + q] = xi1
                xi, f0 = xi1, f1
            _guard(model, states[:, k * L + 1:(k + 1) * L + 1], k * L + 1, h)
        return states
    if n_sub != L:
        raise ArgumentError("non-diagonal semigroups need inner_steps equal to the fine steps per cell")
    K = sg.kernels(h, L)
    for k in range(m):
        beta = slopes[:, :, k]
        hist = np.empty((B, L + 1, model.dim))
        hist[:, 0] = F(xi, beta)
        xik = xi
        for n in range(L):
            base = act(K.M[n + 1], xik) + act(K.Ka[0], hist[:, n])
            if n:
                lags = n - np.arange(n)
                base = base + np.einsum("ide,bie->bd", K.Ka[lags], hist[:, :n])
                base = base + np.einsum("ide,bie->bd", K.Kb[lags], hist[:, 1:n + 1])
            xi = _fixed_point(F, base, K.Kb[0], hist[:, n], beta, (k * L + n + 1) * h)
            hist[:, n + 1] = F(xi, beta)
            states[:, k * L + n + 1] = xi
        _guard(model, states[:, k * L + 1:(k + 1) * L + 1], k * L + 1, h)
    return states


# -- public API ------------------------------------------------------------------


def simulate(scheme: str, model: SPDEModel, x0, increments, T: float, m: int | None = None,
             inner_steps: int | None = None, ito_drift: bool = False) -> np.ndarray:
    """Batched integration; returns states ``(paths, m_fine + 1, d)``.

    ``scheme`` is one of ``em``, ``ee``, ``wz`` or ``ref`` (Euler-Maruyama
    on the fine grid, ``m`` ignored).  ``ito_drift`` makes the Wong-Zakai
    integrator use ``b_hat`` instead of ``b``; that converges to the wrong
    limit and exists as a negative control.
    """
    if scheme == "ref":
        return _em_batch(model, x0, increments, T, np.shape(increments)[-1])
    if m is None:
        raise ArgumentError("m is required")
    if scheme == "em":
        return _em_batch(model, x0, increments, T, m)
    if scheme == "ee":
        return _ee_batch(model, x0, increments, T, m)
    if scheme == "wz":
        return _wz_batch(model, x0, increments, T, m, inner_steps, ito_drift)
    raise ArgumentError(f"unknown scheme {scheme!r}")


def _single(scheme, model, x0, lat: BrownianLattice, cfg, **kw) -> Trajectory:
    if isinstance(cfg, int):
        cfg = SchemeConfig(cfg)
    cfg = cfg.resolve(lat.m_fine)
    try:
        states = simulate(scheme, model, x0, lat.increments[None], lat.T, cfg.m,
                          inner_steps=cfg.inner_steps, **kw)[0]
    except NumericalError as exc:
        exc.path, exc.seed, exc.m = lat.path, lat.seed, cfg.m
        raise
    m = lat.m_fine if scheme == "ref" else cfg.m
    return Trajectory(lat.times, states, scheme, m, model.space, lat.seed, lat.path)


def euler_maruyama(model: SPDEModel, x0, lat: BrownianLattice, cfg) -> Trajectory:
    """Accelerated exponential Euler-Maruyama with coefficients frozen per coarse cell."""
    return _single("em", model, x0, lat, cfg)


def exponential_euler(model: SPDEModel, x0, lat: BrownianLattice, cfg) -> Trajectory:
    """Exponential Euler: the semigroup factor is frozen at the cell's left end too."""
    return _single("ee", model, x0, lat, cfg)


def wong_zakai(model: SPDEModel, x0, lat: BrownianLattice, cfg, ito_drift: bool = False) -> Trajectory:
    """Pathwise solution driven by the polygonal interpolation of ``lat``."""
    return _single("wz", model, x0, lat, cfg, ito_drift=ito_drift)


def reference_solution(model: SPDEModel, x0, lat: BrownianLattice) -> Trajectory:
    """Euler-Maruyama on the finest grid, used as the stand-in for the exact solution."""
    return _single("ref", model, x0, lat, SchemeConfig(lat.m_fine))
