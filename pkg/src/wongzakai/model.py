"""SPDE model bundles and the Stratonovich correction.

An :class:`SPDEModel` describes

    dX = (A X + b_hat(X)) dt + sum_j sigma_j(X) dB^j,   b_hat = b + rho / 2,
    rho(x) = sum_j D sigma_j(x) sigma_j(x),

whose Wong-Zakai approximations solve the pathwise equation with drift ``b``
and noise ``sigma_j(xi) dB_m^j/dt``.  All coefficient maps act on
coefficient arrays of shape ``(..., d)`` and must be pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import StructuralError
from .hilbert import HVector, SpaceDescriptor, as_array
from .semigroup import SemigroupModel

Map = Callable[[np.ndarray], np.ndarray]
JacobianAction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SPDEModel:
    name: str
    semigroup: SemigroupModel
    drift: Map
    vols: tuple
    vol_jacobians: tuple
    bounds: dict = field(default_factory=dict)
    jacobian_source: str = "analytic"
    sampler: Callable | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vols", tuple(self.vols))
        object.__setattr__(self, "vol_jacobians", tuple(self.vol_jacobians))
        if len(self.vols) != len(self.vol_jacobians):
            raise StructuralError("need one Jacobian action per volatility")
        if not self.vols:
            raise StructuralError("at least one noise channel is required")

    @property
    def space(self) -> SpaceDescriptor:
        return self.semigroup.space

    @property
    def r(self) -> int:
        return len(self.vols)

    @property
    def dim(self) -> int:
        return self.space.dim

    def b(self, x: np.ndarray) -> np.ndarray:
        return self.drift(x)

    def rho(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=float)
        for sig, jac in zip(self.vols, self.vol_jacobians):
            out = out + jac(x, sig(x))
        return out

    def b_hat(self, x: np.ndarray) -> np.ndarray:
        return self.drift(x) + 0.5 * self.rho(x)

    def sample_states(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Random probe states ``(n, d)`` used by :func:`validate_model`."""
        if self.sampler is not None:
            return self.sampler(rng, n)
        return rng.standard_normal((n, self.dim))


def _wrap(model: SPDEModel, x, fn):
    a = as_array(x, model.space)
    out = fn(a)
    return HVector(model.space, out) if isinstance(x, HVector) else out


def stratonovich_correction(model: SPDEModel, x):
    """``rho(x) = sum_j D sigma_j(x)[sigma_j(x)]``."""
    return _wrap(model, x, model.rho)


def drift_hat(model: SPDEModel, x):
    """``b(x) + rho(x) / 2``, the Ito drift of the Stratonovich equation."""
    return _wrap(model, x, model.b_hat)


def fd_jacobian(sigma: Map, eps: float = 1e-6) -> JacobianAction:
    """Central finite-difference Jacobian action, for models lacking an analytic one."""

    def jac(x, h):
        return (sigma(x + eps * h) - sigma(x - eps * h)) / (2 * eps)

    return jac


def with_fd_jacobians(model: SPDEModel, eps: float = 1e-6) -> SPDEModel:
    return SPDEModel(
        name=model.name,
        semigroup=model.semigroup,
        drift=model.drift,
        vols=model.vols,
        vol_jacobians=tuple(fd_jacobian(s, eps) for s in model.vols),
        bounds=model.bounds,
        jacobian_source="finite-difference",
        sampler=model.sampler,
        params=model.params,
    )


# -- validation ---------------------------------------------------------------


@dataclass
class Probe:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class ValidationReport:
    model: str
    probes: list
    constants: dict

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.probes)

    @property
    def failures(self) -> list:
        return [p.name for p in self.probes if not p.passed]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "passed": self.passed,
            "probes": [vars(p) for p in self.probes],
            "constants": self.constants,
        }


def _rel(a, b, norm):
    scale = np.maximum(np.maximum(norm(a), norm(b)), 1e-300)
    return norm(a - b) / scale


def validate_model(model: SPDEModel, n_probes: int = 20, seed: int = 0) -> ValidationReport:
    """Sampled checks of the structural assumptions on ``model``.

    Probes: Jacobian against central differences (step 1e-5, relative error
    below 1e-5), linearity of the Jacobian in the direction, repeat-call
    determinism, finiteness, and sampled Lipschitz ratios of ``b``,
    ``sigma_j`` and ``rho``.  If the model declares ``bounds["C"]`` (a
    common bound on ``sigma_j``, ``D sigma_j``, ``D^2 sigma_j``) the sampled
    sup of ``|rho|`` is checked against ``r C^2`` and its Lipschitz ratio
    against ``2 r C^2`` with 10% slack.  Never raises; failures are reported.
    """
    rng = np.random.default_rng(seed)
    norm = model.space.norm_array
    probes: list[Probe] = []
    consts: dict = {}

    def probe(name, fn):
        try:
            probes.append(fn())
        except Exception as exc:  # reported, not raised
            probes.append(Probe(name, False, float("nan"), float("nan"), f"{type(exc).__name__}: {exc}"))

    x = model.sample_states(rng, n_probes)
    x2 = model.sample_states(rng, n_probes)
    h1 = model.sample_states(rng, n_probes)
    h2 = model.sample_states(rng, n_probes)
    eps = 1e-5
    # difference quotients are linear in the direction only up to rounding / step
    lin_tol = 1e-10 if model.jacobian_source == "analytic" else 1e-6

    def finite():
        vals = [model.b(x), model.rho(x)] + [s(x) for s in model.vols]
        ok = all(np.all(np.isfinite(v)) for v in vals)
        return Probe("finite", ok, float(ok), 1.0)

    probe("finite", finite)

    for j, (sig, jac) in enumerate(zip(model.vols, model.vol_jacobians), start=1):

        def jac_fd(sig=sig, jac=jac, j=j):
            analytic = jac(x, h1)
            numeric = (sig(x + eps * h1) - sig(x - eps * h1)) / (2 * eps)
            diff = norm(analytic - numeric)
            scale = np.maximum(norm(analytic), norm(numeric))
            err = np.where(scale > 1e-12, diff / np.maximum(scale, 1e-300), diff)
            worst = float(np.max(err))
            return Probe(f"jacobian_fd[{j}]", worst < 1e-5, worst, 1e-5)

        def linear(jac=jac, j=j):
            a, c = 0.7, -1.3
            lhs = jac(x, a * h1 + c * h2)
            rhs = a * jac(x, h1) + c * jac(x, h2)
            worst = float(np.max(_rel(lhs, rhs, norm)))
            return Probe(f"jacobian_linear[{j}]", worst < lin_tol, worst, lin_tol)

        def lipschitz(sig=sig, j=j):
            ratio = float(np.max(norm(sig(x) - sig(x2)) / norm(x - x2)))
            consts[f"lipschitz_sigma[{j}]"] = ratio
            ok = np.isfinite(ratio)
            return Probe(f"lipschitz_sigma[{j}]", bool(ok), ratio, float("inf"))

        probe(f"jacobian_fd[{j}]", jac_fd)
        probe(f"jacobian_linear[{j}]", linear)
        probe(f"lipschitz_sigma[{j}]", lipschitz)

    def determinism():
        same = np.array_equal(model.b(x), model.b(x)) and np.array_equal(model.rho(x), model.rho(x))
        same = same and all(np.array_equal(s(x), s(x)) for s in model.vols)
        return Probe("determinism", bool(same), float(same), 1.0)

    probe("determinism", determinism)

    def lip_b():
        ratio = float(np.max(norm(model.b(x) - model.b(x2)) / norm(x - x2)))
        consts["lipschitz_b"] = ratio
        return Probe("lipschitz_b", bool(np.isfinite(ratio)), ratio, float("inf"))

    probe("lipschitz_b", lip_b)

    C = model.bounds.get("C")

    def rho_bound():
        sup = float(np.max(norm(model.rho(x))))
        consts["sup_rho"] = sup
        if C is None:
            return Probe("rho_bounded", True, sup, float("inf"), "no declared bound")
        thr = model.r * C**2
        return Probe("rho_bounded", sup <= thr * (1 + 1e-12), sup, thr)

    def rho_lip():
        ratio = float(np.max(norm(model.rho(x) - model.rho(x2)) / norm(x - x2)))
        consts["lipschitz_rho"] = ratio
        if C is None:
            return Probe("rho_lipschitz", True, ratio, float("inf"), "no declared bound")
        thr = 1.1 * 2 * model.r * C**2
        return Probe("rho_lipschitz", ratio <= thr, ratio, thr)

    probe("rho_bounded", rho_bound)
    probe("rho_lipschitz", rho_lip)
    if model.jacobian_source != "analytic":
        probes.append(Probe("jacobian_source", True, 0.0, 0.0, "finite-difference fallback in use"))
    return ValidationReport(model.name, probes, consts)


def constant_vols(vectors: Sequence[np.ndarray]):
    """Additive noise: ``sigma_j(x) = v_j`` and ``D sigma_j = 0``."""
    vols, jacs = [], []
    for v in vectors:
        v = np.asarray(v, dtype=float)

        def sig(x, v=v):
            return np.broadcast_to(v, np.shape(x)).copy()

        def jac(x, h):
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(h)))

        vols.append(sig)
        jacs.append(jac)
    return vols, jacs


def zero_drift(x):
    return np.zeros_like(x, dtype=float)
