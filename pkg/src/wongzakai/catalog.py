"""Built-in models.

=================  =====================================================
name               equation
=================  =====================================================
quantization       dX = (Delta - mass^2) X dt + sum_j sigma_j dB^j
cable              dV = (len^2 Delta V - V) / tau dt + sum_j sigma_j dB^j
additive_heat      dX = nu Delta X dt + sum_j sigma_j dB^j
geometric          dX = sigma X o dB  (scalar, A = 0; closed-form oracle)
nemytskii_heat     dX = Delta X dt + sum_j c_j tanh(X) o dB^j
hjmm               forward curves with stochastic volatility, see hjmm
=================  =====================================================

The spectral models live on the Dirichlet sine modes of (0, pi) with
eigenvalues ``-k^2``; additive volatilities decay like ``k^-2`` so they lie
in the domain of the generator.  The default initial state of every model
is stored in ``model.params["x0"]``.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .model import SPDEModel, constant_vols, zero_drift
from .semigroup import SpectralSemigroup, build_perturbed_spectral, dirichlet_laplacian_eigenvalues

_TANH2_MAX = 4 / (3 * np.sqrt(3))  # sup |tanh''|


def _additive_vectors(modes: int, r: int, amplitude: float) -> list:
    k = np.arange(1, modes + 1, dtype=float)
    return [amplitude * (-1.0) ** ((j - 1) * k) / (j * k**2) for j in range(1, r + 1)]


def _spectral_sampler(modes, scale=1.0):
    k = np.arange(1, modes + 1, dtype=float)

    def sample(rng, n):
        return scale * rng.standard_normal((n, modes)) / k

    return sample


def _additive(name, semigroup, modes, r, amplitude, params):
    vols, jacs = constant_vols(_additive_vectors(modes, r, amplitude))
    k = np.arange(1, modes + 1, dtype=float)
    params = dict(params, x0=1.0 / k**2)
    return SPDEModel(
        name=name,
        semigroup=semigroup,
        drift=zero_drift,
        vols=vols,
        vol_jacobians=jacs,
        bounds={"C": max(float(np.linalg.norm(v)) for v in _additive_vectors(modes, r, amplitude))},
        sampler=_spectral_sampler(modes),
        params=params,
    )


def quantization(modes: int = 16, mass: float = 0.0, r: int = 2, amplitude: float = 0.5) -> SPDEModel:
    sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(modes), 1.0, -(mass**2))
    return _additive("quantization", sg, modes, r, amplitude,
                     dict(modes=modes, mass=mass, r=r, amplitude=amplitude))


def cable(modes: int = 16, length: float = 1.0, tau: float = 2.0, r: int = 2,
          amplitude: float = 0.5) -> SPDEModel:
    if not (length > 0 and tau > 0):
        raise ParameterError("length and tau must be positive")
    sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(modes), length**2 / tau, -1.0 / tau)
    return _additive("cable", sg, modes, r, amplitude,
                     dict(modes=modes, length=length, tau=tau, r=r, amplitude=amplitude))


def additive_heat(modes: int = 8, diffusivity: float = 1.0, r: int = 2,
                  amplitude: float = 0.5) -> SPDEModel:
    sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(modes), diffusivity, 0.0)
    return _additive("additive_heat", sg, modes, r, amplitude,
                     dict(modes=modes, diffusivity=diffusivity, r=r, amplitude=amplitude))


def geometric(sigma: float = 0.3, x0: float = 1.0) -> SPDEModel:
    """Scalar ``d xi = sigma xi o dB``; the Stratonovich solution is ``x0 exp(sigma B)``.

    The volatility is unbounded, so this model sits outside the bounded
    coefficient setting and serves only as a closed-form oracle.
    """

    def sig(x):
        return sigma * x

    def jac(x, h):
        return sigma * np.asarray(h, dtype=float) + 0 * x

    return SPDEModel(
        name="geometric",
        semigroup=SpectralSemigroup([0.0]),
        drift=zero_drift,
        vols=[sig],
        vol_jacobians=[jac],
        params=dict(sigma=sigma, x0=np.array([float(x0)])),
    )


def nemytskii_coefficients(modes: int, r: int, amplitude: float) -> np.ndarray:
    k = np.arange(1, modes + 1, dtype=float)
    return np.stack([amplitude * (1 + 0.5 * (j - 1) * (-1.0) ** k) / (j * k) for j in range(1, r + 1)])


def nemytskii_heat(modes: int = 16, r: int = 2, amplitude: float = 0.5,
                   jacobian_error: float = 1.0) -> SPDEModel:
    """Heat equation with ``sigma_j(x)_k = c_jk tanh(x_k)``.

    ``jacobian_error`` scales the Jacobian action and exists only as a
    negative control for :func:`validate_model`; leave it at 1.
    """
    c = nemytskii_coefficients(modes, r, amplitude)
    vols, jacs = [], []
    for cj in c:

        def sig(x, cj=cj):
            return cj * np.tanh(x)

        def jac(x, h, cj=cj):
            t = np.tanh(x)
            return jacobian_error * cj * (1 - t * t) * h

        vols.append(sig)
        jacs.append(jac)
    cmax = float(np.max(np.abs(c)))
    C = max(float(np.max(np.linalg.norm(c, axis=1))), cmax, cmax * _TANH2_MAX)
    k = np.arange(1, modes + 1, dtype=float)
    return SPDEModel(
        name="nemytskii_heat",
        semigroup=SpectralSemigroup(dirichlet_laplacian_eigenvalues(modes)),
        drift=zero_drift,
        vols=vols,
        vol_jacobians=jacs,
        bounds={"C": C},
        sampler=_spectral_sampler(modes, scale=2.0),
        params=dict(modes=modes, r=r, amplitude=amplitude, jacobian_error=jacobian_error, x0=1.0 / k),
    )


def _hjmm(**params):
    from .hjmm import HJMMParams, build_hjmm_model

    return build_hjmm_model(HJMMParams.from_dict(params))


BUILDERS = {
    "quantization": quantization,
    "cable": cable,
    "additive_heat": additive_heat,
    "geometric": geometric,
    "nemytskii_heat": nemytskii_heat,
    "hjmm": _hjmm,
}


def build_model(name: str, **params) -> SPDEModel:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ParameterError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {name}: {exc}") from None


def default_x0(model: SPDEModel) -> np.ndarray:
    return np.array(model.params["x0"], dtype=float)
