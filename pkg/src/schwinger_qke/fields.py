"""Electric field E(t) and coupled potential eA(t) of the pulse families.

Fields are in units of E_c and potentials are stored pre-multiplied by the
coupling, eA in units of m, so that P = p_par - eA needs no conversion.

The closed-form potentials of the Gaussian-envelope carriers involve
exp(-y^2) Re erf(x + iy) with y = omega tau / sqrt(2) up to a few hundred.
The two factors under- and overflow separately for y beyond ~26, so the
product is evaluated through the Faddeeva function w(z) = exp(-z^2) erfc(-iz)
(``scipy.special.wofz``), which is bounded in the upper half plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .config import PulseConfig, PulseModel
from .errors import DomainNotSupported, QuadratureNotConverged

__all__ = [
    "FIELD_SUPPORT",
    "FieldSample",
    "eval_E",
    "eval_eA",
    "sample",
    "scaled_erf",
    "scaled_erf_product",
    "max_abs_eA",
]

#: E(t) is set to zero for |t| > FIELD_SUPPORT * tau (envelope below e^-32).
FIELD_SUPPORT = 8.0

#: Largest imaginary part accepted by :func:`scaled_erf`; checked against a
#: 30-digit reference in the test suite.
SCALED_ERF_YMAX = 1000.0

_SQRT2 = math.sqrt(2.0)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class FieldSample:
    t: float
    E: float
    eA: float


def scaled_erf(x, y):
    """Complex exp(-y^2) * erf(x + iy) without forming either factor.

    For x >= 0, erf(z) = 1 - exp(-z^2) w(iz) gives

        exp(-y^2) erf(x + iy) = exp(-y^2) - exp(-x^2 - 2ixy) w(-y + ix),

    where w is evaluated in the closed upper half plane. Negative x uses
    erf(-z) = -erf(z) together with erf(conj z) = conj erf(z).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > SCALED_ERF_YMAX):
        raise DomainNotSupported(f"|y| > {SCALED_ERF_YMAX} is outside the validated range")
    ax = np.abs(x)
    value = np.exp(-y * y) - np.exp(-ax * ax - 2j * ax * y) * special.wofz(-y + 1j * ax)
    value = np.where(x < 0, -np.conj(value), value)
    return value[()] if value.ndim == 0 else value


def scaled_erf_product(x, y):
    """exp(-y^2) * Re erf(x + iy), odd in x and even in y."""
    return np.real(scaled_erf(x, y))


def _gauss_carrier_eA(t, amplitude, omega, tau, phi=0.0):
    # eA of amplitude*cos(omega t + phi)*exp(-t^2/2tau^2):
    # -sqrt(pi/2) amplitude tau Re[exp(i phi) exp(-y^2) erf(x - iy)]
    x = np.asarray(t, dtype=float) / (_SQRT2 * tau)
    y = omega * tau / _SQRT2
    if phi == 0.0:
        core = scaled_erf_product(x, y)
    else:
        core = np.real(np.exp(1j * phi) * np.conj(scaled_erf(x, y)))
    return -_SQRT_HALF_PI * amplitude * tau * core


def eval_E(config: PulseConfig, t):
    """Electric field in units of E_c; scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    tau = config.tau
    env = np.exp(-t * t / (2.0 * tau * tau))
    if config.model is PulseModel.SINGLE_GAUSS:
        carrier = np.cos(config.omega * t + config.phi)
    elif config.model is PulseModel.BIFREQ_GAUSS:
        carrier = np.cos(config.omega * t) + config.kE * np.cos(config.omega2 * t)
    else:
        carrier = 1.0 + config.kE * np.cos(config.omega2 * t)
    value = np.where(np.abs(t) > FIELD_SUPPORT * tau, 0.0, config.E0 * carrier * env)
    return value[()] if value.ndim == 0 else value


def eval_eA(config: PulseConfig, t):
    """Coupled potential eA(t) in units of m, with E = -d(A)/dt.

    Gaussian carriers use the closed forms (odd in t for phi = 0). The
    amplitude-modulated pulse has a non-oscillating component; it is
    evaluated as -int_0^t eE dt' by adaptive quadrature, which fixes the
    gauge so that eA is odd in t as well.
    """
    if config.model is PulseModel.SINGLE_GAUSS:
        return _gauss_carrier_eA(t, config.E0, config.omega, config.tau, config.phi)
    if config.model is PulseModel.BIFREQ_GAUSS:
        value = _gauss_carrier_eA(t, config.E0, config.omega, config.tau)
        if config.kE != 0.0:
            value = value + _gauss_carrier_eA(t, config.kE * config.E0, config.omega2, config.tau)
        return value
    t_arr = np.asarray(t, dtype=float)
    value = _am_eA(config, t_arr.ravel()).reshape(t_arr.shape)
    return value[()] if value.ndim == 0 else value


def _am_eA(config: PulseConfig, t: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    out = np.zeros(t.shape)
    if config.E0 == 0.0 or t.size == 0:
        return out
    E0, kE, w2, tau = config.E0, config.kE, config.omega2, config.tau
    support = FIELD_SUPPORT * tau

    def field(s):
        return E0 * (1.0 + kE * math.cos(w2 * s)) * math.exp(-s * s / (2.0 * tau * tau))

    # cumulative integral over the sorted |t| nodes; segments longer than a
    # modulation period are split so each adaptive call sees few oscillations
    period = 2.0 * math.pi / w2 if kE != 0.0 else tau
    abs_t = np.minimum(np.abs(t), support)
    order = np.argsort(abs_t, kind="stable")
    running, prev = 0.0, 0.0
    for idx in order:
        cur = float(abs_t[idx])
        if cur > prev:
            n_panels = int(math.ceil((cur - prev) / period))
            edges = np.linspace(prev, cur, n_panels + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                running += _quad(field, float(a), float(b), rtol)
            prev = cur
        out[idx] = -math.copysign(running, t[idx]) if t[idx] != 0.0 else 0.0
    return out


def _quad(func, a, b, rtol):
    result = integrate.quad(func, a, b, epsabs=1e-300, epsrel=rtol, limit=200, full_output=1)
    value, err = result[0], result[1]
    # a fourth element is the warning message of a non-converged call
    if len(result) > 3 and err > 1e3 * rtol * max(abs(value), 1e-300):
        raise QuadratureNotConverged(
            f"potential quadrature on [{a:.6g}, {b:.6g}] did not converge (err={err:.3g})"
        )
    return value


def sample(config: PulseConfig, t: float) -> FieldSample:
    return FieldSample(float(t), float(eval_E(config, t)), float(eval_eA(config, t)))


@lru_cache(maxsize=256)
def max_abs_eA(config: PulseConfig, n_samples: int = 4001) -> float:
    """Largest |eA| over the field support, by dense sampling."""
    lo, hi = config.window(FIELD_SUPPORT)
    t = np.linspace(lo, hi, n_samples)
    return float(np.max(np.abs(eval_eA(config, t))))
