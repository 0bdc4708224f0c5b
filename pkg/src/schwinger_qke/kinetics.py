"""Per-mode kinematics and reference solvers of the kinetic equation.

Modes labelled by (p_par, p_perp) decouple. For each mode the residual
occupation f follows either from the (u, v, w) system (see
:mod:`schwinger_qke.integrator`), from the low-density quadrature
:func:`lowdensity_residual`, or from direct time stepping of the
non-Markovian equation with its memory integral, :func:`solve_ke_direct`.
The last two exist as independent cross-checks of the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .config import PulseConfig
from .errors import GridTooCoarse, QuadratureNotConverged
from .fields import FIELD_SUPPORT, eval_E, eval_eA

__all__ = [
    "MomentumMode",
    "ModeState",
    "VACUUM",
    "eps_perp",
    "long_momentum",
    "quasi_energy",
    "lambda_amp",
    "dynamical_phase",
    "rhs",
    "occupation",
    "eps_max_estimate",
    "lowdensity_residual",
    "DirectSolution",
    "solve_ke_direct",
]


@dataclass(frozen=True)
class MomentumMode:
    p_par: float = 0.0
    p_perp: float = 0.0

    def __post_init__(self):
        if not self.p_perp >= 0.0:
            raise ValueError(f"p_perp is a modulus and must be >= 0, got {self.p_perp!r}")


@dataclass(frozen=True)
class ModeState:
    u: float
    v: float
    w: float

    @property
    def f(self) -> float:
        return occupation(self)

    @property
    def norm_deviation(self) -> float:
        return abs(self.u * self.u + self.v * self.v + self.w * self.w - 1.0)


VACUUM = ModeState(0.0, 0.0, 1.0)


def eps_perp(p_perp):
    """Transverse energy sqrt(m^2 + p_perp^2)."""
    return np.sqrt(1.0 + np.square(p_perp))


def long_momentum(p_par, eA):
    """Kinetic longitudinal momentum P = p_par - eA."""
    return p_par - eA


def quasi_energy(mode: MomentumMode, eA):
    P = long_momentum(mode.p_par, eA)
    return np.sqrt(1.0 + mode.p_perp * mode.p_perp + P * P)


def lambda_amp(mode: MomentumMode, E, eA):
    """Vacuum transition amplitude eE eps_perp / eps^2 (E in units of E_c)."""
    eps = quasi_energy(mode, eA)
    return E * eps_perp(mode.p_perp) / (eps * eps)


def _epsilon_at(mode, config, t):
    return quasi_energy(mode, eval_eA(config, t))


def dynamical_phase(mode: MomentumMode, config: PulseConfig, t_from: float, t_to: float,
                    rtol: float = 1e-9) -> float:
    """theta(t_to, t_from) = 2 int eps dt by adaptive quadrature.

    The interval is split at the carrier period of the potential so the
    adaptive rule sees a smooth integrand on every piece.
    """
    if t_from > t_to:
        raise ValueError("dynamical_phase requires t_from <= t_to")
    if t_from == t_to:
        return 0.0
    period = 2.0 * math.pi / max(config.fastest_frequency, 1.0 / config.tau)
    n_pieces = max(1, int(math.ceil((t_to - t_from) / period)))
    edges = np.linspace(t_from, t_to, n_pieces + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = integrate.quad(
            lambda s: float(_epsilon_at(mode, config, s)), a, b, epsabs=0.0, epsrel=rtol * 0.1, limit=200
        )
        if err > rtol * abs(value):
            raise QuadratureNotConverged(f"phase integral on [{a:.6g}, {b:.6g}] err={err:.3g}")
        total += value
    return 2.0 * total


def rhs(state: ModeState, t: float, mode: MomentumMode, config: PulseConfig):
    """Time derivative (du, dv, dw) of the auxiliary system.

    du = lam w - 2 eps v, dv = 2 eps u, dw = -lam u; on w > 0 this is the
    two-variable form with w = sqrt(1 - u^2 - v^2), and df = lam u / 2.
    """
    E = float(eval_E(config, t))
    eA = float(eval_eA(config, t))
    eps = float(quasi_energy(mode, eA))
    lam = float(lambda_amp(mode, E, eA))
    return (
        lam * state.w - 2.0 * eps * state.v,
        2.0 * eps * state.u,
        -lam * state.u,
    )


def occupation(state: ModeState) -> float:
    return 0.5 * (1.0 - state.w)


def eps_max_estimate(mode: MomentumMode, config: PulseConfig, halfwidth_factor: float = FIELD_SUPPORT,
                     n_samples: int = 2001) -> float:
    """Largest quasi-energy of ``mode`` over a coarse time sample of the window."""
    eA = _eA_samples(config, halfwidth_factor, n_samples)
    P = mode.p_par - eA
    return float(np.sqrt(1.0 + mode.p_perp ** 2 + np.max(P * P)))


_EA_SAMPLE_CACHE: dict = {}


def _eA_samples(config, halfwidth_factor, n_samples):
    key = (config, halfwidth_factor, n_samples)
    cached = _EA_SAMPLE_CACHE.get(key)
    if cached is None:
        lo, hi = config.window(halfwidth_factor)
        # odd count keeps t = 0 and both window edges in the sample
        cached = eval_eA(config, np.linspace(lo, hi, n_samples))
        if len(_EA_SAMPLE_CACHE) > 128:
            _EA_SAMPLE_CACHE.clear()
        _EA_SAMPLE_CACHE[key] = cached
    return cached


# -- low-density quadrature ---------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _phase_grid(mode, config, edges):
    """Phase 2 int_0^t eps at panel edges and Gauss nodes, plus the node times.

    Panel increments use the 10-point rule; node phases integrate from the
    left panel edge with a rule mapped onto [a, t_node].
    """
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    half = 0.5 * (b - a)
    nodes = a + half * (1.0 + _GL_NODES[None, :])

    eps_nodes = np.asarray(_epsilon_at(mode, config, nodes))
    increments = 2.0 * np.sum(half * _GL_WEIGHTS[None, :] * eps_nodes, axis=1)
    theta_edges = np.concatenate([[0.0], np.cumsum(increments)])

    # sub-rule for [a, node_j]
    sub_half = 0.5 * (nodes - a)
    sub_nodes = a[:, :, None] + sub_half[:, :, None] * (1.0 + _GL_NODES[None, None, :])
    eps_sub = np.asarray(_epsilon_at(mode, config, sub_nodes))
    partial = 2.0 * np.sum(sub_half[:, :, None] * _GL_WEIGHTS[None, None, :] * eps_sub, axis=2)
    theta_nodes = theta_edges[:-1][:, None] + partial
    return nodes, half, theta_nodes, theta_edges


def _lowdensity_amplitude(mode, config, t0, t1, n_panels):
    edges = np.linspace(t0, t1, n_panels + 1)
    nodes, half, theta_nodes, theta_edges = _phase_grid(mode, config, edges)
    # reference the phase to t = 0 (an edge, since n_panels is even and the
    # window symmetric); any constant drops out of the modulus
    theta_ref = np.interp(0.0, edges, theta_edges) if t0 < 0.0 < t1 else 0.0
    E = np.asarray(eval_E(config, nodes))
    eA = np.asarray(eval_eA(config, nodes))
    lam = np.asarray(lambda_amp(mode, E, eA))
    weights = half * _GL_WEIGHTS[None, :]
    integrand = lam * np.exp(1j * (theta_nodes - theta_ref))
    return complex(np.sum(weights * integrand)), float(np.sum(weights * np.abs(lam)))


def lowdensity_residual(mode: MomentumMode, config: PulseConfig, window: tuple[float, float] | None = None,
                        tol: float = 1e-6, max_refinements: int = 8) -> float:
    """Residual occupation in the low-density limit w -> 1.

    f = |int dt lam(t) exp(i Theta(t))|^2 / 4 with Theta = 2 int_0^t eps,
    which is the double-time cosine kernel of the kinetic equation written
    as a squared modulus. Composite 10-point Gauss-Legendre panels are
    halved until two successive amplitudes agree to ``tol`` (or to the
    rounding floor set by int |lam|).
    """
    t0, t1 = window if window is not None else config.window(FIELD_SUPPORT)
    if config.E0 == 0.0:
        return 0.0
    eps_max = eps_max_estimate(mode, config)
    panel = min(math.pi / eps_max, 2.0 * math.pi / max(config.fastest_frequency, 1e-300))
    n_panels = 2 * max(1, int(math.ceil((t1 - t0) / panel / 2.0)))

    previous, _ = _lowdensity_amplitude(mode, config, t0, t1, n_panels)
    for _ in range(max_refinements):
        n_panels *= 2
        current, scale = _lowdensity_amplitude(mode, config, t0, t1, n_panels)
        delta = abs(current - previous)
        if delta <= tol * abs(current) or delta <= 1e-15 * scale * math.sqrt(n_panels):
            return 0.25 * abs(current) ** 2
        previous = current
    raise QuadratureNotConverged(
        f"low-density amplitude not converged after {max_refinements} refinements "
        f"(last change {delta:.3g}, value {abs(current):.3g})"
    )


# -- direct memory-integral solver ------------------------------------------

@dataclass(frozen=True)
class DirectSolution:
    t: np.ndarray
    f: np.ndarray

    @property
    def f_final(self) -> float:
        return float(self.f[-1])


def solve_ke_direct(mode: MomentumMode, config: PulseConfig, step: float | None = None,
                    window: tuple[float, float] | None = None) -> DirectSolution:
    """Time-step the kinetic equation with its memory integral.

    df/dt = (lam/2) int_{t0}^t lam(t') w(t') cos theta(t, t') dt', i.e.
    dw/dt = -lam int ..., on a uniform grid, with the trapezoidal rule for both the memory integral
    and the outer time step (the implicit end-point term is linear in the
    new w and solved exactly). Cost is quadratic in the number of steps;
    this is a reference implementation.

    The unknown carried is 1 - w = 2f, which keeps small occupations free
    of cancellation against 1.
    """
    t0, t1 = window if window is not None else config.window(FIELD_SUPPORT)
    eps_max = eps_max_estimate(mode, config)
    fastest = max(2.0 * eps_max, config.fastest_frequency)
    limit = math.pi / (10.0 * fastest)
    if step is None:
        step = 0.25 * limit
    if step > limit:
        raise GridTooCoarse(f"step {step:.4g} exceeds pi/(10 max(2 eps, omega_fast)) = {limit:.4g}")

    n = int(math.ceil((t1 - t0) / step))
    t = np.linspace(t0, t1, n + 1)
    h = (t1 - t0) / n

    # accurate phases: 10-point rule on every grid cell
    cell_nodes = t[:-1, None] + 0.5 * h * (1.0 + _GL_NODES[None, :])
    eps_cells = np.asarray(_epsilon_at(mode, config, cell_nodes))
    theta = np.concatenate([[0.0], np.cumsum(h * np.sum(_GL_WEIGHTS * eps_cells, axis=1))])

    lam = np.asarray(lambda_amp(mode, eval_E(config, t), eval_eA(config, t)))

    g = np.zeros(n + 1)  # g = 1 - w = 2f
    deriv = 0.0  # dg/dt at the current node
    for i in range(n):
        weight = np.full(i + 1, h)
        weight[0] = 0.5 * h
        memory = np.sum(weight * lam[: i + 1] * (1.0 - g[: i + 1]) * np.cos(theta[i + 1] - theta[: i + 1]))
        kappa = (0.5 * h * lam[i + 1]) ** 2
        g[i + 1] = (g[i] + 0.5 * h * deriv + 0.5 * h * lam[i + 1] * memory + kappa) / (1.0 + kappa)
        deriv = lam[i + 1] * (memory + 0.5 * h * lam[i + 1] * (1.0 - g[i + 1]))
    return DirectSolution(t, 0.5 * g)
