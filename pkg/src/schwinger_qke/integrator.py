"""Adaptive time integration of one momentum mode.

The stepping loop lives in a compiled extension (``_kernel``); when it is
not importable, or ``SCHWINGER_QKE_BACKEND=python`` is set, the identical
pure-Python loop in ``_pykernel`` is used instead.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _pykernel
from .config import PulseConfig, PulseModel
from .errors import ConstraintViolated, StepSizeUnderflow
from .fields import FIELD_SUPPORT, eval_eA
from .kinetics import MomentumMode, eps_max_estimate

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

__all__ = [
    "BACKENDS",
    "DEFAULT_BACKEND",
    "IntegratorSettings",
    "ModeResult",
    "evolve_mode",
    "estimate_cost",
    "default_max_step",
]

BACKENDS = {"python": _pykernel.evolve}
if _kernel is not None:
    BACKENDS["compiled"] = _kernel.evolve

_requested = os.environ.get("SCHWINGER_QKE_BACKEND", "").strip().lower()
if _requested in BACKENDS:
    DEFAULT_BACKEND = _requested
else:
    DEFAULT_BACKEND = "compiled" if _kernel is not None else "python"

_MODEL_CODE = {PulseModel.SINGLE_GAUSS: 0, PulseModel.BIFREQ_GAUSS: 1, PulseModel.AM_GAUSS: 2}

#: steps per half period of the fastest phase allowed by the default cap
STEPS_PER_HALF_PERIOD = 20


@dataclass(frozen=True)
class IntegratorSettings:
    """Numerical controls of :func:`evolve_mode`.

    ``max_step=None`` selects the per-mode cap
    pi / (20 (eps_max + omega_fast)), with eps_max the largest quasi-energy
    of the mode over a coarse time sample.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float | None = None
    window_halfwidth_factor: float = FIELD_SUPPORT
    trajectory_stride: int = 0
    drift_limit: float = 1e-6
    max_steps: int = 200_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.window_halfwidth_factor > 0:
            raise ValueError("window_halfwidth_factor must be positive")
        if self.trajectory_stride < 0:
            raise ValueError("trajectory_stride must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ModeResult:
    f_final: float
    constraint_drift: float
    n_steps: int
    n_rejected: int = 0
    state: tuple[float, float, float] = (0.0, 0.0, 1.0)
    eA_final: float = 0.0
    trajectory: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)


def default_max_step(mode: MomentumMode, config: PulseConfig, settings: IntegratorSettings) -> float:
    if settings.max_step is not None:
        return settings.max_step
    omega_fast = config.fastest_frequency if config.E0 != 0.0 else 0.0
    eps_max = eps_max_estimate(mode, config, settings.window_halfwidth_factor)
    return math.pi / (STEPS_PER_HALF_PERIOD * (eps_max + omega_fast))


def estimate_cost(mode: MomentumMode, config: PulseConfig, settings: IntegratorSettings | None = None) -> int:
    """Predicted number of accepted steps: window length over the step cap."""
    settings = settings or IntegratorSettings()
    t0, t1 = config.window(settings.window_halfwidth_factor)
    return int(math.ceil((t1 - t0) / default_max_step(mode, config, settings)))


_EA0_CACHE: dict = {}


def _initial_potential(config: PulseConfig, t0: float) -> float:
    key = (config, t0)
    value = _EA0_CACHE.get(key)
    if value is None:
        value = float(eval_eA(config, t0))
        if len(_EA0_CACHE) > 256:
            _EA0_CACHE.clear()
        _EA0_CACHE[key] = value
    return value


def evolve_mode(mode: MomentumMode, config: PulseConfig, settings: IntegratorSettings | None = None,
                backend: str | None = None) -> ModeResult:
    """Integrate (u, v, w) from the vacuum at -T to +T and read off f.

    T is ``window_halfwidth_factor`` envelope widths. Uses Dormand-Prince
    5(4) with PI step control; the residual occupation is
    f = (1 - w)/2, evaluated as (u^2 + v^2) / (2 (1 + w)) while w > 0.

    Raises
    ------
    StepSizeUnderflow
        The step size collapsed or the step budget ran out.
    ConstraintViolated
        max |u^2 + v^2 + w^2 - 1| exceeded ``settings.drift_limit``.
    """
    settings = settings or IntegratorSettings()
    kernel = BACKENDS[backend or DEFAULT_BACKEND]
    t0, t1 = config.window(settings.window_halfwidth_factor)
    max_step = default_max_step(mode, config, settings)
    eA0 = _initial_potential(config, t0)
    out = kernel(
        _MODEL_CODE[config.model], config.E0, config.omega, config.omega2, config.tau,
        config.kE, config.phi, FIELD_SUPPORT * config.tau,
        float(mode.p_par), float(mode.p_perp), t0, t1, eA0,
        settings.rel_tol, settings.abs_tol, max_step, 0.1 * max_step,
        settings.trajectory_stride, settings.max_steps,
    )
    status, f, u, v, w, eA_end, drift, n_acc, n_rej, traj_t, traj_f = out
    if status == 1:
        raise StepSizeUnderflow(f"step size underflow for {mode} after {n_acc} steps")
    if status == 2:
        raise StepSizeUnderflow(f"step budget of {settings.max_steps} exhausted for {mode}")
    if drift > settings.drift_limit:
        raise ConstraintViolated(f"constraint drift {drift:.3g} exceeds {settings.drift_limit:.3g} for {mode}")
    trajectory = (traj_t, traj_f) if settings.trajectory_stride > 0 else None
    return ModeResult(
        f_final=float(f),
        constraint_drift=float(drift),
        n_steps=int(n_acc),
        n_rejected=int(n_rej),
        state=(float(u), float(v), float(w)),
        eA_final=float(eA_end),
        trajectory=trajectory,
    )
