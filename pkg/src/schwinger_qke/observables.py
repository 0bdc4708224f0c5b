"""Momentum grids, residual distributions and derived pair observables.

The residual density is the cylindrical integral

    n = 2 int d^3p / (2 pi)^3 f = 1/(2 pi^2) int dp_par int dp_perp p_perp f,

discretised with the trapezoidal rule on a rectangular (p_par, p_perp) grid.
Mode solves are independent and are farmed out to worker processes;
results are always reduced in node order, so the numbers do not depend on
the worker count.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .config import PulseConfig
from .errors import DivisionByZeroBaseline, GridMismatch, ModeFailure, NumericalError
from .fields import max_abs_eA
from .integrator import IntegratorSettings, estimate_cost, evolve_mode
from .kinetics import MomentumMode

__all__ = [
    "MomentumGrid",
    "SliceAxis",
    "DistributionSlice",
    "DensityEstimate",
    "ScanResult",
    "default_grid",
    "solve_modes",
    "residual_distribution",
    "momentum_slice",
    "slice_peak",
    "pair_density",
    "density_with_diagnostics",
    "pairs_per_volume",
    "enhancement_ratio",
    "net_efficiency",
]

DENSITY_PREFACTOR = 1.0 / (2.0 * math.pi ** 2)


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.zeros_like(nodes)
    d = np.diff(nodes)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


@dataclass(frozen=True)
class MomentumGrid:
    """Tensor grid in (p_par, p_perp) with trapezoidal weights, units of m."""

    p_par_min: float
    p_par_max: float
    n_par: int
    p_perp_max: float
    n_perp: int

    def __post_init__(self):
        if self.n_par < 2 or self.n_perp < 2:
            raise ValueError("a momentum grid needs at least two nodes per axis")
        if not self.p_par_max > self.p_par_min:
            raise ValueError("p_par_max must exceed p_par_min")
        if not self.p_perp_max > 0.0:
            raise ValueError("p_perp_max must be positive")

    @classmethod
    def symmetric(cls, p_par_half: float, n_par: int, p_perp_max: float, n_perp: int) -> "MomentumGrid":
        return cls(-p_par_half, p_par_half, n_par, p_perp_max, n_perp)

    @property
    def p_par(self) -> np.ndarray:
        return np.linspace(self.p_par_min, self.p_par_max, self.n_par)

    @property
    def p_perp(self) -> np.ndarray:
        return np.linspace(0.0, self.p_perp_max, self.n_perp)

    @property
    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        return _trapezoid_weights(self.p_par), _trapezoid_weights(self.p_perp)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_par, self.n_perp

    def nodes(self) -> list[tuple[float, float]]:
        """Row-major (p_par outer, p_perp inner) node list."""
        return [(float(a), float(b)) for a in self.p_par for b in self.p_perp]

    def coarsened(self) -> "MomentumGrid":
        """Every second node; requires odd node counts."""
        if self.n_par % 2 == 0 or self.n_perp % 2 == 0:
            raise ValueError("coarsening needs odd node counts")
        return replace(self, n_par=(self.n_par + 1) // 2, n_perp=(self.n_perp + 1) // 2)

    def to_dict(self) -> dict:
        return {
            "p_par_min": self.p_par_min,
            "p_par_max": self.p_par_max,
            "n_par": self.n_par,
            "p_perp_max": self.p_perp_max,
            "n_perp": self.n_perp,
        }


def default_grid(config: PulseConfig, n_par: int = 512, n_perp: int = 128,
                 p_perp_max: float = 3.0, margin: float = 4.0) -> MomentumGrid:
    """Grid covering the potential excursion: p_par in +-(max|eA| + margin)."""
    half = max_abs_eA(config) + margin
    return MomentumGrid.symmetric(half, n_par, p_perp_max, n_perp)


class SliceAxis(str, enum.Enum):
    P_PAR_AT_PPERP0 = "p_par_at_pperp0"
    P_PERP_AT_PPAR0 = "p_perp_at_ppar0"
    FULL_2D = "full2D"


@dataclass(frozen=True)
class DistributionSlice:
    """Residual occupations on a line or a full grid.

    For ``FULL_2D`` ``f`` has shape (len(p_par), len(p_perp)); for the 1-D
    axes it is flat along the varying coordinate.
    """

    axis: SliceAxis
    p_par: np.ndarray
    p_perp: np.ndarray
    f: np.ndarray
    n_steps: np.ndarray = field(default=None, compare=False)
    drift: np.ndarray = field(default=None, compare=False)

    def values(self):
        """Iterate ``((p_par, p_perp), f)`` in row-major node order."""
        if self.axis is SliceAxis.FULL_2D:
            for i, a in enumerate(self.p_par):
                for j, b in enumerate(self.p_perp):
                    yield (float(a), float(b)), float(self.f[i, j])
        elif self.axis is SliceAxis.P_PAR_AT_PPERP0:
            for a, value in zip(self.p_par, self.f):
                yield (float(a), 0.0), float(value)
        else:
            for b, value in zip(self.p_perp, self.f):
                yield (0.0, float(b)), float(value)

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift)) if self.drift is not None and self.drift.size else 0.0


# -- parallel mode solves -----------------------------------------------------

def _solve_chunk(args):
    config, settings, nodes = args
    out = []
    for p_par, p_perp in nodes:
        try:
            result = evolve_mode(MomentumMode(p_par, p_perp), config, settings)
        except NumericalError as exc:
            out.append(("error", repr(exc), type(exc).__name__))
        else:
            out.append(("ok", result.f_final, result.n_steps, result.constraint_drift))
    return out


def _resolve_workers(workers: int | None) -> int:
    if workers is None or workers <= 0:
        return os.cpu_count() or 1
    return workers


def solve_modes(tasks, settings: IntegratorSettings | None = None, workers: int | None = 1,
                raise_on_error: bool = True):
    """Solve a batch of ``(config, p_par, p_perp)`` tasks.

    Returns arrays ``(f, n_steps, drift, errors)`` in task order; ``errors``
    maps task index to a message. Work is split into chunks balanced by
    :func:`estimate_cost` (largest first), but the output order is the input
    order regardless of scheduling.
    """
    settings = settings or IntegratorSettings()
    tasks = list(tasks)
    n = len(tasks)
    f = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    drift = np.zeros(n)
    errors: dict[int, str] = {}
    if n == 0:
        return f, steps, drift, errors
    workers = _resolve_workers(workers)

    # group by config so each chunk ships a single config
    by_config: dict[PulseConfig, list[int]] = {}
    for idx, (config, _, _) in enumerate(tasks):
        by_config.setdefault(config, []).append(idx)

    chunks = []
    n_chunks_target = max(1, 8 * workers) if workers > 1 else 1
    for config, indices in by_config.items():
        if workers > 1:
            costs = [estimate_cost(MomentumMode(tasks[i][1], tasks[i][2]), config, settings) for i in indices]
            order = [indices[k] for k in np.argsort(costs, kind="stable")[::-1]]
            size = max(1, int(math.ceil(len(order) / n_chunks_target)))
        else:
            order = indices
            size = len(order)
        for start in range(0, len(order), size):
            part = order[start:start + size]
            chunks.append((part, (config, settings, [(tasks[i][1], tasks[i][2]) for i in part])))

    if workers == 1:
        outputs = [_solve_chunk(payload) for _, payload in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_solve_chunk, [payload for _, payload in chunks]))

    for (part, _), results in zip(chunks, outputs):
        for idx, item in zip(part, results):
            if item[0] == "ok":
                f[idx], steps[idx], drift[idx] = item[1], item[2], item[3]
            else:
                f[idx] = np.nan
                errors[idx] = item[1]

    if errors and raise_on_error:
        idx = min(errors)
        _, p_par, p_perp = tasks[idx]
        raise ModeFailure(p_par, p_perp, NumericalError(errors[idx]))
    return f, steps, drift, errors


def residual_distribution(config: PulseConfig, grid: MomentumGrid, settings: IntegratorSettings | None = None,
                          workers: int | None = 1) -> DistributionSlice:
    """Residual f on every grid node (row-major over p_par, p_perp)."""
    nodes = grid.nodes()
    f, steps, drift, _ = solve_modes([(config, a, b) for a, b in nodes], settings, workers)
    return DistributionSlice(
        SliceAxis.FULL_2D, grid.p_par, grid.p_perp,
        f.reshape(grid.shape), steps.reshape(grid.shape), drift.reshape(grid.shape),
    )


def momentum_slice(config: PulseConfig, axis: SliceAxis | str, coords, settings: IntegratorSettings | None = None,
                   workers: int | None = 1) -> DistributionSlice:
    """1-D residual distribution along p_par (p_perp = 0) or p_perp (p_par = 0)."""
    axis = SliceAxis(axis)
    coords = np.asarray(coords, dtype=float)
    if axis is SliceAxis.P_PAR_AT_PPERP0:
        tasks = [(config, float(c), 0.0) for c in coords]
        p_par, p_perp = coords, np.zeros(1)
    elif axis is SliceAxis.P_PERP_AT_PPAR0:
        tasks = [(config, 0.0, float(c)) for c in coords]
        p_par, p_perp = np.zeros(1), coords
    else:
        raise ValueError("use residual_distribution for the full grid")
    f, steps, drift, _ = solve_modes(tasks, settings, workers)
    return DistributionSlice(axis, p_par, p_perp, f, steps, drift)


def slice_peak(config: PulseConfig, p_lo: float, p_hi: float, n_coarse: int = 561, fine_halfwidth: float = 0.5,
               fine_step: float = 0.004, settings: IntegratorSettings | None = None,
               workers: int | None = 1, refine: int = 3) -> tuple[float, float]:
    """Maximum of f along p_par at p_perp = 0, as ``(p_par, f_max)``.

    A coarse scan locates the envelope maximum, a fine scan around it
    resolves the interference ripples, and bounded scalar maximisation
    polishes the ``refine`` largest fine-scan local maxima.
    """
    settings = settings or IntegratorSettings()
    coarse = np.linspace(p_lo, p_hi, n_coarse)
    f_coarse = momentum_slice(config, SliceAxis.P_PAR_AT_PPERP0, coarse, settings, workers).f
    center = float(coarse[int(np.argmax(f_coarse))])
    lo, hi = max(p_lo, center - fine_halfwidth), min(p_hi, center + fine_halfwidth)
    fine = np.arange(lo, hi + 0.5 * fine_step, fine_step)
    f_fine = momentum_slice(config, SliceAxis.P_PAR_AT_PPERP0, fine, settings, workers).f

    best_p, best_f = center, float(np.max(f_coarse))
    i_best = int(np.argmax(f_fine))
    if f_fine[i_best] > best_f:
        best_p, best_f = float(fine[i_best]), float(f_fine[i_best])
    interior = np.arange(1, len(fine) - 1)
    peaks = interior[(f_fine[interior] >= f_fine[interior - 1]) & (f_fine[interior] >= f_fine[interior + 1])]
    peaks = peaks[np.argsort(f_fine[peaks], kind="stable")[::-1][:refine]]

    def negative_f(p):
        return -evolve_mode(MomentumMode(float(p), 0.0), config, settings).f_final

    for k in peaks:
        res = optimize.minimize_scalar(
            negative_f, bounds=(fine[k - 1], fine[k + 1]), method="bounded",
            options={"xatol": fine_step * 1e-3},
        )
        if -res.fun > best_f:
            best_p, best_f = float(res.x), float(-res.fun)
    return best_p, best_f


# -- densities ----------------------------------------------------------------

def pair_density(dist: DistributionSlice, grid: MomentumGrid) -> float:
    """Residual density n = 1/(2 pi^2) int dp_par int dp_perp p_perp f, units m^3."""
    if dist.axis is not SliceAxis.FULL_2D:
        raise GridMismatch("pair_density needs a full 2-D distribution")
    f = np.asarray(dist.f, dtype=float)
    if f.shape != grid.shape:
        raise GridMismatch(f"distribution shape {f.shape} does not match grid {grid.shape}")
    if not (np.allclose(dist.p_par, grid.p_par) and np.allclose(dist.p_perp, grid.p_perp)):
        raise GridMismatch("distribution nodes differ from the grid nodes")
    return _trapezoid_density(f, grid)


def _trapezoid_density(f, grid):
    w_par, w_perp = grid.weights
    # fixed summation order: p_perp inner, then p_par
    inner = f @ (w_perp * grid.p_perp)
    return float(DENSITY_PREFACTOR * np.dot(w_par, inner))


@dataclass(frozen=True)
class DensityEstimate:
    """Density with cheap convergence diagnostics.

    ``resolution_delta``: relative change against the same grid with every
    second node dropped. ``edge_fraction``: share of the integrand carried
    by the outer p_par columns and the last p_perp row, a box-truncation
    indicator. ``box_delta`` is only filled by an explicit box-doubling run.
    """

    n: float
    resolution_delta: float
    edge_fraction: float
    max_drift: float
    box_delta: float | None = None

    def converged(self, tol: float = 0.02) -> bool:
        checks = [self.resolution_delta, self.edge_fraction]
        if self.box_delta is not None:
            checks.append(self.box_delta)
        return all(c <= tol for c in checks)

    def flags(self, tol: float = 0.02) -> str:
        out = []
        if self.resolution_delta > tol:
            out.append("resolution")
        if self.edge_fraction > tol:
            out.append("box")
        if self.box_delta is not None and self.box_delta > tol:
            out.append("box_doubling")
        return "|".join(out) if out else "ok"


def density_with_diagnostics(dist: DistributionSlice, grid: MomentumGrid) -> DensityEstimate:
    n = pair_density(dist, grid)
    f = np.asarray(dist.f)
    delta = math.nan
    if grid.n_par % 2 == 1 and grid.n_perp % 2 == 1:
        n_half = _trapezoid_density(f[::2, ::2], grid.coarsened())
        delta = abs(n - n_half) / n if n > 0 else 0.0
    integrand = f * grid.p_perp[None, :]
    total = float(np.sum(np.abs(integrand)))
    edge = float(np.sum(np.abs(integrand[0, :])) + np.sum(np.abs(integrand[-1, :]))
                 + np.sum(np.abs(integrand[1:-1, -1])))
    edge_fraction = edge / total if total > 0 else 0.0
    return DensityEstimate(n, delta, edge_fraction, dist.max_drift)


def pairs_per_volume(n: float, omega: float) -> float:
    """Dimensionless pair number N = n / omega^3."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return n / omega ** 3


def enhancement_ratio(n_combined: float, n_strong_only: float) -> float:
    """r = n_{1+2} / n_1."""
    if not n_strong_only > 0:
        raise DivisionByZeroBaseline("strong-field baseline density must be positive")
    return n_combined / n_strong_only


def net_efficiency(n_combined: float, n_strong_only: float, n_weak_only: float) -> float:
    """n_{1+2} / (n_1 + n_2)."""
    denominator = n_strong_only + n_weak_only
    if not denominator > 0:
        raise DivisionByZeroBaseline("n_1 + n_2 must be positive")
    return n_combined / denominator


@dataclass(frozen=True)
class ScanResult:
    """One parameter point of a sweep."""

    coordinate: float
    n: float
    N: float
    r: float
    net_eff: float
    n_strong: float = math.nan
    n_weak: float = math.nan
    flags: str = "ok"
