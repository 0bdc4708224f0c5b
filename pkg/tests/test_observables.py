import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwinger_qke.config import PulseConfig
from schwinger_qke.errors import DivisionByZeroBaseline, GridMismatch, ModeFailure
from schwinger_qke.integrator import IntegratorSettings, evolve_mode
from schwinger_qke.kinetics import MomentumMode
from schwinger_qke.observables import (
    DistributionSlice,
    MomentumGrid,
    SliceAxis,
    default_grid,
    density_with_diagnostics,
    enhancement_ratio,
    momentum_slice,
    net_efficiency,
    pair_density,
    pairs_per_volume,
    residual_distribution,
    slice_peak,
)

CHEAP = PulseConfig("single", E0=0.1, omega=2.5, sigma=5.0)


def synthetic(grid, func):
    P, Q = np.meshgrid(grid.p_par, grid.p_perp, indexing="ij")
    return DistributionSlice(SliceAxis.FULL_2D, grid.p_par, grid.p_perp, func(P, Q))


def test_grid_contract():
    grid = MomentumGrid.symmetric(2.0, 5, 1.0, 3)
    assert grid.p_perp[0] == 0.0
    w_par, w_perp = grid.weights
    assert w_par.sum() == pytest.approx(4.0)
    assert w_perp.sum() == pytest.approx(1.0)
    assert len(grid.nodes()) == 15
    with pytest.raises(ValueError):
        MomentumGrid.symmetric(1.0, 1, 1.0, 3)
    with pytest.raises(ValueError):
        MomentumGrid(1.0, -1.0, 5, 1.0, 5)


def test_density_of_zero():
    grid = MomentumGrid.symmetric(2.0, 9, 1.0, 5)
    assert pair_density(synthetic(grid, lambda p, q: 0 * p), grid) == 0.0


def test_density_of_constant_box():
    a, b, f0 = 1.5, 0.8, 0.3
    grid = MomentumGrid.symmetric(a, 7, b, 4)
    n = pair_density(synthetic(grid, lambda p, q: f0 + 0 * p), grid)
    assert n == pytest.approx(f0 * a * b ** 2 / (2 * math.pi ** 2), rel=1e-14)


def test_density_of_gaussian():
    grid = MomentumGrid.symmetric(8.0, 401, 8.0, 201)
    n = pair_density(synthetic(grid, lambda p, q: np.exp(-p ** 2 - q ** 2)), grid)
    exact = math.sqrt(math.pi) / (4 * math.pi ** 2)
    fine = MomentumGrid.symmetric(8.0, 1601, 8.0, 801)
    reference = pair_density(synthetic(fine, lambda p, q: np.exp(-p ** 2 - q ** 2)), fine)
    # p_perp f has slope 1 at the axis, so the rule is second order there
    assert n == pytest.approx(exact, rel=1e-3)
    assert n == pytest.approx(reference, rel=1e-3)
    assert abs(reference - exact) < abs(n - exact) / 10


def test_second_order_refinement():
    def density(n_par, n_perp):
        grid = MomentumGrid(-1.0, 2.0, n_par, 1.5, n_perp)
        return pair_density(synthetic(grid, lambda p, q: np.exp(-(p - 0.3) ** 2) * np.cos(q)), grid)

    n1, n2, n4 = density(21, 11), density(41, 21), density(81, 41)
    ratio = (n1 - n2) / (n2 - n4)
    assert ratio == pytest.approx(4.0, rel=0.05)


@settings(max_examples=30)
@given(st.floats(0.0, 10.0), st.integers(0, 2 ** 32 - 1))
def test_density_linear_and_monotone(c, seed):
    grid = MomentumGrid.symmetric(1.0, 9, 1.0, 7)
    rng = np.random.default_rng(seed)
    f = rng.random(grid.shape)
    base = pair_density(DistributionSlice(SliceAxis.FULL_2D, grid.p_par, grid.p_perp, f), grid)
    scaled = pair_density(DistributionSlice(SliceAxis.FULL_2D, grid.p_par, grid.p_perp, c * f), grid)
    bigger = pair_density(DistributionSlice(SliceAxis.FULL_2D, grid.p_par, grid.p_perp, f + rng.random(grid.shape)), grid)
    assert base >= 0.0
    assert scaled == pytest.approx(c * base, rel=1e-14, abs=1e-300)
    assert bigger >= base


def test_density_grid_mismatch():
    grid = MomentumGrid.symmetric(1.0, 9, 1.0, 7)
    other = MomentumGrid.symmetric(1.0, 9, 1.0, 5)
    with pytest.raises(GridMismatch):
        pair_density(synthetic(other, lambda p, q: p * 0), grid)
    with pytest.raises(GridMismatch):
        pair_density(DistributionSlice(SliceAxis.P_PAR_AT_PPERP0, grid.p_par, np.zeros(1), grid.p_par * 0), grid)


def test_pairs_per_volume():
    assert pairs_per_volume(0.0, 0.3) == 0.0
    assert pairs_per_volume(8e-6, 0.02) == pytest.approx(1.0)
    assert pairs_per_volume(1e-3, 0.04) == pytest.approx(pairs_per_volume(1e-3, 0.02) / 8)


def test_ratios():
    assert enhancement_ratio(3.3e-7, 3.3e-7) == 1.0
    assert enhancement_ratio(5e-9, 2e-10) == pytest.approx(25.0)
    assert net_efficiency(1e-8, 1e-9, 1e-9) == pytest.approx(5.0)
    assert net_efficiency(2.0, 1.5, 0.5) == 1.0
    with pytest.raises(DivisionByZeroBaseline):
        enhancement_ratio(1.0, 0.0)
    with pytest.raises(DivisionByZeroBaseline):
        net_efficiency(1.0, 0.0, 0.0)
    with pytest.raises(ZeroDivisionError):
        enhancement_ratio(1.0, 0.0)


def test_default_grid(fig1_config):
    grid = default_grid(PulseConfig("bifreq", E0=0.2, omega=0.02, sigma=5.0))
    assert grid.p_par_max == pytest.approx(14.0, rel=0.01)
    assert grid.p_par_min == -grid.p_par_max
    assert grid.shape == (512, 128)
    assert grid.p_perp_max == 3.0
    assert default_grid(PulseConfig(E0=0.0)).p_par_max == 4.0


def test_field_free_distribution():
    grid = MomentumGrid.symmetric(1.0, 5, 1.0, 3)
    dist = residual_distribution(PulseConfig("single", E0=0.0, omega=2.5, sigma=5.0), grid)
    assert np.all(dist.f == 0.0)


def test_distribution_is_symmetric_and_ordered():
    grid = MomentumGrid.symmetric(1.0, 9, 1.0, 3)
    dist = residual_distribution(CHEAP, grid)
    np.testing.assert_allclose(dist.f, dist.f[::-1, :], rtol=1e-6)
    assert np.all((dist.f >= 0) & (dist.f <= 1))
    (p, q), value = next(iter(dist.values()))
    assert (p, q) == (-1.0, 0.0)
    assert value == evolve_mode(MomentumMode(-1.0, 0.0), CHEAP).f_final


def test_worker_count_does_not_change_results():
    grid = MomentumGrid.symmetric(1.0, 7, 1.0, 3)
    one = residual_distribution(CHEAP, grid, workers=1)
    three = residual_distribution(CHEAP, grid, workers=3)
    np.testing.assert_array_equal(one.f, three.f)
    assert pair_density(one, grid) == pair_density(three, grid)


def test_failure_carries_coordinates():
    grid = MomentumGrid.symmetric(1.0, 3, 1.0, 2)
    with pytest.raises(ModeFailure) as info:
        residual_distribution(CHEAP, grid, IntegratorSettings(max_steps=10))
    assert info.value.p_par == -1.0
    assert info.value.p_perp == 0.0


def test_slices():
    coords = np.linspace(0.0, 1.0, 4)
    along_perp = momentum_slice(CHEAP, SliceAxis.P_PERP_AT_PPAR0, coords)
    assert along_perp.f[0] == evolve_mode(MomentumMode(0.0, 0.0), CHEAP).f_final
    assert [c for c, _ in along_perp.values()][2] == (0.0, coords[2])


def test_slice_peak_beats_the_scan():
    p_best, f_best = slice_peak(CHEAP, -1.5, 1.5, n_coarse=31, fine_halfwidth=0.2, fine_step=0.02)
    scan = momentum_slice(CHEAP, SliceAxis.P_PAR_AT_PPERP0, np.linspace(-1.5, 1.5, 301)).f
    assert f_best >= scan.max() * (1 - 1e-9)
    assert evolve_mode(MomentumMode(p_best, 0.0), CHEAP).f_final == pytest.approx(f_best)


def test_diagnostics():
    grid = MomentumGrid.symmetric(3.0, 41, 3.0, 21)
    estimate = density_with_diagnostics(synthetic(grid, lambda p, q: np.exp(-p ** 2 - q ** 2)), grid)
    assert estimate.resolution_delta < 0.02
    assert estimate.edge_fraction < 1e-3
    assert estimate.converged()
    assert estimate.flags() == "ok"
    truncated = MomentumGrid.symmetric(0.5, 41, 3.0, 21)
    wide = density_with_diagnostics(synthetic(truncated, lambda p, q: np.exp(-q ** 2) + 0 * p), truncated)
    assert "box" in wide.flags()
