import math

import numpy as np
import numpy.testing as npt
import pytest

from channel_math import (
    bound_derivative_nbar,
    cq_gamma,
    cq_star,
    cq_star_n,
    cq_star_single,
    cq_surface,
    denominator_n,
    denominator_single,
    derive_params,
    gamma_gauge,
    gauge_coefficients,
    hessian_condition,
    minimum_norm_optimum,
    mse_lower_bound,
    omega_n,
    omega_single,
    optimal_gauge_n,
    optimal_gauge_single,
    quadratic_a,
    quadratic_surface,
    stationarity_residual,
)
from errors import DegenerateDenominatorError, DomainError
from models import KrausGaugePoint
from probe_stats import make_moments


def random_points(rng, count):
    return [KrausGaugePoint(x=float(x), y=float(y)) for x, y in rng.uniform(-3.0, 3.0, size=(count, 2))]


def test_derive_params_splits_gain_and_loss(channel):
    assert channel.gain == pytest.approx(1.5)
    assert channel.tau == pytest.approx(1.0 / 3.0)
    assert channel.tau * channel.gain == pytest.approx(channel.eta)


@pytest.mark.parametrize("eta, nbar_b", [(0.0, 1.0), (1.5, 1.0), (-0.2, 0.0), (0.5, -1.0), (0.5, math.nan)])
def test_derive_params_rejects_out_of_range(eta, nbar_b):
    with pytest.raises(DomainError):
        derive_params(eta, nbar_b)


def test_single_mode_example(channel):
    result = cq_star_single(channel, make_moments(1.0, 1.0))

    assert result.cq_star == pytest.approx(16.0 / 13.0, rel=1e-14)
    assert result.x0 == 0.0
    assert result.y0 == pytest.approx(-15.0 / 13.0, rel=1e-14)
    assert result.mse_lower == pytest.approx(0.8125, rel=1e-14)
    assert result.hessian_ok
    assert not result.degenerate


def test_denominator_example(channel):
    assert denominator_single(channel, make_moments(1.0, 1.0)) == pytest.approx(3.25)


def test_two_mode_example_without_noise():
    result = cq_star_n(derive_params(0.5, 0.0), make_moments(1.0, 1.0, n_modes=2))
    assert result.cq_star == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("nbar_b", [0.0, 0.7, 5.0])
@pytest.mark.parametrize("n_modes", [1, 2, 4])
def test_lossless_channel_gives_four_variances(nbar_b, n_modes):
    probe = make_moments(1.3, 2.1, n_modes=n_modes)
    assert cq_star(derive_params(1.0, nbar_b), probe).cq_star == pytest.approx(4.0 * 2.1, rel=1e-12)


def test_n_mode_formula_reduces_to_single_mode(rng):
    for _ in range(50):
        p = derive_params(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.0, 3.0)))
        probe = make_moments(float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.0, 5.0)))

        single, multi = cq_star_single(p, probe), cq_star_n(p, probe)
        assert multi.cq_star == pytest.approx(single.cq_star, rel=1e-12)
        assert denominator_n(p, probe) == pytest.approx(denominator_single(p, probe), rel=1e-12)

        g1, gn = optimal_gauge_single(p, probe), optimal_gauge_n(p, probe)
        assert gn.x == pytest.approx(g1.x, rel=1e-10, abs=1e-12)
        assert gn.y == pytest.approx(g1.y, rel=1e-10)


@pytest.mark.parametrize("n_modes", [1, 2, 3])
def test_optimum_is_the_surface_minimum(rng, n_modes):
    p = derive_params(0.4, 1.2)
    probe = make_moments(2.0, 3.5, n_modes=n_modes)
    result = cq_star(p, probe)
    optimum = KrausGaugePoint(x=result.x0, y=result.y0)

    assert cq_surface(optimum, p, probe) == pytest.approx(result.cq_star, rel=1e-12)
    assert stationarity_residual(optimum, p, probe, step=1e-3) < 1e-9
    for g in random_points(rng, 20):
        assert cq_surface(g, p, probe) >= result.cq_star - 1e-12


def test_quadratic_surface_matches_direct_evaluation(rng, channel):
    probe = make_moments(1.7, 0.4, n_modes=2)
    surface = quadratic_surface(channel, probe)
    for g in random_points(rng, 10):
        assert surface.evaluate(g) == pytest.approx(cq_surface(g, channel, probe), rel=1e-12)


def test_omega_matches_compact_form(rng):
    p = derive_params(0.3, 2.0)
    probe = make_moments(1.4, 0.9, n_modes=2)
    gain, tau, mean, n = p.gain, p.tau, probe.mean_total, probe.n_modes
    for g in random_points(rng, 10):
        compact = (
            tau * (1.0 - tau) * mean * (gain - g.x + (gain - 1.0) * g.y) ** 2
            + (1.0 + g.y) ** 2 * gain * (gain - 1.0) * (tau * mean + n)
        )
        assert omega_n(g, p, probe) == pytest.approx(compact, rel=1e-12, abs=1e-12)


def test_omega_is_nonnegative_at_the_example_point(channel):
    probe = make_moments(1.0, 1.0)
    assert omega_n(KrausGaugePoint(x=0.0, y=-15.0 / 13.0), channel, probe) >= 0.0


def test_omega_n_reduces_to_omega_single_for_one_mode(rng):
    for _ in range(100):
        p = derive_params(float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.0, 3.0)))
        probe = make_moments(float(rng.uniform(0.0, 5.0)), float(rng.uniform(0.0, 5.0)))
        g = random_points(rng, 1)[0]
        assert omega_n(g, p, probe) == pytest.approx(omega_single(g, p, probe), rel=1e-12, abs=1e-12)


def test_omega_single_rejects_multimode_moments(channel):
    with pytest.raises(DomainError):
        omega_single(KrausGaugePoint(x=0.0, y=0.0), channel, make_moments(1.0, 1.0, n_modes=2))


def test_quadratic_a_is_the_square_of_c2(rng, channel):
    for g in random_points(rng, 10):
        assert quadratic_a(g, channel) == pytest.approx(gauge_coefficients(g, channel).c2 ** 2, rel=1e-12)


def test_gauge_coefficients_at_origin(channel):
    c = gauge_coefficients(KrausGaugePoint(), channel)
    beta = (1.0 - channel.eta) * channel.nbar_b
    assert c.c2 == pytest.approx(channel.eta)
    assert c.d0 == pytest.approx(beta)
    assert c.c0 == pytest.approx(beta * (2.0 * beta + 1.0))


def test_gamma_channels_never_beat_the_optimum(channel):
    probe = make_moments(1.0, 1.0)
    assert gamma_gauge(0.37) == KrausGaugePoint(x=-0.37, y=0.37)
    best = cq_star(channel, probe).cq_star
    for gamma in (-1.0, 0.0, 0.37):
        assert cq_gamma(gamma, channel, probe) >= best - 1e-12


def test_vacuum_falls_back_to_minimum_norm_optimum(channel):
    vacuum = make_moments(0.0, 0.0)
    result = cq_star(channel, vacuum)

    assert result.degenerate
    assert not result.hessian_ok
    assert result.cq_star == pytest.approx(0.0, abs=1e-12)
    assert result.x0 == pytest.approx(0.0, abs=1e-12)
    assert result.y0 == pytest.approx(-1.0)


def test_vacuum_in_strict_mode_raises(channel):
    vacuum = make_moments(0.0, 0.0)
    with pytest.raises(DegenerateDenominatorError):
        cq_star(channel, vacuum, strict=True)
    with pytest.raises(DegenerateDenominatorError):
        optimal_gauge_single(channel, vacuum)
    with pytest.raises(DegenerateDenominatorError):
        optimal_gauge_n(channel, vacuum)


def test_noiseless_channel_has_flat_direction():
    p = derive_params(0.6, 0.0)
    probe = make_moments(1.0, 2.0)
    result = cq_star(p, probe)
    assert not hessian_condition(KrausGaugePoint(x=result.x0, y=result.y0), p, probe)
    assert result.degenerate


def test_minimum_norm_optimum_rejects_unbounded_surface(channel):
    surface = quadratic_surface(channel, make_moments(1.0, 1.0))
    unbounded = surface.model_copy(update={"xx": 0.0, "xy": 0.0, "x_lin": 1.0})
    with pytest.raises(DegenerateDenominatorError):
        minimum_norm_optimum(unbounded)


def test_fock_probe_has_zero_bound(channel):
    result = cq_star(channel, make_moments(2.0, 0.0))
    assert result.cq_star == 0.0
    assert math.isinf(result.mse_lower)
    assert mse_lower_bound(0.0) == math.inf


@pytest.mark.parametrize("eta", [0.1, 0.4, 0.7, 0.95])
@pytest.mark.parametrize("nbar_b", [0.1, 1.0, 3.0])
@pytest.mark.parametrize("n_modes", [1, 2])
def test_nbar_derivative_matches_finite_difference(eta, nbar_b, n_modes):
    probe = make_moments(1.5, 2.5, n_modes=n_modes)
    slope = bound_derivative_nbar(derive_params(eta, nbar_b), probe)
    step = 1e-5
    upper = cq_star(derive_params(eta, nbar_b + step), probe).cq_star
    lower = cq_star(derive_params(eta, nbar_b - step), probe).cq_star

    assert slope < 0.0
    assert (upper - lower) / (2.0 * step) == pytest.approx(slope, rel=1e-6, abs=1e-9)


def test_nbar_derivative_vanishes_without_loss():
    assert bound_derivative_nbar(derive_params(1.0, 2.0), make_moments(1.0, 1.0)) == 0.0


def test_bound_is_decreasing_in_nbar():
    probe = make_moments(0.731, 0.731, n_modes=2)
    values = [cq_star(derive_params(0.4, nb), probe).cq_star for nb in np.linspace(0.0, 5.0, 21)]
    npt.assert_array_less(np.diff(values), 0.0)
