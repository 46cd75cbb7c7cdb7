import math

import pytest

from errors import DomainError
from models import MomentMode, ProbeFamily
from probe_stats import (
    ecs_moments_exact,
    ecs_moments_quoted,
    make_moments,
    make_probe_spec,
    moments,
    oracle_moments,
    recommended_dim,
)

ECS_MEAN = 1.0 / (1.0 + math.exp(-1.0))


@pytest.mark.parametrize(
    "fields, mean, var",
    [
        ({"family": ProbeFamily.coherent, "amplitude": 1.5}, 2.25, 2.25),
        ({"family": ProbeFamily.fock, "photon_count": 3}, 3.0, 0.0),
        ({"family": ProbeFamily.thermal_probe, "mean": 0.5}, 0.5, 0.75),
        ({"family": ProbeFamily.squeezed_vacuum, "squeeze": 0.5}, math.sinh(0.5) ** 2,
         2.0 * math.sinh(0.5) ** 2 * (math.sinh(0.5) ** 2 + 1.0)),
        ({"family": ProbeFamily.custom, "mean": 1.0, "var": 1.7}, 1.0, 1.7),
    ],
)
def test_single_mode_moments(fields, mean, var):
    probe = moments(make_probe_spec(**fields))
    assert probe.n_modes == 1
    assert probe.mean_total == pytest.approx(mean)
    assert probe.var_total == pytest.approx(var)


def test_product_probes_scale_with_mode_count():
    probe = moments(make_probe_spec(family=ProbeFamily.coherent, amplitude=1.0, n_modes=3))
    assert probe.n_modes == 3
    assert probe.mean_total == pytest.approx(3.0)
    assert probe.var_total == pytest.approx(3.0)


def test_custom_moments_are_totals():
    spec = make_probe_spec(family=ProbeFamily.custom, mean=1.0, var=1.0, n_modes=2)
    probe = moments(spec)
    assert (probe.n_modes, probe.mean_total, probe.var_total) == (2, 1.0, 1.0)

    measured = oracle_moments(spec)
    assert measured.mean_total == pytest.approx(1.0, abs=1e-8)
    assert measured.var_total == pytest.approx(1.0, abs=1e-8)


def test_oracle_moments_of_bright_ecs():
    spec = make_probe_spec(family=ProbeFamily.entangled_coherent, amplitude=4.0, n_modes=2)
    measured, exact = oracle_moments(spec), ecs_moments_exact(4.0)
    assert measured.mean_total == pytest.approx(exact.mean_total, rel=1e-9)
    assert measured.var_total == pytest.approx(exact.var_total, rel=1e-9)


def test_quoted_ecs_moments():
    probe = ecs_moments_quoted(1.0)
    assert probe.n_modes == 2
    assert probe.mean_total == pytest.approx(0.731058578630, abs=1e-12)
    assert probe.var_total == probe.mean_total


def test_direct_ecs_moments():
    probe = ecs_moments_exact(1.0)
    assert probe.mean_total == pytest.approx(ECS_MEAN, abs=1e-12)
    assert probe.var_total == pytest.approx(0.92767, abs=1e-5)


def test_ecs_moment_modes_differ_only_in_variance():
    spec = make_probe_spec(family=ProbeFamily.entangled_coherent, amplitude=1.0, n_modes=2)
    quoted = moments(spec, MomentMode.quoted)
    measured = moments(spec, MomentMode.oracle)

    assert measured.mean_total == pytest.approx(quoted.mean_total, abs=1e-9)
    assert measured.var_total == pytest.approx(ecs_moments_exact(1.0).var_total, abs=1e-9)
    assert measured.var_total > quoted.var_total


@pytest.mark.parametrize(
    "fields",
    [
        {"family": ProbeFamily.coherent, "amplitude": 0.8},
        {"family": ProbeFamily.thermal_probe, "mean": 0.2},
        {"family": ProbeFamily.custom, "mean": 0.6, "var": 0.7},
    ],
)
def test_oracle_moments_agree_with_formulas(fields):
    spec = make_probe_spec(**fields)
    formula, measured = moments(spec), oracle_moments(spec)
    assert measured.mean_total == pytest.approx(formula.mean_total, abs=1e-8)
    assert measured.var_total == pytest.approx(formula.var_total, abs=1e-8)


def test_ecs_must_have_two_modes():
    with pytest.raises(DomainError):
        make_probe_spec(family=ProbeFamily.entangled_coherent, amplitude=1.0, n_modes=1)


@pytest.mark.parametrize("fields", [{"family": "laser"}, {"family": ProbeFamily.coherent, "amplitude": -1.0}])
def test_invalid_probe_fields(fields):
    with pytest.raises(DomainError):
        make_probe_spec(**fields)


def test_negative_moments_are_rejected():
    with pytest.raises(DomainError):
        make_moments(-1.0, 1.0)


def test_recommended_dim():
    assert recommended_dim(make_moments(1.0, 1.0)) == 19
    assert recommended_dim(make_moments(0.0, 0.0)) == 10
