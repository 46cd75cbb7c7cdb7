import asyncio

import pytest

from channel_math import derive_params
from config import settings
from errors import DomainError
from models import ProbeFamily, ProbeSpec
from verify_service import (
    CompleteVerificationService,
    DominanceCheckService,
    DualPathCheckService,
    EcsMomentsCheckService,
    IdentityCheckService,
    InvarianceCheckService,
    LosslessCheckService,
    MinimizationCheckService,
    MonotonicityCheckService,
    OracleService,
    ReductionCheckService,
    StationarityCheckService,
    draw_probe,
    relative_gap,
)

SINGLE_MODE_FAMILIES = {ProbeFamily.coherent, ProbeFamily.thermal_probe, ProbeFamily.fock, ProbeFamily.custom}


@pytest.fixture
def config():
    return settings.model_copy(update={"dim": 30, "draws": 6, "seed": 42})


def test_draws_are_reproducible():
    assert draw_probe(42, 3) == draw_probe(42, 3)
    assert draw_probe(42, 3) != draw_probe(43, 3)


def test_draws_stay_in_range():
    for index in range(100):
        draw = draw_probe(7, index)
        assert 0.05 <= draw.eta <= 0.95
        assert 0.0 <= draw.nbar_b <= 3.0
        assert draw.probe.family in SINGLE_MODE_FAMILIES
        assert draw.probe.n_modes == 1


def test_relative_gap():
    assert relative_gap(1e-13, 0.0) == pytest.approx(1e-13)
    assert relative_gap(101.0, 100.0) == pytest.approx(0.01)


@pytest.mark.parametrize(
    "service_class",
    [ReductionCheckService, LosslessCheckService, StationarityCheckService, MonotonicityCheckService],
)
def test_closed_form_property_checks_pass(config, service_class):
    result = asyncio.run(service_class(config).run())
    assert result.passed, result
    assert result.residual <= result.tolerance


def test_identity_check_passes(config):
    result = asyncio.run(IdentityCheckService(config).run(12))
    assert result.name == "identities"
    assert result.passed, result.details
    assert set(result.details["convergence"]) == {16, 32, 64}


def test_dual_path_check_passes(config):
    draws = [draw_probe(config.seed, index) for index in range(4)]
    result = asyncio.run(DualPathCheckService(config).run(draws, config.dim))
    assert result.passed, result


def test_minimization_check_passes(config):
    draws = [draw_probe(config.seed, index) for index in range(3)]
    result = asyncio.run(MinimizationCheckService(config).run(draws, config.dim))
    assert result.passed, result.details


def test_dominance_at_a_single_point(config):
    spec = ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0)
    result = asyncio.run(DominanceCheckService(config).run_point(spec, 0.5, 1.0, 20))
    assert result.passed, result.details
    assert result.details["min_gap"] >= 0.0


def test_ecs_moments_report_the_variance_discrepancy(config):
    result = asyncio.run(EcsMomentsCheckService(config).run())
    assert result.passed
    assert result.details["mean"] == pytest.approx(0.731058578630, abs=1e-6)
    assert result.details["variance"] == pytest.approx(0.92767, abs=1e-5)
    assert any(note.startswith("DISCREPANCY") for note in result.notes)


@pytest.mark.slow
def test_invariance_check_passes(config):
    result = asyncio.run(InvarianceCheckService(config).run())
    assert result.passed, result.details


@pytest.mark.slow
def test_dominance_on_random_draws(config):
    draws = [draw_probe(config.seed, index) for index in range(6)]
    result = asyncio.run(DominanceCheckService(config).run(draws, config.dim))
    assert result.passed, result.details
    assert result.details["cases"] == 6 + 9


def test_verify_selected_checks():
    service = CompleteVerificationService(settings, dim=12, draws=2, seed=5)
    report = asyncio.run(service.verify_all(["lossless", "reduction"]))

    assert report.passed
    assert (report.seed, report.dim, report.draws) == (5, 12, 2)
    assert [check.name for check in report.checks] == ["lossless", "reduction"]


def test_verify_rejects_unknown_checks():
    with pytest.raises(DomainError):
        asyncio.run(CompleteVerificationService(settings).verify_all(["telepathy"]))


def test_oracle_service_lossless_coherent():
    spec = ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0)
    result = asyncio.run(OracleService(settings).run_oracle(spec, derive_params(1.0, 0.0), 20))

    assert result.f_q == pytest.approx(4.0, abs=1e-8)
    assert result.cq_star == pytest.approx(4.0, abs=1e-8)
    assert result.gap == pytest.approx(0.0, abs=1e-8)


def test_oracle_service_noisy_gap_is_nonnegative(channel):
    spec = ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0)
    result = asyncio.run(OracleService(settings).run_oracle(spec, channel, 20))

    assert result.gap >= -1e-9
    assert abs(result.trace_deficit) <= 1e-10
