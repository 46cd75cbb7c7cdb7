import asyncio
import time
from pathlib import Path

import numpy as np
import pytest

from channel_math import cq_star, derive_params
from errors import DomainError
from models import MomentMode, ProbeFamily, ProbeSpec, SweepSpec
from probe_stats import ecs_moments_quoted, make_moments
from storage import GOLDEN_SWEEP, SWEEP_COLUMNS, ResultStorageService
from sweep_service import SweepService, gather_in_threads

GOLDEN_DIR = Path(__file__).resolve().parents[1] / "golden"


@pytest.fixture
def service(tmp_path):
    return SweepService(ResultStorageService(str(tmp_path)))


def by_eta(rows):
    curves = {}
    for row in rows:
        curves.setdefault(row.eta, []).append(row.cq_star)
    return curves


def test_gather_in_threads_keeps_order():
    def slow_square(value):
        time.sleep(0.01 * (5 - value))
        return value * value

    assert asyncio.run(gather_in_threads(slow_square, list(range(5)), limit=3)) == [0, 1, 4, 9, 16]


def test_default_preset_grid(service):
    rows = asyncio.run(service.run_sweep(SweepSpec()))

    assert len(rows) == 3 * 101
    assert [(row.eta, row.nbar_b) for row in rows] == SweepService.grid(SweepSpec())
    assert rows[0].nbar_b == 0.0 and rows[100].nbar_b == 5.0
    assert all(row.n_modes == 2 for row in rows)
    assert rows[0].mean_ns == pytest.approx(ecs_moments_quoted(1.0).mean_total)


def test_preset_curves_decrease_in_noise(service):
    curves = by_eta(asyncio.run(service.run_sweep(SweepSpec())))
    for values in curves.values():
        assert np.all(np.diff(values) < 0.0)


def test_preset_curves_increase_with_transmissivity(service):
    curves = by_eta(asyncio.run(service.run_sweep(SweepSpec())))
    stacked = np.array([curves[eta] for eta in (0.1, 0.4, 0.7)])
    assert np.all(np.diff(stacked, axis=0) > 0.0)


def test_sweep_matches_golden_file(service):
    text = asyncio.run(service.write_sweep(SweepSpec(output_path=None)))
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert text == (GOLDEN_DIR / GOLDEN_SWEEP).read_text()


def test_write_sweep_reuses_computed_rows(service, tmp_path):
    spec = SweepSpec(etas=[0.4], nbar_count=3, output_path=str(tmp_path / "rows.csv"))
    rows = asyncio.run(service.run_sweep(spec))
    text = asyncio.run(service.write_sweep(spec, rows))
    assert (tmp_path / "rows.csv").read_text() == text
    assert len(text.splitlines()) == 4


def test_repeated_sweeps_are_byte_identical(service, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    asyncio.run(service.write_sweep(SweepSpec(output_path=str(first))))
    asyncio.run(service.write_sweep(SweepSpec(output_path=str(second))))
    assert first.read_bytes() == second.read_bytes()


def test_single_point_sweep_equals_bound(service):
    spec = SweepSpec(etas=[0.5], nbar_start=1.0, nbar_stop=1.0, nbar_count=2,
                     probe=ProbeSpec(family=ProbeFamily.custom, mean=1.0, var=1.0))
    row = asyncio.run(service.run_sweep(spec))[0]
    expected = cq_star(derive_params(0.5, 1.0), make_moments(1.0, 1.0))

    assert row.cq_star == expected.cq_star
    assert (row.x0, row.y0, row.mse_lower) == (expected.x0, expected.y0, expected.mse_lower)


def test_oracle_moment_mode_uses_the_direct_variance(service):
    spec = SweepSpec(etas=[0.4], nbar_count=2, moment_mode=MomentMode.oracle)
    rows = asyncio.run(service.run_sweep(spec))
    assert rows[0].var_ns == pytest.approx(0.92767, abs=1e-5)


@pytest.mark.parametrize("fields", [{"etas": []}, {"etas": [1.5]}, {"nbar_start": 2.0, "nbar_stop": 1.0},
                                    {"nbar_count": 1}])
def test_invalid_sweep_specs(fields):
    with pytest.raises(ValueError):
        SweepSpec(**fields)


def test_spot_checks_need_two_modes(service):
    spec = SweepSpec(probe=ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0))
    with pytest.raises(DomainError):
        asyncio.run(service.spot_check_oracle(spec))


@pytest.mark.slow
def test_spot_checks_agree_with_two_mode_oracle(service):
    spec = SweepSpec(etas=[0.1, 0.7], nbar_count=3)
    checks = asyncio.run(service.spot_check_oracle(spec, points=3))

    assert len(checks) == 3
    for check in checks:
        assert check.passed, check.details
