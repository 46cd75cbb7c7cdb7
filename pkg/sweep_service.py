import asyncio
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from channel_math import cq_star, derive_params, optimal_gauge_n
from config import settings
from errors import DomainError
from fock_oracle import cq_numeric_multimode
from fock_space import build_state, state_moments
from logger import log_error, log_info
from models import CheckResult, ProbeFamily, ProbeMoments, SweepRow, SweepSpec
from probe_stats import moments, recommended_dim
from storage import ResultStorageService

T = TypeVar("T")
R = TypeVar("R")

SPOT_CHECK_TOLERANCE = 1e-6


async def gather_in_threads(fn: Callable[[T], R], items: Sequence[T], limit: Optional[int] = None) -> List[R]:
    """Run fn over items on worker threads, at most `limit` at a time; results keep item order"""
    semaphore = asyncio.Semaphore(limit or settings.max_concurrency)

    async def worker(item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(fn, item)

    return await asyncio.gather(*(worker(item) for item in items))


class SweepService:
    """Service for evaluating the closed-form bound over (eta, nbar_b) grids"""

    def __init__(self, storage_service: ResultStorageService, strict: bool = False):
        self.storage_service = storage_service
        self.strict = strict

    @staticmethod
    def grid(spec: SweepSpec) -> List[tuple]:
        """Grid points ordered by eta, then nbar_b"""
        nbars = np.linspace(spec.nbar_start, spec.nbar_stop, spec.nbar_count)
        return [(eta, float(nbar)) for eta in sorted(spec.etas) for nbar in nbars]

    def evaluate_point(self, eta: float, nbar_b: float, probe: ProbeMoments) -> SweepRow:
        result = cq_star(derive_params(eta, nbar_b), probe, strict=self.strict)
        return SweepRow(
            eta=eta,
            nbar_b=nbar_b,
            n_modes=probe.n_modes,
            mean_ns=probe.mean_total,
            var_ns=probe.var_total,
            x0=result.x0,
            y0=result.y0,
            cq_star=result.cq_star,
            mse_lower=result.mse_lower,
        )

    async def run_sweep(self, spec: SweepSpec) -> List[SweepRow]:
        try:
            log_info(f"Starting sweep over {len(spec.etas)} eta values x {spec.nbar_count} nbar_b values",
                     family=spec.probe.family.value, moment_mode=spec.moment_mode.value)
            probe = moments(spec.probe, spec.moment_mode)
            rows = await gather_in_threads(
                lambda point: self.evaluate_point(point[0], point[1], probe), self.grid(spec)
            )
            log_info(f"Sweep finished with {len(rows)} rows")
            return rows
        except Exception as e:
            log_error("Error during sweep", error=e)
            raise

    async def write_sweep(self, spec: SweepSpec, rows: Optional[List[SweepRow]] = None) -> str:
        """Render the sweep as CSV and write it to spec.output_path (stdout when unset).

        Rows already computed for this spec can be passed in to skip the rerun.
        """
        if rows is None:
            rows = await self.run_sweep(spec)
        text = self.storage_service.render_csv(rows)
        self.storage_service.write_text(text, spec.output_path)
        return text

    def _spot_check_point(self, point: tuple, spec: SweepSpec) -> CheckResult:
        eta, nbar_b = point
        p = derive_params(eta, nbar_b)
        d = settings.multimode_dim
        if spec.probe.family == ProbeFamily.entangled_coherent:
            d = max(d, recommended_dim(ProbeMoments(mean_total=spec.probe.amplitude ** 2,
                                                    var_total=spec.probe.amplitude ** 2)))
        state = build_state(spec.probe, d)
        measured = state_moments(state)
        closed = cq_star(p, measured).cq_star
        numeric = cq_numeric_multimode(state, optimal_gauge_n(p, measured), p)
        residual = abs(numeric - closed) / max(1.0, abs(closed))
        return CheckResult(
            name="spot_check",
            passed=residual <= SPOT_CHECK_TOLERANCE,
            residual=residual,
            tolerance=SPOT_CHECK_TOLERANCE,
            details={"eta": eta, "nbar_b": nbar_b, "dim": d, "closed_form": closed, "oracle": numeric},
        )

    async def spot_check_oracle(self, spec: SweepSpec, points: int = 5) -> List[CheckResult]:
        """Two-mode oracle bound against the closed form at evenly spaced grid points"""
        try:
            if spec.probe.n_modes != 2:
                raise DomainError("oracle spot checks need a two-mode probe")
            grid = self.grid(spec)
            picks = np.unique(np.linspace(0, len(grid) - 1, points).round().astype(int))
            log_info(f"Spot-checking {len(picks)} sweep points against the two-mode oracle")
            return await gather_in_threads(lambda i: self._spot_check_point(grid[i], spec), list(picks))
        except Exception as e:
            log_error("Error during oracle spot checks", error=e)
            raise
