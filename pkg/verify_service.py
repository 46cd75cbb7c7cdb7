"""
Verification services behind `verify` and `oracle`: each check compares the closed
forms with the truncated Fock-space oracle or with a property of the formulas, and
reports a CheckResult with its worst residual.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from channel_math import (
    bound_derivative_nbar,
    cq_star,
    cq_star_n,
    cq_star_single,
    cq_surface,
    derive_params,
    gauge_coefficients,
    quadratic_surface,
    stationarity_residual,
)
from config import Settings, settings
from errors import DomainError
from fock_oracle import (
    apply_channel,
    choose_cutoffs,
    cq_numeric,
    h_moments,
    identity_convergence,
    minimize_cq_numeric,
    qfi_exact,
    spectral_qfi,
    trace_distance,
    verify_identities,
)
from fock_space import build_state, state_moments
from logger import log_error, log_info, log_warning
from models import (
    ChannelParams,
    CheckResult,
    KrausGaugePoint,
    OracleResult,
    ProbeDraw,
    ProbeFamily,
    ProbeMoments,
    ProbeSpec,
    TruncatedState,
    VerificationReport,
)
from probe_stats import ecs_moments_exact, ecs_moments_quoted, make_moments, moments, recommended_dim
from sweep_service import gather_in_threads

CHECK_NAMES = [
    "identities",
    "reduction",
    "lossless",
    "stationarity",
    "monotonicity",
    "dual_path",
    "minimization",
    "invariance",
    "dominance",
    "ecs_moments",
]

IDENTITY_GRID = [(eta, nbar_b) for eta in (0.3, 0.7) for nbar_b in (0.5, 2.0)]
ECS_DOMINANCE_GRID = [(eta, nbar_b) for eta in (0.1, 0.4, 0.7) for nbar_b in (0.2, 1.0, 3.0)]
THETAS = (0.0, 0.3, 1.1)
GAMMAS = (-1.0, 0.0, 0.37)
INVARIANCE_TOLERANCE = 1e-10
REDUCTION_TOLERANCE = 1e-12
MONOTONICITY_TOLERANCE = 1e-6
MINIMIZER_TOLERANCE = 1e-4
MINIMUM_VALUE_TOLERANCE = 1e-6
STATIONARITY_TOLERANCE = 1e-9
ECS_MEAN_TOLERANCE = 1e-6
ECS_EXPECTED_MEAN = 1.0 / (1.0 + math.exp(-1.0))


def relative_gap(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))


def random_moments(rng: np.random.Generator, n_modes: int = 1) -> ProbeMoments:
    return make_moments(float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.0, 5.0)), n_modes=n_modes)


def random_channel(rng: np.random.Generator) -> ChannelParams:
    return derive_params(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.0, 3.0)))


def draw_probe(seed: int, index: int) -> ProbeDraw:
    """Single-mode (channel, probe) draw; the stream depends only on (seed, index)"""
    rng = np.random.default_rng([seed, index])
    eta = float(rng.uniform(0.05, 0.95))
    nbar_b = float(rng.uniform(0.0, 3.0))
    family = [ProbeFamily.coherent, ProbeFamily.thermal_probe, ProbeFamily.fock, ProbeFamily.custom][
        int(rng.integers(0, 4))
    ]
    if family == ProbeFamily.coherent:
        probe = ProbeSpec(family=family, amplitude=float(rng.uniform(0.2, 1.5)))
    elif family == ProbeFamily.thermal_probe:
        probe = ProbeSpec(family=family, mean=float(rng.uniform(0.05, 0.8)))
    elif family == ProbeFamily.fock:
        probe = ProbeSpec(family=family, photon_count=int(rng.integers(1, 5)))
    else:
        # super-Poissonian, so always representable as a negative-binomial mixture
        mean = float(rng.uniform(0.2, 1.0))
        probe = ProbeSpec(family=family, mean=mean, var=mean * float(rng.uniform(1.0, 1.5)))
    return ProbeDraw(index=index, eta=eta, nbar_b=nbar_b, probe=probe)


def draw_state(draw: ProbeDraw, dim: int) -> TruncatedState:
    return build_state(draw.probe, max(dim, recommended_dim(moments(draw.probe))))


def _result(name: str, residuals: Sequence[float], tolerance: float, passed: Optional[bool] = None,
            **details) -> CheckResult:
    worst = max(residuals) if residuals else 0.0
    return CheckResult(
        name=name,
        passed=bool(worst <= tolerance if passed is None else passed),
        residual=worst,
        tolerance=tolerance,
        details=details,
    )


class IdentityCheckService:
    """Kraus operator sums and ladder lemmas against their closed forms"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self, dim: int) -> CheckResult:
        try:
            log_info(f"Checking operator identities at d={dim}")
            reports = await gather_in_threads(
                lambda point: verify_identities(derive_params(*point), dim, self.config.seed), IDENTITY_GRID
            )
            worst = [report.worst() for report in reports]
            per_point = {f"eta={eta},nbar_b={nbar_b}": w for (eta, nbar_b), w in zip(IDENTITY_GRID, worst)}

            convergence = identity_convergence(derive_params(0.5, 1.0))
            shrink = {dim_: r.identities["gain_square"].max_relative_deviation for dim_, r in convergence.items()}
            deviations = list(shrink.values())
            shrinking = all(later < earlier or later <= self.config.identity_tolerance
                            for earlier, later in zip(deviations, deviations[1:]))

            result = _result("identities", worst, self.config.identity_tolerance,
                             passed=max(worst) <= self.config.identity_tolerance and shrinking,
                             dim=dim, per_point=per_point, convergence=shrink)
            log_info("Identity check finished", passed=result.passed, residual=result.residual)
            return result
        except Exception as e:
            log_error("Error checking operator identities", error=e)
            raise


class ReductionCheckService:
    """n = 1 of the n-mode optimum against the single-mode optimum"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self, samples: int = 100) -> CheckResult:
        rng = np.random.default_rng([self.config.seed, 1])
        residuals = []
        for _ in range(samples):
            p, probe = random_channel(rng), random_moments(rng)
            residuals.append(relative_gap(cq_star_n(p, probe).cq_star, cq_star_single(p, probe).cq_star))
        return _result("reduction", residuals, REDUCTION_TOLERANCE, samples=samples)


class LosslessCheckService:
    """eta = 1 gives 4 var_total for every probe and every nbar_b"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self, samples: int = 50) -> CheckResult:
        rng = np.random.default_rng([self.config.seed, 2])
        residuals = []
        for _ in range(samples):
            probe = random_moments(rng, n_modes=int(rng.integers(1, 5)))
            for nbar_b in (0.0, 1.0, 5.0):
                bound = cq_star_n(derive_params(1.0, nbar_b), probe).cq_star
                residuals.append(abs(bound - 4.0 * probe.var_total) / max(4.0 * probe.var_total, 1e-300))
        return _result("lossless", residuals, REDUCTION_TOLERANCE, samples=samples)


class StationarityCheckService:
    """Central differences vanish at the closed-form optimum, which is also the grid minimum"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self, samples: int = 100) -> CheckResult:
        rng = np.random.default_rng([self.config.seed, 3])
        axis = np.linspace(-5.0, 5.0, 51)
        gradients, undershoots = [], []
        for _ in range(samples):
            p, probe = random_channel(rng), random_moments(rng, n_modes=int(rng.integers(1, 3)))
            bound = cq_star(p, probe)
            gradients.append(stationarity_residual(KrausGaugePoint(x=bound.x0, y=bound.y0), p, probe, step=1e-3))

            surface = quadratic_surface(p, probe)
            grid_x, grid_y = np.meshgrid(axis, axis, indexing="ij")
            values = (surface.xx * grid_x ** 2 + surface.yy * grid_y ** 2 + surface.xy * grid_x * grid_y
                      + surface.x_lin * grid_x + surface.y_lin * grid_y + surface.const)
            undershoots.append(max(0.0, bound.cq_star - float(values.min())) / max(1.0, bound.cq_star))

        passed = max(gradients) <= STATIONARITY_TOLERANCE and max(undershoots) <= 1e-10
        return _result("stationarity", gradients, STATIONARITY_TOLERANCE, passed=passed,
                       samples=samples, worst_grid_undershoot=max(undershoots))


class MonotonicityCheckService:
    """dC*/dnbar_B is negative and matches central differences"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self) -> CheckResult:
        rng = np.random.default_rng([self.config.seed, 4])
        probes = [
            make_moments(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.5, 5.0)), n_modes=int(rng.integers(1, 3)))
            for _ in range(5)
        ]
        residuals, positive = [], 0
        for eta in np.linspace(0.05, 0.95, 10):
            for nbar_b in np.linspace(0.1, 3.0, 10):
                for probe in probes:
                    p = derive_params(float(eta), float(nbar_b))
                    slope = bound_derivative_nbar(p, probe)
                    positive += slope >= 0.0
                    step = 1e-5
                    upper = cq_star_n(derive_params(float(eta), float(nbar_b) + step), probe).cq_star
                    lower = cq_star_n(derive_params(float(eta), float(nbar_b) - step), probe).cq_star
                    residuals.append(relative_gap((upper - lower) / (2.0 * step), slope))

        return _result("monotonicity", residuals, MONOTONICITY_TOLERANCE,
                       passed=positive == 0 and max(residuals) <= MONOTONICITY_TOLERANCE,
                       nonnegative_slopes=positive)


class DualPathCheckService:
    """Oracle H-moments and bound against the closed forms on random draws"""

    def __init__(self, config: Settings):
        self.config = config

    def evaluate(self, draw: ProbeDraw, dim: int) -> float:
        p = derive_params(draw.eta, draw.nbar_b)
        state = draw_state(draw, dim)
        probe = state_moments(state)
        bound = cq_star(p, probe)

        rng = np.random.default_rng([self.config.seed, 5, draw.index])
        gauges = [KrausGaugePoint(x=bound.x0, y=bound.y0),
                  KrausGaugePoint(x=float(rng.uniform(-3, 3)), y=float(rng.uniform(-3, 3)))]
        n_mean = probe.mean_total
        n_square = probe.var_total + n_mean ** 2
        worst = relative_gap(cq_numeric(state, gauges[0], p), bound.cq_star)
        for g in gauges:
            c = gauge_coefficients(g, p)
            measured = h_moments(state, g, p)
            worst = max(
                worst,
                relative_gap(measured.h1_mean, c.c2 ** 2 * n_square + c.c1 * n_mean + c.c0),
                relative_gap(measured.h2_mean, c.c2 * n_mean + c.d0),
                relative_gap(cq_numeric(state, g, p), cq_surface(g, p, probe)),
            )
        return worst

    async def run(self, draws: Sequence[ProbeDraw], dim: int) -> CheckResult:
        try:
            log_info(f"Checking dual-path equality on {len(draws)} draws")
            residuals = await gather_in_threads(lambda draw: self.evaluate(draw, dim), draws)
            worst_index = int(np.argmax(residuals)) if residuals else -1
            return _result("dual_path", residuals, self.config.dual_path_tolerance, draws=len(draws),
                           worst_draw=worst_index)
        except Exception as e:
            log_error("Error during dual-path check", error=e)
            raise


class MinimizationCheckService:
    """Numeric minimum of the oracle surface against the closed-form optimum"""

    def __init__(self, config: Settings):
        self.config = config

    @staticmethod
    def evaluate(draw: ProbeDraw, dim: int) -> Dict[str, float]:
        p = derive_params(draw.eta, draw.nbar_b)
        state = draw_state(draw, dim)
        bound = cq_star(p, state_moments(state))
        numeric = minimize_cq_numeric(state, p)

        coordinate_gap = 0.0
        if bound.hessian_ok:
            coordinate_gap = max(abs(numeric.x_min - bound.x0), abs(numeric.y_min - bound.y0))
        return {
            "coordinates": coordinate_gap,
            "value": relative_gap(numeric.c_min, bound.cq_star),
            "grid_undershoot": max(0.0, numeric.c_min - numeric.grid_min) / max(1.0, abs(numeric.c_min)),
        }

    async def run(self, draws: Sequence[ProbeDraw], dim: int) -> CheckResult:
        try:
            log_info(f"Checking numeric minimization on {len(draws)} draws")
            gaps = await gather_in_threads(lambda draw: self.evaluate(draw, dim), draws)
            coordinates = max((g["coordinates"] for g in gaps), default=0.0)
            values = [g["value"] for g in gaps]
            undershoot = max((g["grid_undershoot"] for g in gaps), default=0.0)
            passed = (coordinates <= MINIMIZER_TOLERANCE and max(values, default=0.0) <= MINIMUM_VALUE_TOLERANCE
                      and undershoot <= 1e-10)
            return _result("minimization", values, MINIMUM_VALUE_TOLERANCE, passed=passed,
                           worst_coordinate_gap=coordinates, worst_grid_undershoot=undershoot)
        except Exception as e:
            log_error("Error during minimization check", error=e)
            raise


class InvarianceCheckService:
    """Channel outputs do not depend on the gauge point or on gamma"""

    def __init__(self, config: Settings):
        self.config = config

    @staticmethod
    def evaluate(state: TruncatedState, p: ChannelParams) -> Dict[str, float]:
        cutoffs = choose_cutoffs(state, p)
        reference = apply_channel(state, p, 0.3, gauge=KrausGaugePoint(), cutoffs=cutoffs)
        shifted = apply_channel(state, p, 0.3, gauge=KrausGaugePoint(x=3.0, y=-2.0), cutoffs=cutoffs)
        outputs = [apply_channel(state, p, 0.3, gamma=gamma, cutoffs=cutoffs) for gamma in GAMMAS]
        gamma_distance = max(
            trace_distance(first, second) for i, first in enumerate(outputs) for second in outputs[i + 1:]
        )
        return {"gauge": trace_distance(reference, shifted), "gamma": gamma_distance}

    async def run(self) -> CheckResult:
        try:
            log_info("Checking gauge and gamma invariance of the channel output")
            cases = [
                (build_state(ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0), self.config.dim),
                 derive_params(0.5, 1.0)),
                (build_state(ProbeSpec(family=ProbeFamily.entangled_coherent, amplitude=1.0, n_modes=2), 16),
                 derive_params(0.4, 0.5)),
            ]
            distances = await gather_in_threads(lambda case: self.evaluate(*case), cases)
            residuals = [value for distance in distances for value in distance.values()]
            return _result("invariance", residuals, INVARIANCE_TOLERANCE,
                           coherent=distances[0], entangled_coherent=distances[1])
        except Exception as e:
            log_error("Error during invariance check", error=e)
            raise


class DominanceCheckService:
    """Exact QFI never exceeds the optimized bound"""

    def __init__(self, config: Settings):
        self.config = config

    def gap(self, state: TruncatedState, p: ChannelParams, theta: float = 0.0) -> float:
        return cq_star(p, state_moments(state)).cq_star - qfi_exact(state, p, theta)

    def evaluate_draw(self, draw: ProbeDraw, dim: int) -> Dict[str, float]:
        p = derive_params(draw.eta, draw.nbar_b)
        state = draw_state(draw, dim)
        gaps = [self.gap(state, p, theta) for theta in (THETAS if draw.index < 5 else THETAS[:1])]
        return {"gap": min(gaps), "theta_spread": max(gaps) - min(gaps)}

    def evaluate_ecs(self, point: tuple, alpha: float = 1.0) -> Dict[str, float]:
        spec = ProbeSpec(family=ProbeFamily.entangled_coherent, amplitude=alpha, n_modes=2)
        state = build_state(spec, self.config.multimode_dim)
        return {"gap": self.gap(state, derive_params(*point)), "theta_spread": 0.0}

    async def run(self, draws: Sequence[ProbeDraw], dim: int) -> CheckResult:
        try:
            log_info(f"Checking dominance on {len(draws)} draws and {len(ECS_DOMINANCE_GRID)} ECS points")
            outcomes = await gather_in_threads(lambda draw: self.evaluate_draw(draw, dim), draws)
            outcomes += await gather_in_threads(self.evaluate_ecs, ECS_DOMINANCE_GRID)
            return self._summarize(outcomes)
        except Exception as e:
            log_error("Error during dominance check", error=e)
            raise

    async def run_point(self, spec: ProbeSpec, eta: float, nbar_b: float, dim: int) -> CheckResult:
        """Dominance at one requested (probe, channel) point"""
        d = dim if spec.n_modes == 1 else min(dim, self.config.multimode_max_dim)
        state = build_state(spec, d)
        outcome = await gather_in_threads(lambda theta: self.gap(state, derive_params(eta, nbar_b), theta),
                                          list(THETAS))
        return self._summarize([{"gap": min(outcome), "theta_spread": max(outcome) - min(outcome)}])

    def _summarize(self, outcomes: List[Dict[str, float]]) -> CheckResult:
        worst_gap = min(o["gap"] for o in outcomes)
        spread = max(o["theta_spread"] for o in outcomes)
        tolerance = self.config.dominance_tolerance
        return CheckResult(
            name="dominance",
            passed=bool(worst_gap >= -tolerance and spread <= tolerance),
            residual=max(0.0, -worst_gap),
            tolerance=tolerance,
            details={"min_gap": worst_gap, "theta_spread": spread, "cases": len(outcomes)},
        )


class EcsMomentsCheckService:
    """Adjudicates the quoted ECS variance against the truncated state"""

    def __init__(self, config: Settings):
        self.config = config

    async def run(self, alpha: float = 1.0) -> CheckResult:
        spec = ProbeSpec(family=ProbeFamily.entangled_coherent, amplitude=alpha, n_modes=2)
        measured = state_moments(build_state(spec, self.config.multimode_dim))
        quoted, exact = ecs_moments_quoted(alpha), ecs_moments_exact(alpha)

        mean_error = abs(measured.mean_total - quoted.mean_total)
        exact_gap = relative_gap(measured.var_total, exact.var_total)
        quoted_gap = measured.var_total - quoted.var_total
        notes = [f"measured variance {measured.var_total:.6f}, direct formula {exact.var_total:.6f}"]
        if abs(quoted_gap) > 1e-8:
            notes.append(f"DISCREPANCY: variance quoted as equal to the mean ({quoted.var_total:.6f}) "
                         f"differs from the state by {quoted_gap:+.6f}")
            log_warning("Quoted ECS variance disagrees with the truncated state",
                        measured=measured.var_total, quoted=quoted.var_total)
        else:
            notes.append("quoted variance agrees with the state")

        if alpha == 1.0:
            mean_error = max(mean_error, abs(measured.mean_total - ECS_EXPECTED_MEAN))
        return CheckResult(
            name="ecs_moments",
            passed=bool(mean_error <= ECS_MEAN_TOLERANCE and exact_gap <= 1e-8),
            residual=mean_error,
            tolerance=ECS_MEAN_TOLERANCE,
            details={"mean": measured.mean_total, "variance": measured.var_total,
                     "quoted_variance": quoted.var_total, "direct_variance": exact.var_total},
            notes=notes,
        )


class CompleteVerificationService:
    """Service for running every verification check"""

    def __init__(self, config: Settings = settings, dim: Optional[int] = None, draws: Optional[int] = None,
                 seed: Optional[int] = None, dominance_point: Optional[Tuple[ProbeSpec, float, float]] = None):
        self.config = config.model_copy(update={
            key: value for key, value in (("dim", dim), ("draws", draws), ("seed", seed)) if value is not None
        })
        self.identity_service = IdentityCheckService(self.config)
        self.reduction_service = ReductionCheckService(self.config)
        self.lossless_service = LosslessCheckService(self.config)
        self.stationarity_service = StationarityCheckService(self.config)
        self.monotonicity_service = MonotonicityCheckService(self.config)
        self.dual_path_service = DualPathCheckService(self.config)
        self.minimization_service = MinimizationCheckService(self.config)
        self.invariance_service = InvarianceCheckService(self.config)
        self.dominance_service = DominanceCheckService(self.config)
        self.ecs_service = EcsMomentsCheckService(self.config)
        self.dominance_point = dominance_point

    def draws(self) -> List[ProbeDraw]:
        return [draw_probe(self.config.seed, index) for index in range(self.config.draws)]

    async def run_check(self, name: str, draws: Sequence[ProbeDraw]) -> CheckResult:
        dim = self.config.dim
        if name == "identities":
            return await self.identity_service.run(dim)
        if name == "reduction":
            return await self.reduction_service.run()
        if name == "lossless":
            return await self.lossless_service.run()
        if name == "stationarity":
            return await self.stationarity_service.run()
        if name == "monotonicity":
            return await self.monotonicity_service.run()
        if name == "dual_path":
            return await self.dual_path_service.run(draws, dim)
        if name == "minimization":
            return await self.minimization_service.run(draws, dim)
        if name == "invariance":
            return await self.invariance_service.run()
        if name == "dominance":
            if self.dominance_point is not None:
                return await self.dominance_service.run_point(*self.dominance_point, dim)
            return await self.dominance_service.run(draws, dim)
        if name == "ecs_moments":
            return await self.ecs_service.run()
        raise DomainError(f"Unknown check '{name}'; choose from {', '.join(CHECK_NAMES)}")

    async def verify_all(self, only: Optional[Sequence[str]] = None) -> VerificationReport:
        """Run the selected checks in a fixed order"""
        try:
            names = list(only) if only else CHECK_NAMES
            unknown = [name for name in names if name not in CHECK_NAMES]
            if unknown:
                raise DomainError(f"Unknown checks: {', '.join(unknown)}")
            log_info(f"Starting verification: {', '.join(names)}",
                     seed=self.config.seed, dim=self.config.dim, draws=self.config.draws)

            draws = self.draws()
            checks = []
            for name in names:
                check = await self.run_check(name, draws)
                log_info(f"Check {name}: {'PASS' if check.passed else 'FAIL'} (residual={check.residual:.3e})",
                         residual=check.residual)
                checks.append(check)

            return VerificationReport(seed=self.config.seed, dim=self.config.dim, draws=len(draws), checks=checks)
        except Exception as e:
            log_error("Error during verification", error=e)
            raise


class OracleService:
    """Exact QFI of the channel output next to the closed-form bound"""

    def __init__(self, config: Settings = settings):
        self.config = config

    def evaluate(self, spec: ProbeSpec, p: ChannelParams, dim: int, theta: float = 0.0) -> OracleResult:
        state = build_state(spec, dim)
        output = apply_channel(state, p, theta, gamma=0.0, cutoffs=choose_cutoffs(state, p))
        f_q = spectral_qfi(output)
        bound = cq_star(p, state_moments(state)).cq_star
        return OracleResult(f_q=f_q, cq_star=bound, gap=bound - f_q, trace_deficit=state.trace - output.trace)

    async def run_oracle(self, spec: ProbeSpec, p: ChannelParams, dim: int, theta: float = 0.0) -> OracleResult:
        try:
            log_info("Running exact QFI oracle", family=spec.family.value, eta=p.eta, nbar_b=p.nbar_b, dim=dim)
            result = (await gather_in_threads(lambda _: self.evaluate(spec, p, dim, theta), [0]))[0]
            if result.gap < -self.config.dominance_tolerance:
                log_warning("Exact QFI exceeds the closed-form bound", gap=result.gap)
            return result
        except Exception as e:
            log_error("Error running the QFI oracle", error=e)
            raise
