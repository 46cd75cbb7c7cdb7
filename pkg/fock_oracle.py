"""
Brute-force checks of the closed-form bound in truncated Fock space.

Everything here works from explicit Kraus matrices: the operator sums behind H1 and H2,
the channel output, the numerically sampled bound surface and the exact QFI from the
spectral SLD formula. The amplifier raises photon number, so operator sums are built in
a padded working space and only the top-left block of the input cutoff is used.
"""

import math
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from channel_math import (
    HESSIAN_RELATIVE_FLOOR,
    gamma_gauge,
    gauge_coefficients,
    minimum_norm_optimum,
)
from config import settings
from errors import DomainError, NumericalError, TruncationBudgetError
from fock_space import annihilation, build_kraus_amp, build_kraus_loss, creation, total_number_diagonal
from logger import log_debug, log_warning
from models import (
    ChannelParams,
    CrossCoefficientFit,
    Cutoffs,
    HMoments,
    IdentityDeviation,
    IdentityReport,
    KrausGaugePoint,
    NumericMinimum,
    QuadraticSurface,
    TruncatedState,
)

GRID_HALF_WIDTH = 5.0
GRID_POINTS = 51
COMMUTATOR_SAMPLES = 8

# (a, b, c) exponents of l, k and n in the sums that make up H1 and H2
H2_TERMS = ((0, 0, 1), (1, 0, 0), (0, 1, 0))
H1_TERMS = ((0, 0, 2), (2, 0, 0), (0, 2, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0))


def kraus_guard(p: ChannelParams, d: int, tail_budget: Optional[float] = None) -> int:
    """Number of amplifier terms K so that row d-1 loses at most tail_budget of its mass.

    The photons added to |m> are negative-binomial NB(m + 1, 1/G); row d-1 has the
    heaviest tail of the block.
    """
    if p.gain == 1.0:
        return 0
    budget = settings.kraus_tail_budget if tail_budget is None else tail_budget
    log_budget = math.log(budget)
    success = 1.0 / p.gain

    high = max(1, int(stats.nbinom.mean(d, success)))
    while stats.nbinom.logsf(high, d, success) > log_budget:
        high *= 2
    low = 0
    while low < high:
        middle = (low + high) // 2
        if stats.nbinom.logsf(middle, d, success) > log_budget:
            low = middle + 1
        else:
            high = middle
    return low


class KrausMomentTable:
    """Operator sums  sum_{l,k} l^a k^b A_l^dag n^e B_k^dag n^c B_k A_l  on a d x d block.

    B_k lives in a working space of `working_dim` photons and k runs to `amp_terms`.
    The block is exact when working_dim >= block + amp_terms and the amplifier tail
    beyond amp_terms is negligible.
    """

    def __init__(
        self,
        p: ChannelParams,
        block: int,
        working_dim: Optional[int] = None,
        amp_terms: Optional[int] = None,
    ):
        if block < 1:
            raise DomainError(f"block size must be positive, got {block}")
        self.params = p
        self.block = block
        self.amp_terms = kraus_guard(p, block) if amp_terms is None else amp_terms
        self.working_dim = block + self.amp_terms if working_dim is None else working_dim
        if self.working_dim < block:
            raise DomainError(f"working dimension {self.working_dim} is smaller than the block {block}")

        self._loss = [build_kraus_loss(l, p.tau, block).entries for l in range(block)]
        amp = np.stack([
            build_kraus_amp(k, p.gain, block, self.working_dim).entries
            for k in range(self.amp_terms + 1)
        ])
        k_index = np.arange(self.amp_terms + 1, dtype=float)[:, None, None]
        n_work = np.arange(self.working_dim, dtype=float)[None, :, None]
        # stacked (k, row) axes flattened so each sum over k is one matrix product
        self._inner = {}
        for b in range(3):
            left = (k_index ** b * amp).reshape(-1, block)
            for c in range(3):
                self._inner[(b, c)] = left.T @ (n_work ** c * amp).reshape(-1, block)
        self._n_block = np.arange(block, dtype=float)

    def inner(self, b: int, c: int) -> np.ndarray:
        """sum_k k^b B_k^dag n^c B_k"""
        return self._inner[(b, c)]

    def loss_completeness(self) -> np.ndarray:
        return sum(op.T @ op for op in self._loss)

    def moment(self, a: int, b: int, c: int, e: int = 0) -> np.ndarray:
        inner = (self._n_block[:, None] ** e) * self.inner(b, c)
        return sum((l ** a) * (op.T @ inner @ op) for l, op in enumerate(self._loss))

    def completeness_deficit(self) -> float:
        return float(1.0 - np.min(np.diag(self.moment(0, 0, 0))))

    def h1(self, g: KrausGaugePoint) -> np.ndarray:
        """sum_{l,k} A^dag B^dag (n + l x + k y)^2 B A"""
        x, y = g.x, g.y
        return (
            self.moment(0, 0, 2) + x * x * self.moment(2, 0, 0) + y * y * self.moment(0, 2, 0)
            + 2.0 * x * self.moment(1, 0, 1) + 2.0 * y * self.moment(0, 1, 1)
            + 2.0 * x * y * self.moment(1, 1, 0)
        )

    def h2(self, g: KrausGaugePoint) -> np.ndarray:
        """sum_{l,k} A^dag B^dag (n + l x + k y) B A"""
        return self.moment(0, 0, 1) + g.x * self.moment(1, 0, 0) + g.y * self.moment(0, 1, 0)


@lru_cache(maxsize=64)
def moment_table(p: ChannelParams, d: int, cutoffs: Optional[Cutoffs] = None) -> KrausMomentTable:
    """Shared, read-only table for a channel and block size; checks the completeness budget"""
    amp_terms = None if cutoffs is None else cutoffs.amp_terms
    budget = settings.trace_budget if cutoffs is None else cutoffs.trace_budget
    table = KrausMomentTable(p, d, amp_terms=amp_terms)
    deficit = table.completeness_deficit()
    if deficit > budget:
        raise TruncationBudgetError(
            f"Kraus sums truncated at K={table.amp_terms} lose probability", deficit=deficit, budget=budget
        )
    return table


def _deviation(lhs: np.ndarray, rhs: np.ndarray, cutoffs: Dict[str, int]) -> IdentityDeviation:
    absolute = float(np.max(np.abs(lhs - rhs)))
    return IdentityDeviation(
        max_deviation=absolute,
        max_relative_deviation=absolute / max(1.0, float(np.max(np.abs(rhs)))),
        block_size=lhs.shape[0],
        cutoffs=cutoffs,
    )


def _identity_sums(table: KrausMomentTable) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    p, d = table.params, table.block
    gain, tau = p.gain, p.tau
    eye = np.eye(d)
    n = np.diag(np.arange(d, dtype=float))
    s1 = (1.0 - tau) * n
    s2 = (1.0 - tau) * (tau * n + (1.0 - tau) * n @ n)
    m1 = n - s1
    m2 = n @ n - 2.0 * n @ s1 + s2
    tail = (gain - 1.0) * (2.0 * gain - 1.0) * eye
    moment = table.moment

    return {
        "loss_completeness": (table.loss_completeness(), eye),
        "amp_completeness": (table.inner(0, 0), eye),
        "loss_mean": (moment(1, 0, 0), s1),
        "loss_square": (moment(2, 0, 0), s2),
        "loss_gain_cross": (moment(1, 1, 0), (gain - 1.0) * ((n + eye) @ s1 - s2)),
        "loss_number": (moment(1, 0, 1), gain * (n @ s1 - s2) + (gain - 1.0) * s1),
        "gain_mean_lossless": (table.inner(1, 0), (gain - 1.0) * (n + eye)),
        "number_before_gain": (moment(0, 0, 0, e=1), m1),
        "number_sandwich": (moment(0, 0, 1, e=1), gain * m2 + (gain - 1.0) * m1),
        "gain_square": (moment(0, 2, 0), (gain - 1.0) ** 2 * m2 + (gain - 1.0) * (3.0 * gain - 2.0) * m1 + tail),
        "gain_mean": (moment(0, 1, 0), (gain - 1.0) * (m1 + eye)),
        "number_after": (moment(0, 0, 1), gain * (m1 + eye) - eye),
        "number_square_after": (moment(0, 0, 2), gain ** 2 * m2 + 3.0 * gain * (gain - 1.0) * m1 + tail),
        "gain_number": (moment(0, 1, 1), gain * (gain - 1.0) * m2 + (gain - 1.0) * (3.0 * gain - 1.0) * m1 + tail),
    }


def _relative(lhs: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.max(np.abs(lhs - rhs))) / max(1.0, float(np.max(np.abs(rhs))))


def verify_commutators(p: ChannelParams, d: int, seed: Optional[int] = None) -> Dict[str, float]:
    """Largest relative deviation of each ladder-operator lemma over random monomials"""
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    a = annihilation(d).entries
    a_dag = creation(d).entries
    n_diag = np.arange(d, dtype=float)
    power = np.linalg.matrix_power
    worst = {"lower_shift": 0.0, "raise_shift": 0.0, "lower_raise_product": 0.0, "raise_lower_product": 0.0}

    for _ in range(COMMUTATOR_SAMPLES):
        l, k = (int(v) for v in rng.integers(0, 4, size=2))
        a_l, a_dag_l = power(a, l), power(a_dag, l)

        worst["lower_shift"] = max(
            worst["lower_shift"],
            _relative(a_l @ np.diag(n_diag ** k), np.diag((n_diag + l) ** k) @ a_l),
            _relative(a_l @ np.diag(p.gain ** n_diag), np.diag(p.gain ** (n_diag + l)) @ a_l),
        )
        worst["raise_shift"] = max(
            worst["raise_shift"],
            _relative(a_dag_l @ np.diag(n_diag ** k), np.diag((n_diag - l) ** k) @ a_dag_l),
            _relative(a_dag_l @ np.diag(p.tau ** n_diag), np.diag(p.tau ** (n_diag - l)) @ a_dag_l),
        )
        # a^k a^dag^k loses the top k rows to truncation
        exact = d - k
        raising = np.prod([n_diag + j for j in range(1, k + 1)], axis=0) if k else np.ones(d)
        worst["lower_raise_product"] = max(
            worst["lower_raise_product"],
            _relative((power(a, k) @ power(a_dag, k))[:exact, :exact], np.diag(raising)[:exact, :exact]),
        )
        lowering = np.prod([n_diag - j + 1 for j in range(1, k + 1)], axis=0) if k else np.ones(d)
        worst["raise_lower_product"] = max(worst["raise_lower_product"], _relative(power(a_dag, k) @ power(a, k), np.diag(lowering)))
    return worst


def identity_report(table: KrausMomentTable, seed: Optional[int] = None) -> IdentityReport:
    cutoffs = {
        "loss_terms": table.block,
        "amp_terms": table.amp_terms,
        "working_dim": table.working_dim,
    }
    identities = {
        name: _deviation(lhs, rhs, cutoffs) for name, (lhs, rhs) in _identity_sums(table).items()
    }
    return IdentityReport(
        identities=identities,
        commutators=verify_commutators(table.params, table.block, seed),
        block_size=table.block,
        working_dim=table.working_dim,
        guard=table.amp_terms,
        trace_deficit=table.completeness_deficit(),
    )


def verify_identities(p: ChannelParams, d: int, seed: Optional[int] = None) -> IdentityReport:
    """All fourteen Kraus operator sums and the ladder lemmas on the d x d block"""
    if d < 4:
        raise DomainError(f"identity suite needs d >= 4, got {d}")
    report = identity_report(KrausMomentTable(p, d), seed)
    log_debug("Identity suite finished", eta=p.eta, nbar_b=p.nbar_b, worst=report.worst())
    return report


def identity_convergence(
    p: ChannelParams,
    dims: Sequence[int] = (16, 32, 64),
    block: int = 8,
) -> Dict[int, IdentityReport]:
    """Identity deviations for a fixed block as the working space grows, with no automatic padding"""
    reports = {}
    for working_dim in dims:
        table = KrausMomentTable(p, block, working_dim=working_dim, amp_terms=working_dim - block)
        reports[working_dim] = identity_report(table)
    return reports


def _mode_marginals(state: TruncatedState) -> List[np.ndarray]:
    populations = np.real(np.diag(state.density)).reshape((state.dim_per_mode,) * state.n_modes)
    if state.n_modes == 1:
        return [populations]
    return [populations.sum(axis=1), populations.sum(axis=0)]


def choose_cutoffs(
    state: TruncatedState,
    p: ChannelParams,
    budget: Optional[float] = None,
    max_out_dim: Optional[int] = None,
) -> Cutoffs:
    """Smallest output dimension whose predicted amplifier leakage fits half the budget"""
    d = state.dim_per_mode
    if budget is None:
        budget = settings.trace_budget if state.n_modes == 1 else settings.multimode_trace_budget
    if p.gain == 1.0:
        return Cutoffs(loss_terms=d, amp_terms=0, out_dim=d, trace_budget=budget)

    if max_out_dim is None:
        max_out_dim = d + kraus_guard(p, d) if state.n_modes == 1 else settings.multimode_max_dim
    max_out_dim = max(max_out_dim, d)

    rows = np.arange(d)
    thinning = stats.binom.pmf(rows[:, None], rows[None, :], p.tau)
    post_loss = [thinning @ marginal for marginal in _mode_marginals(state)]

    out_dim = d
    while out_dim < max_out_dim:
        survival = stats.nbinom.sf(out_dim - 1 - rows, rows + 1, 1.0 / p.gain)
        if sum(float(q @ survival) for q in post_loss) <= 0.5 * budget:
            break
        out_dim += 1
    return Cutoffs(loss_terms=d, amp_terms=out_dim - 1, out_dim=out_dim, trace_budget=budget)


def _apply_local(rho: np.ndarray, kraus: Iterable[np.ndarray], mode: int, n_modes: int) -> np.ndarray:
    """sum_K K rho K^dag with K acting on one mode of a (ket..., bra...) tensor"""
    result = None
    for op in kraus:
        term = np.moveaxis(np.tensordot(op, rho, axes=([1], [mode])), 0, mode)
        term = np.moveaxis(np.tensordot(term, op.conj(), axes=([n_modes + mode], [1])), -1, n_modes + mode)
        result = term if result is None else result + term
    return result


def apply_channel(
    state: TruncatedState,
    p: ChannelParams,
    theta: float = 0.0,
    gauge: Optional[KrausGaugePoint] = None,
    gamma: Optional[float] = None,
    cutoffs: Optional[Cutoffs] = None,
) -> TruncatedState:
    """sum_{k,l} e^{i theta (n + l x + k y)} B_k A_l rho A_l^dag B_k^dag e^{-i theta (...)} on every mode"""
    if gauge is not None and gamma is not None:
        raise DomainError("pass either a gauge point or gamma, not both")
    if gamma is not None:
        gauge = gamma_gauge(gamma)
    gauge = gauge or KrausGaugePoint()
    cutoffs = cutoffs or choose_cutoffs(state, p)

    d, n_modes, out_dim = state.dim_per_mode, state.n_modes, cutoffs.out_dim
    loss_ops = [
        np.exp(1j * theta * l * gauge.x) * build_kraus_loss(l, p.tau, d).entries
        for l in range(min(cutoffs.loss_terms, d))
    ]
    amp_ops = [
        np.exp(1j * theta * k * gauge.y) * build_kraus_amp(k, p.gain, d, out_dim).entries
        for k in range(cutoffs.amp_terms + 1)
    ]

    rho = state.tensor()
    for mode in range(n_modes):
        rho = _apply_local(rho, loss_ops, mode, n_modes)
        rho = _apply_local(rho, amp_ops, mode, n_modes)

    size = out_dim ** n_modes
    phases = np.exp(1j * theta * total_number_diagonal(n_modes, out_dim))
    density = phases[:, None] * rho.reshape(size, size) * phases.conj()[None, :]
    output = TruncatedState(
        n_modes=n_modes,
        dim_per_mode=out_dim,
        density=0.5 * (density + density.conj().T),
    )

    deficit = state.trace - output.trace
    log_debug("Channel applied", out_dim=out_dim, amp_terms=cutoffs.amp_terms, deficit=deficit)
    if deficit > cutoffs.trace_budget:
        log_warning("Channel output exceeds the trace budget", deficit=deficit, budget=cutoffs.trace_budget)
        raise TruncationBudgetError(
            f"output cut at {out_dim} photons per mode", deficit=deficit, budget=cutoffs.trace_budget
        )
    return output


def trace_distance(first: TruncatedState, second: TruncatedState) -> float:
    if first.density.shape != second.density.shape:
        raise DomainError(f"cannot compare states of shapes {first.density.shape} and {second.density.shape}")
    return 0.5 * float(np.sum(np.abs(linalg.eigvalsh(first.density - second.density))))


def _expect(state: TruncatedState, operator: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", state.density, operator)))


def _require_modes(state: TruncatedState, n_modes: int, operation: str):
    if state.n_modes != n_modes:
        raise DomainError(f"{operation} needs a {n_modes}-mode state, got {state.n_modes}")


def h_moments(
    state: TruncatedState,
    gauge: KrausGaugePoint,
    p: ChannelParams,
    cutoffs: Optional[Cutoffs] = None,
) -> HMoments:
    _require_modes(state, 1, "h_moments")
    table = moment_table(p, state.dim_per_mode, cutoffs)
    return HMoments(h1_mean=_expect(state, table.h1(gauge)), h2_mean=_expect(state, table.h2(gauge)))


def cq_numeric(
    state: TruncatedState,
    gauge: KrausGaugePoint,
    p: ChannelParams,
    cutoffs: Optional[Cutoffs] = None,
) -> float:
    moments = h_moments(state, gauge, p, cutoffs)
    return 4.0 * (moments.h1_mean - moments.h2_mean ** 2)


class _TwoModeExpectations:
    """Expectations of one-mode operators embedded in a two-mode state"""

    def __init__(self, state: TruncatedState):
        _require_modes(state, 2, "two-mode bound")
        self.rho = state.tensor()

    def first(self, operator: np.ndarray) -> float:
        return float(np.real(np.einsum("ikjk,ji->", self.rho, operator)))

    def second(self, operator: np.ndarray) -> float:
        return float(np.real(np.einsum("kikj,ji->", self.rho, operator)))

    def both(self, first: np.ndarray, second: np.ndarray) -> float:
        return float(np.real(np.einsum("abcd,ca,db->", self.rho, first, second)))


def cq_numeric_multimode(
    state: TruncatedState,
    gauge: KrausGaugePoint,
    p: ChannelParams,
    cutoffs: Optional[Cutoffs] = None,
) -> float:
    """Two-mode bound with per-mode H1, H2 and the H2 cross-covariance.

    The ordered double sum with factor 8 is twice the covariance summed over unordered pairs.
    """
    expectations = _TwoModeExpectations(state)
    table = moment_table(p, state.dim_per_mode, cutoffs)
    h1, h2 = table.h1(gauge), table.h2(gauge)

    h2_means = (expectations.first(h2), expectations.second(h2))
    local = (expectations.first(h1) - h2_means[0] ** 2) + (expectations.second(h1) - h2_means[1] ** 2)
    covariance = expectations.both(h2, h2) - h2_means[0] * h2_means[1]
    return 4.0 * local + 8.0 * covariance


def fit_cross_coefficient(
    state: TruncatedState,
    p: ChannelParams,
    gauges: Sequence[KrausGaugePoint],
    cutoffs: Optional[Cutoffs] = None,
) -> CrossCoefficientFit:
    """Regress the measured cross coefficient d1 on c2 across gauge points.

    d1 = (<H2 H2> - c2^2 <n_1 n_2> - d0^2) / (d0 (<n_1> + <n_2>))
    """
    expectations = _TwoModeExpectations(state)
    table = moment_table(p, state.dim_per_mode, cutoffs)
    n = np.diag(np.arange(state.dim_per_mode, dtype=float))
    n_sum = expectations.first(n) + expectations.second(n)
    n_cross = expectations.both(n, n)

    c2_values, d1_values = [], []
    for g in gauges:
        coefficients = gauge_coefficients(g, p)
        scale = coefficients.d0 * n_sum
        if abs(scale) < 1e-12:
            continue
        h2 = table.h2(g)
        cross = expectations.both(h2, h2)
        c2_values.append(coefficients.c2)
        d1_values.append((cross - coefficients.c2 ** 2 * n_cross - coefficients.d0 ** 2) / scale)

    if len(set(np.round(c2_values, 12))) < 2:
        raise DomainError("cross-coefficient fit needs nbar_b > 0, eta < 1 and gauges away from y = -1")
    slope, intercept = np.polyfit(c2_values, d1_values, 1)
    residual = float(np.max(np.abs(np.asarray(d1_values) - (slope * np.asarray(c2_values) + intercept))))
    return CrossCoefficientFit(slope=float(slope), intercept=float(intercept), residual=residual,
                               samples=len(c2_values))


class _BoundEvaluator:
    """C_Q(x, y) from precomputed expectations; accepts numpy arrays for x and y"""

    def __init__(self, state: TruncatedState, p: ChannelParams, cutoffs: Optional[Cutoffs]):
        table = moment_table(p, state.dim_per_mode, cutoffs)
        terms = sorted(set(H1_TERMS + H2_TERMS))
        operators = {term: table.moment(*term) for term in terms}
        self.two_mode = state.n_modes == 2
        if self.two_mode:
            expectations = _TwoModeExpectations(state)
            self.means = [
                {term: expectations.first(op) for term, op in operators.items()},
                {term: expectations.second(op) for term, op in operators.items()},
            ]
            self.cross = {
                (u, v): expectations.both(operators[u], operators[v]) for u in H2_TERMS for v in H2_TERMS
            }
        else:
            _require_modes(state, 1, "numeric bound")
            self.means = [{term: _expect(state, op) for term, op in operators.items()}]

    @staticmethod
    def _h2_weights(x, y):
        return {(0, 0, 1): 1.0, (1, 0, 0): x, (0, 1, 0): y}

    @staticmethod
    def _h1(s, x, y):
        return (s[(0, 0, 2)] + x * x * s[(2, 0, 0)] + y * y * s[(0, 2, 0)]
                + 2.0 * x * s[(1, 0, 1)] + 2.0 * y * s[(0, 1, 1)] + 2.0 * x * y * s[(1, 1, 0)])

    def __call__(self, x, y):
        weights = self._h2_weights(x, y)
        h2_means = [sum(w * s[term] for term, w in weights.items()) for s in self.means]
        value = 4.0 * sum(self._h1(s, x, y) - h2 ** 2 for s, h2 in zip(self.means, h2_means))
        if self.two_mode:
            cross = sum(weights[u] * weights[v] * self.cross[(u, v)] for u in H2_TERMS for v in H2_TERMS)
            value = value + 8.0 * (cross - h2_means[0] * h2_means[1])
        return value


def _fit_quadratic(x: np.ndarray, y: np.ndarray, values: np.ndarray) -> QuadraticSurface:
    design = np.column_stack([x * x, y * y, x * y, x, y, np.ones_like(x)])
    coefficients, _, _, _ = np.linalg.lstsq(design, values, rcond=None)
    return QuadraticSurface(**dict(zip(("xx", "yy", "xy", "x_lin", "y_lin", "const"), map(float, coefficients))))


def minimize_cq_numeric(
    state: TruncatedState,
    p: ChannelParams,
    cutoffs: Optional[Cutoffs] = None,
) -> NumericMinimum:
    """Grid scan of the numeric bound on [-5, 5]^2, then the exact minimum of the fitted quadratic"""
    evaluate = _BoundEvaluator(state, p, cutoffs)
    axis = np.linspace(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, GRID_POINTS)
    grid_x, grid_y = (v.ravel() for v in np.meshgrid(axis, axis, indexing="ij"))
    values = np.asarray(evaluate(grid_x, grid_y), dtype=float)
    surface = _fit_quadratic(grid_x, grid_y, values)

    hessian = surface.hessian()
    scale = float(np.max(np.abs(hessian)))
    flat = scale <= 1e-12 * max(1.0, abs(surface.const))
    determinant = hessian[0, 0] * hessian[1, 1] - hessian[0, 1] ** 2
    if flat:
        log_warning("Numeric bound surface is flat; every gauge gives the same value", eta=p.eta)
        g = KrausGaugePoint()
    elif determinant > HESSIAN_RELATIVE_FLOOR * scale ** 2:
        solution = np.linalg.solve(hessian, -np.array([surface.x_lin, surface.y_lin]))
        g = KrausGaugePoint(x=float(solution[0]), y=float(solution[1]))
    else:
        log_debug("Numeric bound surface is singular; taking the minimum-norm optimum", eta=p.eta)
        g = minimum_norm_optimum(surface)

    return NumericMinimum(
        x_min=g.x,
        y_min=g.y,
        c_min=float(evaluate(g.x, g.y)),
        grid_min=float(values.min()),
        flat=flat,
    )


def qfi_exact(
    state: TruncatedState,
    p: ChannelParams,
    theta: float = 0.0,
    cutoffs: Optional[Cutoffs] = None,
    tolerance: Optional[float] = None,
) -> float:
    """QFI of the channel output; the phase acts after loss and amplification"""
    return spectral_qfi(apply_channel(state, p, theta, gamma=0.0, cutoffs=cutoffs), tolerance)


def spectral_qfi(output: TruncatedState, tolerance: Optional[float] = None) -> float:
    """Spectral SLD formula with d(rho)/d(theta) = i[N, rho]; near-null pairs are skipped"""
    n_total = total_number_diagonal(output.n_modes, output.dim_per_mode)
    rho = output.density
    derivative = 1j * (n_total[:, None] * rho - rho * n_total[None, :])

    try:
        eigenvalues, vectors = linalg.eigh(rho)
    except linalg.LinAlgError as e:
        raise NumericalError(f"eigendecomposition of the output state failed: {e}") from e

    largest = float(eigenvalues.max())
    if largest <= 0.0:
        return 0.0
    floor = (settings.sld_tolerance if tolerance is None else tolerance) * largest
    rotated = vectors.conj().T @ derivative @ vectors
    pair_sums = eigenvalues[:, None] + eigenvalues[None, :]
    kept = pair_sums > floor
    return float(np.sum(2.0 * np.abs(rotated[kept]) ** 2 / pair_sums[kept]))
