"""
Truncated Fock-space building blocks: ladder operators, the Kraus operators of pure
loss and of the quantum-limited amplifier, probe states and their photon statistics.

Operator entries are assembled in log space with scipy.special.gammaln so that large
photon numbers and high gain stay finite.
"""

import math
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

from config import settings
from errors import DomainError, NotConstructibleError, TruncationBudgetError
from logger import log_debug, log_warning
from models import FockOperatorMatrix, ProbeFamily, ProbeMoments, ProbeSpec, TruncatedState


def annihilation(d: int) -> FockOperatorMatrix:
    if d < 1:
        raise DomainError(f"Fock dimension must be positive, got {d}")
    return FockOperatorMatrix(entries=np.diagflat(np.sqrt(np.arange(1, d, dtype=float)), 1))


def creation(d: int) -> FockOperatorMatrix:
    return annihilation(d).dagger()


def number(d: int, power: int = 1) -> FockOperatorMatrix:
    return FockOperatorMatrix(entries=np.diagflat(np.arange(d, dtype=float) ** power))


def build_kraus_loss(l: int, tau: float, d: int) -> FockOperatorMatrix:
    """A_l = sqrt((1-tau)^l / l!) tau^(n/2) a^l, mapping |m> to |m-l>"""
    if l < 0 or not 0.0 < tau <= 1.0:
        raise DomainError(f"loss Kraus needs l >= 0 and tau in (0, 1], got l={l}, tau={tau}")

    entries = np.zeros((d, d))
    if l >= d:
        return FockOperatorMatrix(entries=entries)
    if tau == 1.0:
        if l == 0:
            entries = np.eye(d)
        return FockOperatorMatrix(entries=entries)

    m = np.arange(l, d)
    log_entries = 0.5 * (
        gammaln(m + 1) - gammaln(l + 1) - gammaln(m - l + 1)
        + l * math.log1p(-tau) + (m - l) * math.log(tau)
    )
    entries[m - l, m] = np.exp(log_entries)
    return FockOperatorMatrix(entries=entries)


def build_kraus_amp(k: int, gain: float, d: int, out_dim: Optional[int] = None) -> FockOperatorMatrix:
    """B_k = sqrt((1/k!) (1/G) ((G-1)/G)^k) (a^dag)^k G^(-n/2), mapping |m> to |m+k>.

    The matrix is out_dim x d (square by default); components pushed past out_dim are dropped.
    """
    if k < 0 or gain < 1.0:
        raise DomainError(f"amplifier Kraus needs k >= 0 and gain >= 1, got k={k}, gain={gain}")
    rows = d if out_dim is None else out_dim

    entries = np.zeros((rows, d))
    if gain == 1.0:
        if k == 0:
            size = min(rows, d)
            entries[np.arange(size), np.arange(size)] = 1.0
        return FockOperatorMatrix(entries=entries)

    m = np.arange(0, max(0, min(d, rows - k)))
    if m.size == 0:
        return FockOperatorMatrix(entries=entries)
    log_gain = math.log(gain)
    log_entries = 0.5 * (
        gammaln(m + k + 1) - gammaln(m + 1) - gammaln(k + 1)
        + k * math.log(gain - 1.0) - (k + 1 + m) * log_gain
    )
    entries[m + k, m] = np.exp(log_entries)
    return FockOperatorMatrix(entries=entries)


def _coherent_amplitudes(alpha: float, d: int) -> np.ndarray:
    return np.sqrt(stats.poisson.pmf(np.arange(d), alpha * alpha))


def _squeezed_amplitudes(r: float, d: int) -> np.ndarray:
    amplitudes = np.zeros(d)
    if r == 0.0:
        amplitudes[0] = 1.0
        return amplitudes
    k = np.arange((d + 1) // 2)
    log_magnitude = (
        0.5 * gammaln(2 * k + 1) - k * math.log(2.0) - gammaln(k + 1)
        + k * math.log(math.tanh(r)) - 0.5 * math.log(math.cosh(r))
    )
    amplitudes[2 * k] = np.where(k % 2 == 0, 1.0, -1.0) * np.exp(log_magnitude)
    return amplitudes


def _custom_distribution(mean: float, var: float, d: int) -> np.ndarray:
    """Phase-averaged photon distribution with the requested first two moments"""
    m = np.arange(d)
    if mean == 0.0:
        if var != 0.0:
            raise NotConstructibleError("a probe with zero mean must have zero variance")
        return np.eye(1, d).ravel()
    if math.isclose(var, mean, rel_tol=1e-12):
        return stats.poisson.pmf(m, mean)
    if var > mean:
        return stats.nbinom.pmf(m, mean * mean / (var - mean), mean / var)

    success = 1.0 - var / mean
    trials = mean / success
    if not math.isclose(trials, round(trials), rel_tol=0.0, abs_tol=1e-9):
        raise NotConstructibleError(
            f"sub-Poissonian probe (mean={mean}, var={var}) needs an integral binomial trial count"
        )
    return stats.binom.pmf(m, int(round(trials)), success)


def _single_mode(spec: ProbeSpec, d: int):
    """(amplitudes or None, photon distribution) of one mode"""
    family = spec.family
    if family == ProbeFamily.coherent:
        amplitudes = _coherent_amplitudes(spec.amplitude, d)
    elif family == ProbeFamily.fock:
        if spec.photon_count >= d:
            raise TruncationBudgetError(
                f"Fock state |{spec.photon_count}> does not fit below cutoff {d}",
                deficit=1.0, budget=settings.state_tail_budget,
            )
        amplitudes = np.eye(1, d, spec.photon_count).ravel()
    elif family == ProbeFamily.squeezed_vacuum:
        amplitudes = _squeezed_amplitudes(spec.squeeze, d)
    elif family == ProbeFamily.thermal_probe:
        return None, stats.nbinom.pmf(np.arange(d), 1, 1.0 / (1.0 + spec.mean))
    elif family == ProbeFamily.custom:
        # totals shared evenly between independent modes
        return None, _custom_distribution(spec.mean / spec.n_modes, spec.var / spec.n_modes, d)
    else:
        raise NotConstructibleError(f"{family.value} is not a single-mode family")
    return amplitudes, np.abs(amplitudes) ** 2


def _check_tail(kept_mass: float, d: int, family: ProbeFamily):
    deficit = 1.0 - kept_mass
    if deficit > settings.state_tail_budget:
        raise TruncationBudgetError(
            f"{family.value} probe leaks past cutoff {d}",
            deficit=deficit, budget=settings.state_tail_budget,
        )


def _pure(amplitudes: np.ndarray, n_modes: int, d: int) -> TruncatedState:
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return TruncatedState(
        n_modes=n_modes,
        dim_per_mode=d,
        density=np.outer(amplitudes, amplitudes.conj()),
        amplitudes=amplitudes,
    )


def _ecs_amplitudes(alpha: float, d: int) -> np.ndarray:
    coherent = _coherent_amplitudes(alpha, d)
    _check_tail(float(np.sum(coherent ** 2)), d, ProbeFamily.entangled_coherent)
    vacuum = np.eye(1, d).ravel()
    amplitudes = np.kron(coherent, vacuum) + np.kron(vacuum, coherent)
    return amplitudes / np.linalg.norm(amplitudes)


def _product_distribution(spec: ProbeSpec, d: int):
    """(amplitudes or None, photon distribution) of a product probe over its modes"""
    if spec.n_modes > 2:
        raise NotConstructibleError(f"Fock-space states are limited to two modes, got {spec.n_modes}")

    amplitudes, distribution = _single_mode(spec, d)
    _check_tail(float(np.sum(distribution)), d, spec.family)
    distribution = distribution / np.sum(distribution)
    if spec.n_modes == 2:
        distribution = np.kron(distribution, distribution)
        if amplitudes is not None:
            amplitudes = np.kron(amplitudes, amplitudes)
    return amplitudes, distribution


def build_state(spec: ProbeSpec, d: int) -> TruncatedState:
    """Normalized probe state with every mode cut at d photons"""
    if d < 1:
        raise DomainError(f"Fock dimension must be positive, got {d}")

    if spec.family == ProbeFamily.entangled_coherent:
        return _pure(_ecs_amplitudes(spec.amplitude, d), 2, d)

    amplitudes, distribution = _product_distribution(spec, d)
    if amplitudes is not None:
        return _pure(amplitudes, spec.n_modes, d)
    return TruncatedState(n_modes=spec.n_modes, dim_per_mode=d, density=np.diag(distribution))


def photon_populations(spec: ProbeSpec, d: int) -> np.ndarray:
    """Joint photon-number populations of the truncated probe, without its density matrix"""
    if d < 1:
        raise DomainError(f"Fock dimension must be positive, got {d}")
    if spec.family == ProbeFamily.entangled_coherent:
        return np.abs(_ecs_amplitudes(spec.amplitude, d)) ** 2
    amplitudes, distribution = _product_distribution(spec, d)
    if amplitudes is not None:
        populations = np.abs(amplitudes) ** 2
        return populations / populations.sum()
    return distribution


def total_number_diagonal(n_modes: int, d: int) -> np.ndarray:
    """Diagonal of the total photon number N on the truncated product space"""
    per_mode = np.arange(d, dtype=float)
    if n_modes == 1:
        return per_mode
    return np.add.outer(per_mode, per_mode).ravel()


def population_moments(populations: np.ndarray, n_modes: int, d: int) -> ProbeMoments:
    """Mean and variance of the total photon number, normalized by the total population"""
    total = populations.sum()
    n_total = total_number_diagonal(n_modes, d)

    edge = populations.reshape((d,) * n_modes)
    top_mass = float(edge[-1].sum()) if n_modes == 1 else float(edge[-1, :].sum() + edge[:, -1].sum())
    if top_mass > settings.state_tail_budget:
        log_warning("State populates the top Fock level", top_mass=top_mass, dim=d)

    mean = float(populations @ n_total / total)
    second = float(populations @ n_total ** 2 / total)
    log_debug("State moments", mean=mean, second=second)
    return ProbeMoments(n_modes=n_modes, mean_total=max(mean, 0.0), var_total=max(second - mean * mean, 0.0))


def state_moments(state: TruncatedState) -> ProbeMoments:
    return population_moments(np.real(np.diag(state.density)), state.n_modes, state.dim_per_mode)
