import math

from pydantic import ValidationError

from errors import DomainError
from fock_space import photon_populations, population_moments
from logger import log_debug
from models import MomentMode, ProbeFamily, ProbeMoments, ProbeSpec

# Modes needed past mean + 8 sigma before the Fock tail is negligible
DIM_SIGMA_MULTIPLE = 8.0
DIM_PADDING = 10


def make_probe_spec(**fields) -> ProbeSpec:
    """Build a ProbeSpec, reporting invalid fields as a domain error"""
    try:
        return ProbeSpec(**fields)
    except ValidationError as e:
        raise DomainError(f"Invalid probe: {e.errors()[0]['msg']}") from e


def make_moments(mean: float, var: float, n_modes: int = 1) -> ProbeMoments:
    try:
        return ProbeMoments(n_modes=n_modes, mean_total=mean, var_total=var)
    except ValidationError as e:
        raise DomainError(f"Invalid moments: {e.errors()[0]['msg']}") from e


def ecs_moments_quoted(alpha: float) -> ProbeMoments:
    """ECS moments as commonly quoted: mean and variance both |a|^2 / (1 + exp(-|a|^2))"""
    a2 = alpha * alpha
    mean = a2 / (1.0 + math.exp(-a2))
    return make_moments(mean, mean, n_modes=2)


def ecs_moments_exact(alpha: float) -> ProbeMoments:
    """Moments of (|a,0> + |0,a>) evaluated directly on the normalized state.

    The cross terms <0,a|N|a,0> vanish, so
    <N> = |a|^2 / norm and <N^2> = (|a|^2 + |a|^4) / norm with norm = 1 + exp(-|a|^2).
    """
    a2 = alpha * alpha
    norm = 1.0 + math.exp(-a2)
    mean = a2 / norm
    second = (a2 + a2 * a2) / norm
    return make_moments(mean, max(second - mean * mean, 0.0), n_modes=2)


def _single_mode_moments(spec: ProbeSpec):
    family = spec.family
    if family == ProbeFamily.coherent:
        a2 = spec.amplitude ** 2
        return a2, a2
    if family == ProbeFamily.fock:
        return float(spec.photon_count), 0.0
    if family == ProbeFamily.thermal_probe:
        return spec.mean, spec.mean * spec.mean + spec.mean
    if family == ProbeFamily.squeezed_vacuum:
        nbar = math.sinh(spec.squeeze) ** 2
        return nbar, 2.0 * nbar * (nbar + 1.0)
    if family == ProbeFamily.custom:
        return spec.mean / spec.n_modes, spec.var / spec.n_modes
    raise DomainError(f"{family.value} has no single-mode moments")


def moments(spec: ProbeSpec, mode: MomentMode = MomentMode.quoted) -> ProbeMoments:
    """Total photon-number moments of a probe.

    Custom probes give their totals directly. The other families besides the
    entangled coherent state are n_modes independent copies of one single-mode
    state, so mean and variance both scale with n_modes.
    """
    if spec.family == ProbeFamily.entangled_coherent:
        if mode == MomentMode.quoted:
            return ecs_moments_quoted(spec.amplitude)
        return oracle_moments(spec)
    if spec.family == ProbeFamily.custom:
        return make_moments(spec.mean, spec.var, n_modes=spec.n_modes)

    mean, var = _single_mode_moments(spec)
    log_debug("Probe moments", family=spec.family.value, mean=mean, var=var)
    return make_moments(spec.n_modes * mean, spec.n_modes * var, n_modes=spec.n_modes)


def oracle_moments(spec: ProbeSpec) -> ProbeMoments:
    """Moments measured on the truncated Fock-space state of the probe"""
    if spec.family == ProbeFamily.entangled_coherent:
        # each mode carries the full coherent component
        a2 = spec.amplitude ** 2
        per_mode = make_moments(a2, a2)
    else:
        mean, var = _single_mode_moments(spec)
        per_mode = make_moments(mean, var)
    d = recommended_dim(per_mode)
    return population_moments(photon_populations(spec, d), spec.n_modes, d)


def recommended_dim(probe: ProbeMoments) -> int:
    """Per-mode Fock cutoff: mean + 8 sqrt(var) + 10"""
    return int(math.ceil(
        probe.mean_total + DIM_SIGMA_MULTIPLE * math.sqrt(probe.var_total) + DIM_PADDING
    ))
