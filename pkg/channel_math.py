"""
Closed-form bound on the phase QFI through n uses of a lossy thermal-noise channel.

The channel (eta, nbar_b) is written as pure loss with transmissivity tau = eta/G
followed by a quantum-limited amplifier with gain G = 1 + (1 - eta) nbar_b. Phase
gauges (x, y) on the environments give equivalent Kraus decompositions; the
purification bound

    C_Q(x, y) = 4 [A(x, y) <dN_S^2> + Omega(x, y)]

is an exact quadratic in (x, y) and is minimised in closed form. Every function here
is a pure function of its inputs; theta never appears because none of the
expressions depend on it.
"""

import math
from typing import Optional

import numpy as np
from pydantic import ValidationError

from errors import DegenerateDenominatorError, DomainError
from logger import log_debug
from models import (
    BoundResult,
    ChannelParams,
    GaugeCoefficients,
    KrausGaugePoint,
    ProbeMoments,
    QuadraticSurface,
)

HESSIAN_RELATIVE_FLOOR = 1e-12


def derive_params(eta: float, nbar_b: float) -> ChannelParams:
    """Split (eta, nbar_b) into the amplifier gain G and pure-loss transmissivity tau"""
    if not (0.0 < eta <= 1.0) or not math.isfinite(eta):
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    if not (nbar_b >= 0.0) or not math.isfinite(nbar_b):
        raise DomainError(f"nbar_b must be >= 0, got {nbar_b}")

    gain = 1.0 + (1.0 - eta) * nbar_b
    tau = eta / gain
    try:
        return ChannelParams(eta=eta, nbar_b=nbar_b, gain=gain, tau=tau)
    except ValidationError as e:
        raise DomainError(str(e)) from e


def gamma_gauge(gamma: float) -> KrausGaugePoint:
    """Gauge point of the gamma channel: gamma=-1 puts the phase before the channel, 0 after"""
    return KrausGaugePoint(x=-gamma, y=gamma)


def gauge_coefficients(g: KrausGaugePoint, p: ChannelParams) -> GaugeCoefficients:
    """c2, c1, c0, d0 with <H1> = c2^2 <n^2> + c1 <n> + c0 and <H2> = c2 <n> + d0"""
    eta, nb, x, y = p.eta, p.nbar_b, g.x, g.y
    loss = 1.0 - eta
    beta = loss * nb
    gain = 1.0 + beta

    c2 = (eta + loss * ((nb + 1.0) * x + eta * nb * (y + 1.0))) / gain
    c1 = loss / gain ** 2 * (
        eta * (nb + 1.0) * x * x
        + eta * nb * (1.0 - beta * (eta - 4.0 * beta - 5.0)) * y * y
        + 2.0 * loss ** 2 * nb * (nb + 1.0) ** 2 * x * y
        + 2.0 * (nb + 1.0) * gain * (beta - eta) * x
        + 2.0 * eta * nb * gain * (3.0 - eta + 4.0 * beta) * y
        + eta * (4.0 * nb + 1.0) * gain ** 2
    )
    c0 = beta * (2.0 * beta + 1.0) * (y + 1.0) ** 2
    d0 = beta * (y + 1.0)
    return GaugeCoefficients(c2=c2, c1=c1, c0=c0, d0=d0)


def _a_surface(p: ChannelParams) -> QuadraticSurface:
    # A(x, y) = c2(x, y)^2 written out term by term
    eta, nb = p.eta, p.nbar_b
    loss = 1.0 - eta
    gain = 1.0 + nb * loss
    return QuadraticSurface(
        xx=((nb + 1.0) * loss / gain) ** 2,
        yy=(nb * eta * loss / gain) ** 2,
        xy=2.0 * nb * (nb + 1.0) * eta * loss ** 2 / gain ** 2,
        x_lin=2.0 * (nb + 1.0) * eta * loss / gain,
        y_lin=2.0 * nb * eta ** 2 * loss / gain,
        const=eta ** 2,
    )


def _omega_surface(p: ChannelParams, mean: float, n_modes: int) -> QuadraticSurface:
    eta, nb, n = p.eta, p.nbar_b, float(n_modes)
    loss = 1.0 - eta
    beta = nb * loss
    gain = 1.0 + beta
    return QuadraticSurface(
        xx=(nb + 1.0) * eta * loss * mean / gain ** 2,
        yy=nb * loss * (
            n * gain ** 3 + eta * mean * (1.0 + beta * (3.0 + 2.0 * beta - eta))
        ) / gain ** 2,
        xy=-2.0 * eta * loss ** 2 * nb * (nb + 1.0) * mean / gain ** 2,
        x_lin=-2.0 * eta * loss * (nb + 1.0) * mean / gain,
        y_lin=2.0 * nb * loss * (
            n * gain ** 2 + eta * mean * (2.0 + 2.0 * beta - eta)
        ) / gain,
        const=loss * (n * nb ** 2 * loss + eta * mean + nb * (n + 2.0 * eta * mean)),
    )


def quadratic_a(g: KrausGaugePoint, p: ChannelParams) -> float:
    return _a_surface(p).evaluate(g)


def omega_single(g: KrausGaugePoint, p: ChannelParams, probe: ProbeMoments) -> float:
    if probe.n_modes != 1:
        raise DomainError(f"omega_single needs a single-mode probe, got n={probe.n_modes}")
    return _omega_surface(p, probe.mean_total, 1).evaluate(g)


def omega_n(g: KrausGaugePoint, p: ChannelParams, probe: ProbeMoments) -> float:
    return _omega_surface(p, probe.mean_total, probe.n_modes).evaluate(g)


def quadratic_surface(p: ChannelParams, probe: ProbeMoments) -> QuadraticSurface:
    """Coefficients of C_Q(x, y) = 4 [A var_total + Omega]"""
    a_part = _a_surface(p).scaled(probe.var_total)
    return (a_part + _omega_surface(p, probe.mean_total, probe.n_modes)).scaled(4.0)


def cq_surface(g: KrausGaugePoint, p: ChannelParams, probe: ProbeMoments) -> float:
    # not clipped at zero: only the minimum is guaranteed nonnegative
    return 4.0 * (quadratic_a(g, p) * probe.var_total + omega_n(g, p, probe))


def cq_gamma(gamma: float, p: ChannelParams, probe: ProbeMoments) -> float:
    return cq_surface(gamma_gauge(gamma), p, probe)


def denominator_single(p: ChannelParams, probe: ProbeMoments) -> float:
    eta, nb = p.eta, p.nbar_b
    mean, var = probe.mean_total, probe.var_total
    return (
        (1.0 - eta) * var * (
            eta * mean * (2.0 * nb + 1.0) - eta * nb * (nb + 1.0) + (nb + 1.0) ** 2
        )
        + eta * mean * (eta * mean + (1.0 - eta) * nb + 1.0)
    )


def denominator_n(p: ChannelParams, probe: ProbeMoments) -> float:
    eta, nb, n = p.eta, p.nbar_b, float(probe.n_modes)
    mean, var = probe.mean_total, probe.var_total
    return (
        eta ** 2 * mean ** 2
        + eta * n * mean * (1.0 + (1.0 - eta) * nb)
        + (1.0 - eta) * eta * var * mean * (1.0 + 2.0 * nb)
        - (1.0 - eta) * eta * var * n * nb * (1.0 + nb)
        + (1.0 - eta) * n * var * (1.0 + nb) ** 2
    )


def _require_single(probe: ProbeMoments):
    if probe.n_modes != 1:
        raise DomainError(f"single-mode formula called with n_modes={probe.n_modes}")


def optimal_gauge_single(p: ChannelParams, probe: ProbeMoments) -> KrausGaugePoint:
    _require_single(probe)
    eta, nb = p.eta, p.nbar_b
    mean, var = probe.mean_total, probe.var_total
    denominator = denominator_single(p, probe)
    if denominator == 0.0:
        raise DegenerateDenominatorError("D = 0: stationary point is undefined for this probe")

    x0 = eta * (mean - var) * (eta * mean + (1.0 - eta) * nb + 1.0) / denominator
    y0 = -1.0 - eta * var * mean / denominator
    return KrausGaugePoint(x=x0 + 0.0, y=y0)


def optimal_gauge_n(p: ChannelParams, probe: ProbeMoments) -> KrausGaugePoint:
    eta, nb, n = p.eta, p.nbar_b, float(probe.n_modes)
    mean, var = probe.mean_total, probe.var_total
    denominator = denominator_n(p, probe)
    if denominator == 0.0:
        raise DegenerateDenominatorError("D_n = 0: stationary point is undefined for this probe")

    gain = 1.0 + (1.0 - eta) * nb
    excess = var - mean
    x0 = -(eta ** 2 * mean * excess + eta * n * excess * gain) / denominator
    y0 = (
        eta ** 2 * mean * excess
        - (n * var * (1.0 + nb) * (1.0 - eta) + eta * mean * (n + 2.0 * var)) * gain
    ) / denominator
    return KrausGaugePoint(x=x0 + 0.0, y=y0)


def hessian_condition(g0: KrausGaugePoint, p: ChannelParams, probe: ProbeMoments) -> bool:
    """Second-derivative test at the stationary point g0.

    The surface is quadratic, so the second derivatives are the constant
    coefficients and g0 only documents where the test is taken.
    """
    hessian = quadratic_surface(p, probe).hessian()
    determinant = hessian[0, 0] * hessian[1, 1] - hessian[0, 1] ** 2
    scale = float(np.max(np.abs(hessian)))
    if scale == 0.0:
        return False
    return bool(determinant > HESSIAN_RELATIVE_FLOOR * scale ** 2)


def minimum_norm_optimum(surface: QuadraticSurface) -> KrausGaugePoint:
    """Smallest-norm stationary point of a positive-semidefinite quadratic"""
    solution, _, _, _ = np.linalg.lstsq(surface.hessian(), -np.array([surface.x_lin, surface.y_lin]), rcond=None)
    g = KrausGaugePoint(x=float(solution[0]) + 0.0, y=float(solution[1]) + 0.0)
    residual = float(np.max(np.abs(surface.gradient(g))))
    scale = max(1.0, abs(surface.x_lin), abs(surface.y_lin))
    if residual > 1e-9 * scale:
        raise DegenerateDenominatorError("quadratic surface has no stationary point")
    return g


def mse_lower_bound(cq_star: float) -> float:
    return math.inf if cq_star == 0.0 else 1.0 / cq_star


def _bound_result(
    cq_star: float,
    g0: KrausGaugePoint,
    p: ChannelParams,
    probe: ProbeMoments,
) -> BoundResult:
    hessian_ok = hessian_condition(g0, p, probe)
    return BoundResult(
        cq_star=cq_star,
        x0=g0.x,
        y0=g0.y,
        hessian_ok=hessian_ok,
        mse_lower=mse_lower_bound(cq_star),
        degenerate=not hessian_ok,
    )


def _degenerate_result(p: ChannelParams, probe: ProbeMoments, strict: bool) -> BoundResult:
    if strict:
        raise DegenerateDenominatorError(
            f"degenerate bound for eta={p.eta}, mean={probe.mean_total}, var={probe.var_total}"
        )
    surface = quadratic_surface(p, probe)
    g0 = minimum_norm_optimum(surface)
    cq_star = max(surface.evaluate(g0), 0.0)
    log_debug("Degenerate bound resolved by minimum-norm stationary point",
              eta=p.eta, x0=g0.x, y0=g0.y)
    return BoundResult(
        cq_star=cq_star,
        x0=g0.x,
        y0=g0.y,
        hessian_ok=False,
        mse_lower=mse_lower_bound(cq_star),
        degenerate=True,
    )


def cq_star_single(p: ChannelParams, probe: ProbeMoments, strict: bool = False) -> BoundResult:
    _require_single(probe)
    eta, nb = p.eta, p.nbar_b
    mean, var = probe.mean_total, probe.var_total
    denominator = denominator_single(p, probe)
    if denominator == 0.0:
        return _degenerate_result(p, probe, strict)

    cq_star = 4.0 * eta * var * mean * (eta * mean + (1.0 - eta) * nb + 1.0) / denominator
    return _bound_result(cq_star, optimal_gauge_single(p, probe), p, probe)


def cq_star_n(p: ChannelParams, probe: ProbeMoments, strict: bool = False) -> BoundResult:
    eta, nb, n = p.eta, p.nbar_b, float(probe.n_modes)
    mean, var = probe.mean_total, probe.var_total
    denominator = denominator_n(p, probe)
    if denominator == 0.0:
        return _degenerate_result(p, probe, strict)

    cq_star = (
        4.0 * n * eta * var * mean * (1.0 + nb * (1.0 - eta))
        + 4.0 * eta ** 2 * var * mean ** 2
    ) / denominator
    return _bound_result(cq_star, optimal_gauge_n(p, probe), p, probe)


def cq_star(p: ChannelParams, probe: ProbeMoments, strict: bool = False) -> BoundResult:
    """Dispatch on the mode count"""
    if probe.n_modes == 1:
        return cq_star_single(p, probe, strict=strict)
    return cq_star_n(p, probe, strict=strict)


def bound_derivative_nbar(p: ChannelParams, probe: ProbeMoments) -> float:
    """dC*/dnbar_B; negative whenever eta < 1 and both moments are positive"""
    eta, nb, n = p.eta, p.nbar_b, float(probe.n_modes)
    mean, var = probe.mean_total, probe.var_total
    prefactor = 4.0 * eta * (1.0 - eta) * mean * var ** 2
    if prefactor == 0.0:
        return 0.0

    denominator = denominator_n(p, probe)
    gain = 1.0 + nb * (1.0 - eta)
    bracket = (
        n * eta * mean * (3.0 + 2.0 * nb * (1.0 - eta))
        + 2.0 * eta ** 2 * mean ** 2
        + n ** 2 * gain ** 2
    )
    return -prefactor * bracket / denominator ** 2


def stationarity_residual(g: KrausGaugePoint, p: ChannelParams, probe: ProbeMoments,
                          step: Optional[float] = None) -> float:
    """Largest central-difference partial derivative of cq_surface at g"""
    h = step if step is not None else 1e-4
    dx = (cq_surface(KrausGaugePoint(x=g.x + h, y=g.y), p, probe)
          - cq_surface(KrausGaugePoint(x=g.x - h, y=g.y), p, probe)) / (2.0 * h)
    dy = (cq_surface(KrausGaugePoint(x=g.x, y=g.y + h), p, probe)
          - cq_surface(KrausGaugePoint(x=g.x, y=g.y - h), p, probe)) / (2.0 * h)
    return max(abs(dx), abs(dy))
