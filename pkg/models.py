import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ChannelParams(BaseModel):
    """Lossy thermal-noise channel, split into pure loss (tau) and amplifier (gain)"""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(gt=0.0, le=1.0)
    nbar_b: float = Field(ge=0.0)
    gain: float
    tau: float

    @model_validator(mode="after")
    def _check_decomposition(self):
        if self.gain < 1.0 or not 0.0 < self.tau <= 1.0:
            raise ValueError("gain must be >= 1 and tau in (0, 1]")
        if not math.isclose(self.tau * self.gain, self.eta, rel_tol=1e-12):
            raise ValueError("tau * gain must equal eta")
        return self


class KrausGaugePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float = 0.0
    y: float = 0.0

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("gauge coordinates must be finite")
        return value


class ProbeMoments(BaseModel):
    """Total photon-number moments of an n-mode probe"""

    model_config = ConfigDict(frozen=True)

    n_modes: int = Field(default=1, ge=1)
    mean_total: float = Field(ge=0.0)
    var_total: float = Field(ge=0.0)


class GaugeCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    c2: float
    c1: float
    c0: float
    d0: float


class QuadraticSurface(BaseModel):
    """f(x, y) = xx*x^2 + yy*y^2 + xy*x*y + x_lin*x + y_lin*y + const"""

    model_config = ConfigDict(frozen=True)

    xx: float
    yy: float
    xy: float
    x_lin: float
    y_lin: float
    const: float

    def evaluate(self, g: KrausGaugePoint) -> float:
        x, y = g.x, g.y
        return (self.xx * x * x + self.yy * y * y + self.xy * x * y
                + self.x_lin * x + self.y_lin * y + self.const)

    def gradient(self, g: KrausGaugePoint) -> np.ndarray:
        return np.array([
            2.0 * self.xx * g.x + self.xy * g.y + self.x_lin,
            2.0 * self.yy * g.y + self.xy * g.x + self.y_lin,
        ])

    def hessian(self) -> np.ndarray:
        return np.array([[2.0 * self.xx, self.xy], [self.xy, 2.0 * self.yy]])

    def scaled(self, factor: float) -> "QuadraticSurface":
        return QuadraticSurface(
            xx=factor * self.xx, yy=factor * self.yy, xy=factor * self.xy,
            x_lin=factor * self.x_lin, y_lin=factor * self.y_lin, const=factor * self.const,
        )

    def __add__(self, other: "QuadraticSurface") -> "QuadraticSurface":
        return QuadraticSurface(
            xx=self.xx + other.xx, yy=self.yy + other.yy, xy=self.xy + other.xy,
            x_lin=self.x_lin + other.x_lin, y_lin=self.y_lin + other.y_lin,
            const=self.const + other.const,
        )


class BoundResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    cq_star: float
    x0: float
    y0: float
    hessian_ok: bool
    mse_lower: float
    degenerate: bool = False


class ProbeFamily(str, Enum):
    coherent = "coherent"
    fock = "fock"
    thermal_probe = "thermal_probe"
    squeezed_vacuum = "squeezed_vacuum"
    entangled_coherent = "entangled_coherent"
    custom = "custom"


class MomentMode(str, Enum):
    quoted = "paper-moments"
    oracle = "oracle-moments"


class ProbeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: ProbeFamily
    amplitude: float = Field(default=0.0, ge=0.0)
    photon_count: int = Field(default=0, ge=0)
    mean: float = Field(default=0.0, ge=0.0)
    squeeze: float = Field(default=0.0, ge=0.0)
    var: float = Field(default=0.0, ge=0.0)
    n_modes: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _ecs_is_two_mode(self):
        if self.family == ProbeFamily.entangled_coherent and self.n_modes != 2:
            raise ValueError("entangled coherent probes have exactly two modes")
        return self


class Cutoffs(BaseModel):
    """Kraus index cutoffs L (loss) and K (amplifier) plus the output dimension per mode"""

    model_config = ConfigDict(frozen=True)

    loss_terms: int = Field(ge=1)
    amp_terms: int = Field(ge=0)
    out_dim: int = Field(ge=1)
    trace_budget: float = Field(default=1e-10, gt=0.0)


class FockOperatorMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray

    @field_validator("entries")
    @classmethod
    def _square(cls, value: np.ndarray) -> np.ndarray:
        value = np.array(value)
        if value.ndim != 2:
            raise ValueError("operator entries must be a matrix")
        value.setflags(write=False)
        return value

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def __matmul__(self, other: "FockOperatorMatrix") -> "FockOperatorMatrix":
        return FockOperatorMatrix(entries=self.entries @ other.entries)

    def dagger(self) -> "FockOperatorMatrix":
        return FockOperatorMatrix(entries=self.entries.conj().T)


class TruncatedState(BaseModel):
    """Density matrix over `n_modes` modes, each cut at `dim_per_mode` photons"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_modes: int = Field(ge=1, le=2)
    dim_per_mode: int = Field(ge=1)
    density: np.ndarray
    amplitudes: Optional[np.ndarray] = None

    @field_validator("density")
    @classmethod
    def _own_copy(cls, value: np.ndarray) -> np.ndarray:
        return np.array(value, dtype=complex)

    @model_validator(mode="after")
    def _check_density(self):
        size = self.dim_per_mode ** self.n_modes
        if self.density.shape != (size, size):
            raise ValueError(f"density must be {size}x{size}, got {self.density.shape}")
        if not np.allclose(self.density, self.density.conj().T, atol=1e-12, rtol=0.0):
            raise ValueError("density matrix is not Hermitian")
        self.density.setflags(write=False)
        return self

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.density)))

    def tensor(self) -> np.ndarray:
        """Density as an array with one ket and one bra axis per mode"""
        shape = (self.dim_per_mode,) * (2 * self.n_modes)
        return self.density.reshape(shape)


class IdentityDeviation(BaseModel):
    max_deviation: float
    max_relative_deviation: float
    block_size: int
    cutoffs: Dict[str, int]


class IdentityReport(BaseModel):
    identities: Dict[str, IdentityDeviation]
    commutators: Dict[str, float]
    block_size: int
    working_dim: int
    guard: int
    trace_deficit: float

    def worst(self) -> float:
        values = [d.max_relative_deviation for d in self.identities.values()]
        return max(values + list(self.commutators.values()))


class HMoments(BaseModel):
    h1_mean: float
    h2_mean: float


class NumericMinimum(BaseModel):
    x_min: float
    y_min: float
    c_min: float
    grid_min: float
    flat: bool = False


class CrossCoefficientFit(BaseModel):
    slope: float
    intercept: float
    residual: float
    samples: int


class OracleResult(BaseModel):
    f_q: float
    cq_star: float
    gap: float
    trace_deficit: float


class CheckResult(BaseModel):
    name: str
    passed: bool
    residual: float
    tolerance: float
    details: Dict[str, Any] = {}
    notes: List[str] = []


class VerificationReport(BaseModel):
    seed: int
    dim: int
    draws: int
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class SweepSpec(BaseModel):
    etas: List[float] = Field(default=[0.1, 0.4, 0.7], min_length=1)
    nbar_start: float = Field(default=0.0, ge=0.0)
    nbar_stop: float = Field(default=5.0, ge=0.0)
    nbar_count: int = Field(default=101, ge=2)
    probe: ProbeSpec = ProbeSpec(family=ProbeFamily.entangled_coherent, amplitude=1.0, n_modes=2)
    moment_mode: MomentMode = MomentMode.quoted
    output_path: Optional[str] = None

    @field_validator("etas")
    @classmethod
    def _valid_etas(cls, value: List[float]) -> List[float]:
        if any(not 0.0 < eta <= 1.0 for eta in value):
            raise ValueError("every eta must lie in (0, 1]")
        return value

    @model_validator(mode="after")
    def _ordered_range(self):
        if self.nbar_stop < self.nbar_start:
            raise ValueError("nbar range must be nondecreasing")
        return self


class SweepRow(BaseModel):
    eta: float
    nbar_b: float
    n_modes: int
    mean_ns: float
    var_ns: float
    x0: float
    y0: float
    cq_star: float
    mse_lower: float


class ProbeDraw(BaseModel):
    """One randomly drawn (channel, probe) pair of a verification batch"""

    index: int
    eta: float
    nbar_b: float
    probe: ProbeSpec
