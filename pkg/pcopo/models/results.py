"""
Result records produced by the engines and the sweep executor
"""

import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


@dataclass(frozen=True)
class MomentSet:
    """Stationary normally-ordered second moments of the modes +k_c and -k_c"""
    n_plus: float
    n_minus: float
    anom_cross: complex
    anom_plus: complex
    anom_minus: complex
    hop: complex

    def scaled(self, factor: float) -> "MomentSet":
        return MomentSet(
            n_plus=self.n_plus * factor,
            n_minus=self.n_minus * factor,
            anom_cross=self.anom_cross * factor,
            anom_plus=self.anom_plus * factor,
            anom_minus=self.anom_minus * factor,
            hop=self.hop * factor,
        )

    def as_array(self) -> List[complex]:
        return [complex(self.n_plus), complex(self.n_minus), self.anom_cross,
                self.anom_plus, self.anom_minus, self.hop]

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, complex):
                out[f"{key}_re"] = value.real
                out[f"{key}_im"] = value.imag
            else:
                out[key] = value
        return out


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature angle theta and superposition angle phi (radians)"""
    theta: float
    phi: float

    def reduced(self) -> "QuadratureSpec":
        two_pi = 2.0 * math.pi
        return QuadratureSpec(self.theta % two_pi, self.phi % two_pi)

    def partner(self) -> "QuadratureSpec":
        """Angles of the EPR partner combination (theta + pi/2, phi + pi)"""
        return QuadratureSpec(self.theta + math.pi / 2.0, self.phi + math.pi)

    def conjugate(self) -> "QuadratureSpec":
        """Angles of the canonically conjugate combination (theta + pi/2, phi)"""
        return QuadratureSpec(self.theta + math.pi / 2.0, self.phi)


class BoundConvention(str, Enum):
    """Right-hand side of the Duan inequality"""
    AS_PRINTED = "as-printed"   # 2 (w^2 + 1/w)
    STANDARD = "standard"       # 2 (w^2 + 1/w^2)


@dataclass
class EntanglementReport:
    """Duan and Reid criteria evaluated at one pair of angles"""
    theta: float = 0.0
    phi: float = 0.0
    duan_sum: float = math.nan
    duan_bound: float = math.nan
    duan_weight: float = 1.0
    reid_product: float = math.nan
    reid_lambda: float = math.nan
    entangled_duan: bool = False
    entangled_reid: bool = False

    def merge(self, other: "EntanglementReport") -> "EntanglementReport":
        """Combine the Duan fields of self with the Reid fields of other"""
        return replace(self, reid_product=other.reid_product, reid_lambda=other.reid_lambda,
                       entangled_reid=other.entangled_reid)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TwinBeamReport:
    """Normally-ordered photon-number-difference variance between +k_c and -k_c"""
    raw_variance: float
    shot_noise: float
    normalized: float

    @property
    def nonclassical(self) -> bool:
        return self.normalized < 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class Observable(str, Enum):
    INTENSITY = "intensity"
    SPECTRUM = "spectrum"
    THRESHOLD = "threshold"
    MIN_VARIANCE = "min_variance"
    DUAN_MAP = "duan_map"
    REID_MAP = "reid_map"
    TWIN_BEAMS = "twin_beams"
    VARIANCE_MAP = "variance_map"
    SIMULATE = "simulate"


class Engine(str, Enum):
    ANALYTIC = "analytic"
    LANGEVIN = "langevin"
    BOTH = "both"


# Fields a sweep axis may scan, plus the per-point relative pump
SWEEPABLE_FIELDS = ("E", "delta0", "delta1", "M0", "M1", "kp", "E_relative")


class SweepSpec(BaseModel):
    """Grid of parameter values and the observable evaluated on it"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    axes: List[Tuple[str, List[float]]] = Field(default_factory=list, description="(parameter, values) pairs")
    observable: Observable = Field(Observable.INTENSITY, description="Observable to evaluate")
    engine: Engine = Field(Engine.ANALYTIC, description="Engine used for the observable")
    output_path: str = Field("results.csv", description="CSV or JSON output file")
    omega: List[float] = Field(default_factory=lambda: [0.0], description="Frequencies for the spectrum observable")
    theta_points: int = Field(181, ge=2, description="Theta samples for angle maps")
    phi_points: int = Field(181, ge=2, description="Phi samples for angle maps")
    duan_weight: float = Field(1.0, description="Duan balance parameter")
    duan_convention: BoundConvention = Field(BoundConvention.AS_PRINTED, description="Duan bound convention")
    E_relative: Optional[float] = Field(None, gt=0.0, description="Pump as a fraction of each point's threshold")

    @field_validator("axes")
    @classmethod
    def validate_axes(cls, v):
        seen = set()
        for name, values in v:
            if name not in SWEEPABLE_FIELDS:
                raise ValueError(f"unknown sweep parameter '{name}' (valid: {', '.join(SWEEPABLE_FIELDS)})")
            if name in seen:
                raise ValueError(f"duplicate sweep parameter '{name}'")
            seen.add(name)
            if not values:
                raise ValueError(f"axis '{name}' has no values")
            if not all(math.isfinite(x) for x in values):
                raise ValueError(f"axis '{name}' contains non-finite values")
        if "E" in seen and "E_relative" in seen:
            raise ValueError("axes E and E_relative are mutually exclusive")
        return v

    @field_validator("duan_weight")
    @classmethod
    def validate_weight(cls, v):
        if v == 0 or not math.isfinite(v):
            raise ValueError("duan_weight must be finite and non-zero")
        return v


@dataclass
class ResultRecord:
    """One self-describing evaluation of an observable"""
    params: Dict[str, float]
    observable: str
    values: Dict[str, Any]
    engine: str
    version: str
    seed: Optional[int] = None
    error_bars: Dict[str, Any] = field(default_factory=dict)
    above_threshold: bool = False
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResultRecord":
        return cls(**data)
