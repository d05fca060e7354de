"""
Parameter models shared by the analytical and stochastic engines
"""

import math
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Relative tolerance for "k_p equals 2 k_c"
RESONANCE_RTOL = 1e-12


class ModelParams(BaseModel):
    """Physical parameters of the PCOPO in scaled units"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    E: float = Field(0.0, ge=0.0, description="External pump amplitude")
    delta0: float = Field(0.0, description="Pump detuning")
    delta1: float = Field(-1.0, description="Signal detuning")
    M0: float = Field(0.0, ge=0.0, description="Pump detuning modulation amplitude")
    M1: float = Field(0.0, ge=0.0, description="Signal detuning modulation amplitude")
    kp: Optional[float] = Field(None, gt=0.0, description="Photonic crystal wavenumber (defaults to 2 k_c)")

    @model_validator(mode="before")
    @classmethod
    def default_kp(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("kp") is None:
            delta1 = data.get("delta1", -1.0)
            if delta1 is None or delta1 >= 0:
                raise ValueError("delta1 must be negative when kp defaults to 2*k_c (k_c undefined)")
            data = dict(data)
            data["kp"] = 2.0 * math.sqrt(-delta1 / 2.0)
        return data

    @field_validator("E", "delta0", "delta1", "M0", "M1", "kp")
    @classmethod
    def validate_finite(cls, v):
        if v is not None and not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @property
    def kc(self) -> float:
        """Critical wavenumber sqrt(-delta1/2)"""
        if self.delta1 >= 0:
            raise ValueError("k_c is undefined for delta1 >= 0")
        return math.sqrt(-self.delta1 / 2.0)

    @property
    def is_resonant(self) -> bool:
        """True when the crystal period satisfies k_p = 2 k_c"""
        if self.delta1 >= 0:
            return False
        return abs(self.kp - 2.0 * self.kc) <= RESONANCE_RTOL * max(1.0, self.kp)

    def with_E(self, E: float) -> "ModelParams":
        return self.model_copy(update={"E": float(E)})

    def snapshot(self) -> Dict[str, float]:
        return self.model_dump()


class Scheme(str, Enum):
    """Stochastic integration schemes"""
    SPLIT_STEP = "split-step-exponential"
    SEMI_IMPLICIT = "semi-implicit"


class SimConfig(BaseModel):
    """Settings of the Langevin simulator"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_points: int = Field(256, description="Transverse grid points (power of two)")
    box_length: Optional[float] = Field(None, gt=0.0, description="Box length; defaults to box_wavelengths critical wavelengths")
    box_wavelengths: int = Field(8, ge=1, description="Critical wavelengths per box when box_length is unset")
    dt: float = Field(1e-3, gt=0.0, description="Time step")
    t_transient: float = Field(50.0, ge=0.0, description="Discarded transient duration")
    t_measure: float = Field(200.0, ge=0.0, description="Measurement duration")
    sample_interval: float = Field(0.5, gt=0.0, description="Time between stationary samples")
    n_trajectories: int = Field(8, ge=1, description="Independent trajectories")
    noise_strength: float = Field(1e-3, ge=0.0, description="Q-representation noise scale n_s")
    seed: int = Field(0, ge=0, lt=2**64, description="Master seed")
    scheme: Scheme = Field(Scheme.SPLIT_STEP, description="Integration scheme")
    nonlinear: bool = Field(True, description="Keep the -alpha1^2/2 and alpha0*conj(alpha1) terms")
    record_stride: int = Field(100, ge=1, description="Steps between near-field snapshots")
    semi_implicit_iterations: int = Field(3, ge=1, description="Midpoint iterations of the semi-implicit scheme")
    divergence_limit: float = Field(1e6, gt=0.0, description="Field modulus flagged as divergence")

    @field_validator("grid_points")
    @classmethod
    def validate_power_of_two(cls, v):
        if v < 4 or v & (v - 1):
            raise ValueError("grid_points must be a power of two >= 4")
        return v

    def resolved_box_length(self, params: ModelParams) -> float:
        if self.box_length is not None:
            return self.box_length
        return self.box_wavelengths * 2.0 * math.pi / params.kc
