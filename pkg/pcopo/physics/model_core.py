"""
Linear-response core of the few-mode PCOPO model

Fourier convention: time dependence e^{-i omega t}. The 4-mode vector is
(a(k_c), a(-k_c), a^dag(-k_c), a^dag(k_c)) and L acts as L a = a_in.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy import linalg

from ..errors import ParameterError, SingularMatrixError
from ..models.params import ModelParams

logger = logging.getLogger(__name__)

# |D(omega)| below this fraction of the empty-cavity |D(0)| counts as singular
DEFAULT_SINGULARITY_FLOOR = 1e-12

# Condition-number bound for numeric inversion
DEFAULT_MAX_CONDITION = 1e12

ComplexMatrix = np.ndarray


@dataclass(frozen=True)
class PumpSteadyState:
    """Three-mode pump steady state A(0), A(+k_p), A(-k_p)"""
    a0_0: complex
    a0_plus: complex
    a0_minus: complex

    def as_dict(self) -> Dict[int, complex]:
        """Amplitudes keyed by harmonic index n of n*k_p"""
        return {0: self.a0_0, 1: self.a0_plus, -1: self.a0_minus}


@dataclass(frozen=True)
class CouplingConstants:
    """Effective pump S = A(0) and harmonic ratio kappa = A(k_p)/A(0)"""
    S: complex
    kappa: complex


@dataclass(frozen=True)
class DecoupledModes:
    """
    Independent degenerate oscillators c+- = (a(k_c) -+ i a(-k_c))/sqrt(2)

    Each obeys dc/dt = -(1 + i*detuning) c + gain c^dag + noise.
    """
    detuning_plus: float
    detuning_minus: float
    gain_plus: complex
    gain_minus: complex

    @property
    def g_plus(self) -> float:
        return abs(self.gain_plus) ** 2

    @property
    def g_minus(self) -> float:
        return abs(self.gain_minus) ** 2

    def eigenvalues(self) -> np.ndarray:
        """Drift eigenvalues 1 +- sqrt(|G|^2 - detuning^2) of both blocks"""
        roots = [
            np.sqrt(complex(self.g_plus - self.detuning_plus ** 2)),
            np.sqrt(complex(self.g_minus - self.detuning_minus ** 2)),
        ]
        return np.array([1 + roots[0], 1 - roots[0], 1 + roots[1], 1 - roots[1]])

    def stability_margin(self) -> float:
        """Smallest real part of the drift eigenvalues; zero at threshold"""
        return float(np.min(self.eigenvalues().real))


@dataclass(frozen=True)
class NumericInverse:
    """Result of a pivoted numeric inversion"""
    matrix: ComplexMatrix
    residual: float
    condition: float


def _require_critical_wavenumber(params: ModelParams) -> None:
    if params.delta1 >= 0:
        raise ParameterError("k_c = sqrt(-delta1/2) requires delta1 < 0", field="delta1")


def _require_resonance(params: ModelParams) -> None:
    _require_critical_wavenumber(params)
    if not params.is_resonant:
        raise ParameterError(
            f"closed forms require kp = 2*k_c = {2 * params.kc:.12g}, got {params.kp:.12g}",
            field="kp",
        )


def pump_steady_state(params: ModelParams) -> PumpSteadyState:
    """
    Pump steady state truncated to the harmonics 0 and +-k_p.

    Args:
        params: Model parameters

    Returns:
        PumpSteadyState with a0_minus = -a0_plus
    """
    eta = 1 + 1j * params.delta0 + 1j * params.kp ** 2
    a0_0 = params.E / ((1 + 1j * params.delta0) + params.M0 ** 2 / (2 * eta))
    a0_plus = -(params.M0 / 2) * a0_0 / eta
    return PumpSteadyState(a0_0=complex(a0_0), a0_plus=complex(a0_plus), a0_minus=complex(-a0_plus))


def pump_harmonics(params: ModelParams, n_max: int = 8) -> np.ndarray:
    """
    Untruncated pump steady state over harmonics |n| <= n_max.

    Solves (1 + i delta0 + i (n k_p)^2) A_n + (M0/2)(A_{n-1} - A_{n+1}) = delta_{n0} E
    as a tridiagonal system.

    Args:
        params: Model parameters
        n_max: Highest harmonic kept

    Returns:
        Complex array of length 2*n_max + 1; entry n + n_max holds A(n k_p)
    """
    if n_max < 1:
        raise ParameterError("n_max must be at least 1", field="n_max")

    n = np.arange(-n_max, n_max + 1)
    size = n.size
    banded = np.zeros((3, size), dtype=complex)
    banded[0, 1:] = -params.M0 / 2
    banded[1, :] = 1 + 1j * params.delta0 + 1j * (n * params.kp) ** 2
    banded[2, :-1] = params.M0 / 2

    rhs = np.zeros(size, dtype=complex)
    rhs[n_max] = params.E
    return linalg.solve_banded((1, 1), banded, rhs)


def coupling_constants(params: ModelParams) -> CouplingConstants:
    """S and kappa of the resonant (k_p = 2 k_c) few-mode reduction"""
    _require_resonance(params)
    pump = pump_steady_state(params)
    kappa = (-params.M0 / 2) / (1 + 1j * params.delta0 + 1j * params.kp ** 2)
    return CouplingConstants(S=pump.a0_0, kappa=complex(kappa))


def kappa_bar(params: ModelParams) -> complex:
    """Harmonic ratio (-M0/2)/(1 + i delta0 + i k_p^2) for an arbitrary k_p"""
    return complex((-params.M0 / 2) / (1 + 1j * params.delta0 + 1j * params.kp ** 2))


def detuning_profile(params: ModelParams, x: np.ndarray, field: str = "signal") -> np.ndarray:
    """Local detuning delta_i + M_i sin(k_p x) of the pump or the signal"""
    x = np.asarray(x, dtype=float)
    if field == "pump":
        return params.delta0 + params.M0 * np.sin(params.kp * x)
    if field == "signal":
        return params.delta1 + params.M1 * np.sin(params.kp * x)
    raise ParameterError(f"unknown field '{field}' (expected 'pump' or 'signal')", field="field")


def build_L(params: ModelParams, omega: float) -> ComplexMatrix:
    """4x4 linear-response matrix of the modes +-k_c"""
    c = coupling_constants(params)
    u = 1 - 1j * omega
    m = params.M1 / 2
    S, kS = c.S, c.kappa * c.S
    Sc, kSc = np.conj(S), np.conj(kS)
    return np.array([
        [u, m, -S, -kS],
        [-m, u, kS, -S],
        [-Sc, kSc, u, -m],
        [-kSc, -Sc, m, u],
    ], dtype=complex)


def build_L6(params: ModelParams, k: float, omega: float) -> ComplexMatrix:
    """
    6x6 response matrix coupling the modes k, k + k_p and k - k_p.

    Vector order: (a(k), a(k+k_p), a(k-k_p), a^dag(-k), a^dag(-k-k_p), a^dag(-k+k_p)).
    Pump harmonics beyond +-k_p and signal modes beyond the three are dropped.
    """
    if abs(k) > params.kp:
        raise ParameterError(f"|k| = {abs(k):.6g} exceeds kp = {params.kp:.6g}", field="k")

    offsets = (0, 1, -1)
    slot = {n: j for j, n in enumerate(offsets)}
    pump = pump_steady_state(params).as_dict()
    half_m1 = params.M1 / 2

    L6 = np.zeros((6, 6), dtype=complex)
    for j, n in enumerate(offsets):
        q = k + n * params.kp
        L6[j, j] = 1 + 1j * params.delta1 + 2j * q ** 2 - 1j * omega
        L6[j + 3, j + 3] = 1 - 1j * params.delta1 - 2j * q ** 2 - 1j * omega

        # a(q + k_p) enters with -M1/2 and a(q - k_p) with +M1/2
        for step, sign in ((1, -1.0), (-1, 1.0)):
            other = slot.get(n + step)
            if other is not None:
                L6[j, other] += sign * half_m1
                L6[j + 3, other + 3] -= sign * half_m1

        for harmonic, amplitude in pump.items():
            other = slot.get(n - harmonic)
            if other is not None:
                L6[j, other + 3] -= amplitude
            other = slot.get(n + harmonic)
            if other is not None:
                L6[j + 3, other] -= np.conj(amplitude)
    return L6


def restrict_L6(L6: ComplexMatrix) -> ComplexMatrix:
    """Rows and columns of the modes +-k_c when k = k_c and k_p = 2 k_c"""
    keep = [0, 2, 3, 5]
    return L6[np.ix_(keep, keep)]


def decoupled_modes(params: ModelParams) -> DecoupledModes:
    """Split the 4-mode model into the c+ and c- oscillators"""
    c = coupling_constants(params)
    m = params.M1 / 2
    return DecoupledModes(
        detuning_plus=m,
        detuning_minus=-m,
        gain_plus=complex(c.S * (c.kappa - 1j)),
        gain_minus=complex(c.S * (c.kappa + 1j)),
    )


def drift_eigenvalues(params: ModelParams) -> np.ndarray:
    """Eigenvalues of L(omega=0); all real parts positive below threshold"""
    return np.linalg.eigvals(build_L(params, 0.0))


def singularity_floor(params: ModelParams, floor: float = DEFAULT_SINGULARITY_FLOOR) -> float:
    """Absolute |D| floor: floor times |D(0)| of the empty cavity"""
    return floor * (1 + (params.M1 / 2) ** 2) ** 2


def closed_form_terms(params: ModelParams, omega: float) -> Dict[str, complex]:
    """
    Scalar building blocks of the closed-form inverse.

    With u = 1 - i omega, m = M1/2, h = |S|^2 (1 + |kappa|^2), c3 = |S|^2 (kappa - kappa*):
    r = u^2 + m^2 - h and D = r^2 + c3^2.
    """
    c = coupling_constants(params)
    S, kappa = c.S, c.kappa
    u = 1 - 1j * omega
    m = params.M1 / 2
    s2 = abs(S) ** 2
    h = s2 * (1 + abs(kappa) ** 2)
    c3 = s2 * (kappa - np.conj(kappa))
    r = u ** 2 + m ** 2 - h
    return {
        "r": r,
        "c3": c3,
        "D": r ** 2 + c3 ** 2,
        "U": u * r + m * c3,
        "U'": u * r - m * c3,
        "V": u * c3 - m * r,
        "V'": u * c3 + m * r,
        "W": S * (r - kappa * c3),
        "W'": np.conj(S) * (r + np.conj(kappa) * c3),
        "Z": S * (kappa * r + c3),
        "Z'": np.conj(S) * (c3 - np.conj(kappa) * r),
    }


def invert_L_closed(params: ModelParams, omega: float, floor: float = DEFAULT_SINGULARITY_FLOOR) -> ComplexMatrix:
    """
    Closed-form inverse of build_L(params, omega).

    Printed forms of these entries carry an extra factor 2 and use
    2|S|^2(1 + kappa^2) where 2|S|^2(1 + |kappa|^2) is needed; the terms
    here satisfy L L^-1 = I exactly.

    Raises:
        SingularMatrixError: |D(omega)| below the singularity floor
    """
    t = closed_form_terms(params, omega)
    D = t["D"]
    limit = singularity_floor(params, floor)
    if abs(D) < limit:
        raise SingularMatrixError(
            f"|D(omega={omega:.6g})| = {abs(D):.3e} below floor {limit:.3e}; system at or above threshold"
        )

    U, Up, V, Vp = t["U"], t["U'"], t["V"], t["V'"]
    W, Wp, Z, Zp = t["W"], t["W'"], t["Z"], t["Z'"]
    return np.array([
        [U, V, W, Z],
        [-V, U, -Z, W],
        [Wp, Zp, Up, Vp],
        [-Zp, Wp, -Vp, Up],
    ], dtype=complex) / D


def invert_numeric(m: ComplexMatrix, max_condition: float = DEFAULT_MAX_CONDITION) -> NumericInverse:
    """
    Numeric inverse by LU decomposition with partial pivoting.

    Args:
        m: Square complex matrix
        max_condition: Largest accepted 2-norm condition number

    Returns:
        NumericInverse with the max-norm residual |m m^-1 - I|
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ParameterError("matrix has non-finite entries")

    condition = float(np.linalg.cond(m))
    if not np.isfinite(condition) or condition > max_condition:
        raise SingularMatrixError(f"condition number {condition:.3e} exceeds {max_condition:.3e}")

    identity = np.eye(m.shape[0], dtype=complex)
    inverse = linalg.lu_solve(linalg.lu_factor(m), identity)
    residual = float(np.max(np.abs(m @ inverse - identity)))
    logger.debug("Numeric inverse: cond=%.3e residual=%.3e", condition, residual)
    return NumericInverse(matrix=inverse, residual=residual, condition=condition)


def transfer_matrix(params: ModelParams, omega: float, floor: float = DEFAULT_SINGULARITY_FLOOR) -> ComplexMatrix:
    """Input-output relation a_out = (2 L^-1 - I) a_in"""
    return 2 * invert_L_closed(params, omega, floor) - np.eye(4, dtype=complex)
