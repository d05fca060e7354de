"""
Below-threshold observables of the few-mode PCOPO model

Closed forms come from the exact split of the 4-mode model into the two
independent oscillators c+- (see model_core.decoupled_modes). Output-field
moments are twice the intracavity ones. Quadrature variances use the
vacuum-1 normalization per mode, so the two-mode vacuum level is 2.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from ..errors import NumericalError, ThresholdError
from ..models.params import ModelParams
from ..models.results import (
    BoundConvention,
    EntanglementReport,
    MomentSet,
    QuadratureSpec,
    TwinBeamReport,
)
from .model_core import (
    DecoupledModes,
    build_L,
    coupling_constants,
    decoupled_modes,
    invert_numeric,
    transfer_matrix,
)

logger = logging.getLogger(__name__)

# Relative distance to threshold (p - max g) treated as "at threshold"
THRESHOLD_FLOOR = 1e-12

# Relative distance below which evaluations log a warning
NEAR_THRESHOLD_WARNING = 1e-4

DEFAULT_E_MAX = 4.0
DEFAULT_XTOL = 1e-9
DEFAULT_WINDOW = 50.0
DEFAULT_ANGLE_POINTS = 181

FIELDS = ("output", "intracavity")

# (row, column) of T(omega) J T(-omega)^T for each MomentSet entry;
# vector order (a(k_c), a(-k_c), a^dag(-k_c), a^dag(k_c))
MOMENT_INDICES = {
    "n_plus": (3, 0),
    "n_minus": (2, 1),
    "anom_cross": (0, 1),
    "anom_plus": (0, 0),
    "anom_minus": (1, 1),
    "hop": (2, 0),
}
MOMENT_INDICES_ORDER = tuple(MOMENT_INDICES)

# Input commutators: <a_in(w) a_in^dag(w')> = delta(w + w')
_INPUT_CORRELATION = np.zeros((4, 4), dtype=complex)
_INPUT_CORRELATION[0, 3] = 1.0
_INPUT_CORRELATION[1, 2] = 1.0


class VarianceMinimum(NamedTuple):
    value: float
    theta: float
    phi: float


def _check_field(field: str) -> float:
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}, got '{field}'")
    return 1.0 if field == "output" else 0.5


def _threshold_margin(params: ModelParams, modes: DecoupledModes) -> float:
    p = 1 + (params.M1 / 2) ** 2
    return (p - max(modes.g_plus, modes.g_minus)) / p


def require_below_threshold(params: ModelParams) -> DecoupledModes:
    """
    Decoupled modes of params, refusing operating points at or above threshold.

    Raises:
        ThresholdError: max(|G+-|^2) >= 1 + (M1/2)^2
    """
    modes = decoupled_modes(params)
    margin = _threshold_margin(params, modes)
    if margin <= THRESHOLD_FLOOR:
        raise ThresholdError(f"E={params.E:.9g} is at or above threshold (relative margin {margin:.3e})")
    if margin < NEAR_THRESHOLD_WARNING:
        logger.warning("Evaluating %.3e below threshold; results are sensitive to rounding", margin)
    return modes


def sigma_den(params: ModelParams) -> float:
    """Intensity denominator; vanishes at threshold"""
    c = coupling_constants(params)
    s2 = abs(c.S) ** 2
    c5 = 4 + params.M1 ** 2
    value = (16 * s2 ** 2 * abs(1 + c.kappa ** 2) ** 2
             - 8 * s2 * (1 + abs(c.kappa) ** 2) * c5
             + c5 ** 2)
    return float(value)


def intensity(params: ModelParams) -> float:
    """Stationary output photon number of the mode k_c"""
    require_below_threshold(params)
    c = coupling_constants(params)
    s2 = abs(c.S) ** 2
    numerator = -4 * s2 * (4 * s2 * abs(1 + c.kappa ** 2) ** 2
                           - (1 + abs(c.kappa) ** 2) * (4 + params.M1 ** 2))
    return float(numerator / sigma_den(params))


def spectral_intensity(params: ModelParams, omega: float) -> float:
    """Output photon-number spectrum of the mode k_c, from the numeric inverse of L"""
    require_below_threshold(params)
    inverse = invert_numeric(build_L(params, -omega)).matrix
    return float(4 * (abs(inverse[0, 2]) ** 2 + abs(inverse[0, 3]) ** 2))


def spectral_intensity_closed(params: ModelParams, omega: float) -> float:
    """
    Closed form of spectral_intensity.

    With u = 1 + i omega, m = M1/2, h = |S|^2 (1 + |kappa|^2),
    c3 = |S|^2 (kappa - kappa*) and r = u^2 + m^2 - h:

        S(omega) = 4 [h (|r|^2 + |c3|^2) + 2 |c3|^2 Re r] / |r^2 + c3^2|^2

    The spectrum pairs a(k_c, omega) with a^dag(k_c, -omega), so r is taken
    at -omega of the e^{-i omega t} convention. c3 is imaginary, which makes
    r(-omega) = r(omega)* and the result even in omega.
    """
    require_below_threshold(params)
    c = coupling_constants(params)
    s2 = abs(c.S) ** 2
    h = s2 * (1 + abs(c.kappa) ** 2)
    c3 = s2 * (c.kappa - np.conj(c.kappa))
    u = 1 + 1j * omega
    r = u ** 2 + (params.M1 / 2) ** 2 - h
    numerator = h * (abs(r) ** 2 + abs(c3) ** 2) + 2 * abs(c3) ** 2 * r.real
    return float(4 * numerator / abs(r ** 2 + c3 ** 2) ** 2)


def moment_spectrum(params: ModelParams, omega: float) -> np.ndarray:
    """
    Spectral densities of all six output moments at omega.

    Returns:
        Complex array in MomentSet field order
    """
    T_plus = transfer_matrix(params, omega)
    T_minus = transfer_matrix(params, -omega)
    density = T_plus @ _INPUT_CORRELATION @ T_minus.T
    return np.array([density[MOMENT_INDICES[name]] for name in MOMENT_INDICES_ORDER])


def _integrate_real_line(func, window: float) -> np.ndarray:
    """Vector-valued integral of func over the real line, split at +-window"""
    options = {"epsabs": 1e-13, "epsrel": 1e-11, "norm": "max", "limit": 4000}
    total = 0.0
    for lower, upper in ((-np.inf, -window), (window, np.inf)):
        value, _ = integrate.quad_vec(func, lower, upper, **options)
        total = total + value
    value, error = integrate.quad_vec(func, -window, window, points=[0.0], **options)
    logger.debug("Quadrature core |w|<%.3g: error estimate %.3e", window, error)
    return total + value


def integrate_moments(params: ModelParams, window: float = DEFAULT_WINDOW) -> MomentSet:
    """
    Time-domain output moments by adaptive quadrature of moment_spectrum.

    Args:
        params: Below-threshold model parameters
        window: Split point Omega of the integration domain

    Returns:
        MomentSet of output-field moments
    """
    require_below_threshold(params)
    count = len(MOMENT_INDICES_ORDER)

    def density(w: float) -> np.ndarray:
        spectrum = moment_spectrum(params, w)
        return np.concatenate([spectrum.real, spectrum.imag])

    flat = _integrate_real_line(density, window) / (2 * math.pi)
    values = {name: complex(flat[k], flat[k + count]) for k, name in enumerate(MOMENT_INDICES_ORDER)}
    return MomentSet(
        n_plus=values["n_plus"].real,
        n_minus=values["n_minus"].real,
        anom_cross=values["anom_cross"],
        anom_plus=values["anom_plus"],
        anom_minus=values["anom_minus"],
        hop=values["hop"],
    )


def second_moments(params: ModelParams, field: str = "output") -> MomentSet:
    """
    Stationary second moments of the modes +-k_c.

    Args:
        params: Below-threshold model parameters
        field: "output" or "intracavity" (half the output moments)

    Returns:
        MomentSet
    """
    scale = _check_field(field)
    modes = require_below_threshold(params)
    p = 1 + (params.M1 / 2) ** 2

    def number(g: float) -> float:
        return g / (2 * (p - g))

    def anomalous(gain: complex, g: float, detuning: float) -> complex:
        return gain * p / (2 * (p - g) * (1 + 1j * detuning))

    n_c_plus, n_c_minus = number(modes.g_plus), number(modes.g_minus)
    m_c_plus = anomalous(modes.gain_plus, modes.g_plus, modes.detuning_plus)
    m_c_minus = anomalous(modes.gain_minus, modes.g_minus, modes.detuning_minus)

    # Intracavity moments in the c basis, times 2 for the output field
    n = n_c_plus + n_c_minus
    anom = m_c_plus + m_c_minus
    output = MomentSet(
        n_plus=float(n),
        n_minus=float(n),
        anom_cross=complex(1j * (m_c_plus - m_c_minus)),
        anom_plus=complex(anom),
        anom_minus=complex(-anom),
        hop=complex(-1j * (n_c_plus - n_c_minus)),
    )
    return output if scale == 1.0 else output.scaled(scale)


def _quadrature_terms(moments: MomentSet, theta, phi):
    """<x1^2>, <x2^2> and <x1 x2> for x1 at angle theta and x2 at theta + phi"""
    x11 = 2 * np.real(moments.anom_plus * np.exp(2j * theta)) + 2 * moments.n_plus + 1
    x22 = 2 * np.real(moments.anom_minus * np.exp(2j * (theta + phi))) + 2 * moments.n_minus + 1
    x12 = (2 * np.real(moments.anom_cross * np.exp(1j * (2 * theta + phi)))
           + 2 * np.real(moments.hop * np.exp(-1j * phi)))
    return x11, x22, x12


def variance_from_moments(moments: MomentSet, theta, phi):
    """Variance of x1 + x2; accepts scalar or broadcastable array angles"""
    x11, x22, x12 = _quadrature_terms(moments, theta, phi)
    return x11 + x22 + 2 * x12


def quadrature_variance(params: ModelParams, spec: QuadratureSpec, field: str = "output") -> float:
    """Variance of the two-mode superposition at (theta, phi); vacuum level 2"""
    return float(variance_from_moments(second_moments(params, field), spec.theta, spec.phi))


def angle_grid(theta_points: int = DEFAULT_ANGLE_POINTS, phi_points: int = DEFAULT_ANGLE_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """Default grids theta in [0, pi) and phi in [0, 2 pi)"""
    theta = np.linspace(0.0, math.pi, theta_points, endpoint=False)
    phi = np.linspace(0.0, 2 * math.pi, phi_points, endpoint=False)
    return theta, phi


def _golden_line(func, center: float, step: float) -> Tuple[float, float]:
    """Golden-section minimum of func started from (center - step, center + step)"""
    try:
        result = optimize.minimize_scalar(func, bracket=(center - step, center + step), method="golden")
    except (ValueError, RuntimeError):
        # flat direction, e.g. the OPO landscape depends on 2 theta + phi only
        return center, float(func(center))
    return float(result.x), float(result.fun)


def min_variance_from_moments(moments: MomentSet, theta_points: int = DEFAULT_ANGLE_POINTS,
                              phi_points: int = DEFAULT_ANGLE_POINTS) -> VarianceMinimum:
    """
    Grid search then nested golden-section refinement.

    The outer search runs over theta on the profile min_phi V(theta, phi).
    Ties on the grid resolve to the smallest (theta, phi).
    """
    theta, phi = angle_grid(theta_points, phi_points)
    landscape = variance_from_moments(moments, theta[:, None], phi[None, :])
    i, j = np.unravel_index(np.argmin(landscape), landscape.shape)
    best = VarianceMinimum(float(landscape[i, j]), float(theta[i]), float(phi[j]))
    if np.ptp(landscape) < 1e-14:
        return best

    theta_step, phi_step = math.pi / theta_points, 2 * math.pi / phi_points

    def best_phi(t: float) -> Tuple[float, float]:
        return _golden_line(lambda f: float(variance_from_moments(moments, t, f)), best.phi, phi_step)

    theta_star, _ = _golden_line(lambda t: best_phi(t)[1], best.theta, theta_step)
    phi_star, value = best_phi(theta_star)
    if value < best.value:
        best = VarianceMinimum(value, float(theta_star % math.pi), float(phi_star % (2 * math.pi)))
    return best


def min_variance(params: ModelParams, theta_points: int = DEFAULT_ANGLE_POINTS,
                 phi_points: int = DEFAULT_ANGLE_POINTS, field: str = "output") -> VarianceMinimum:
    """Global minimum of the superposition variance over (theta, phi)"""
    return min_variance_from_moments(second_moments(params, field), theta_points, phi_points)


def duan_bound(weight: float, convention: BoundConvention = BoundConvention.AS_PRINTED) -> float:
    """Separability bound 2(w^2 + 1/w) as printed, or the standard 2(w^2 + 1/w^2)"""
    if weight == 0:
        raise ValueError("duan weight must be non-zero")
    if BoundConvention(convention) is BoundConvention.STANDARD:
        return 2 * (weight ** 2 + 1 / weight ** 2)
    return 2 * (weight ** 2 + 1 / weight)


def _weighted_variance(moments: MomentSet, theta, phi, weight: float):
    x11, x22, x12 = _quadrature_terms(moments, theta, phi)
    return weight ** 2 * x11 + x22 / weight ** 2 + 2 * (abs(weight) / weight) * x12


def _duan_sum(moments: MomentSet, theta, phi, weight: float):
    return (_weighted_variance(moments, theta, phi, weight)
            + _weighted_variance(moments, theta + math.pi / 2, phi + math.pi, weight))


def duan_criterion(params: ModelParams, spec: QuadratureSpec, weight: float = 1.0,
                   convention: BoundConvention = BoundConvention.AS_PRINTED,
                   field: str = "output") -> EntanglementReport:
    """Duan inseparability sum at (theta, phi) and its EPR partner angles"""
    bound = duan_bound(weight, convention)
    moments = second_moments(params, field)
    total = float(_duan_sum(moments, spec.theta, spec.phi, weight))
    return EntanglementReport(
        theta=spec.theta,
        phi=spec.phi,
        duan_sum=total,
        duan_bound=bound,
        duan_weight=weight,
        entangled_duan=total < bound,
    )


def inference_variance(moments: MomentSet, theta, phi, lam):
    """<(x1 + lam x2)^2> for a given inference gain lam"""
    x11, x22, x12 = _quadrature_terms(moments, theta, phi)
    return x11 + 2 * lam * x12 + lam ** 2 * x22


def conditional_variance(moments: MomentSet, theta, phi):
    """
    Inference variance <(x1 + lambda x2)^2> at the optimal lambda.

    Returns:
        (variance, lambda)
    """
    x11, x22, x12 = _quadrature_terms(moments, theta, phi)
    if np.any(np.asarray(x22) <= 0):
        raise NumericalError("degenerate variance of x2; conditional variance undefined")
    lam = -x12 / x22
    return x11 - x12 ** 2 / x22, lam


def reid_criterion(params: ModelParams, spec: QuadratureSpec, field: str = "output") -> EntanglementReport:
    """Reid EPR product of the inference variances at (theta, phi) and its partner"""
    moments = second_moments(params, field)
    first, lam = conditional_variance(moments, spec.theta, spec.phi)
    partner = spec.partner()
    second, _ = conditional_variance(moments, partner.theta, partner.phi)
    product = float(first * second)
    return EntanglementReport(
        theta=spec.theta,
        phi=spec.phi,
        reid_product=product,
        reid_lambda=float(lam),
        entangled_reid=product < 1.0,
    )


@dataclass
class EntanglementMap:
    """Both criteria over a (theta, phi) grid"""
    theta: np.ndarray
    phi: np.ndarray
    duan_sum: np.ndarray
    duan_bound: float
    duan_weight: float
    reid_product: np.ndarray
    reid_lambda: np.ndarray

    @property
    def duan_mask(self) -> np.ndarray:
        return self.duan_sum < self.duan_bound

    @property
    def reid_mask(self) -> np.ndarray:
        return self.reid_product < 1.0

    @property
    def duan_area(self) -> float:
        """Fraction of grid cells witnessing Duan inseparability"""
        return float(np.mean(self.duan_mask))

    @property
    def reid_area(self) -> float:
        return float(np.mean(self.reid_mask))

    @property
    def overlap_area(self) -> float:
        return float(np.mean(self.duan_mask & self.reid_mask))

    def report(self, i: int, j: int) -> EntanglementReport:
        return EntanglementReport(
            theta=float(self.theta[i]),
            phi=float(self.phi[j]),
            duan_sum=float(self.duan_sum[i, j]),
            duan_bound=self.duan_bound,
            duan_weight=self.duan_weight,
            reid_product=float(self.reid_product[i, j]),
            reid_lambda=float(self.reid_lambda[i, j]),
            entangled_duan=bool(self.duan_mask[i, j]),
            entangled_reid=bool(self.reid_mask[i, j]),
        )


def entanglement_map(params: ModelParams, theta_grid: Optional[np.ndarray] = None,
                     phi_grid: Optional[np.ndarray] = None, weight: float = 1.0,
                     convention: BoundConvention = BoundConvention.AS_PRINTED,
                     field: str = "output") -> EntanglementMap:
    """Duan and Reid criteria evaluated on every (theta, phi) grid cell"""
    default_theta, default_phi = angle_grid()
    theta = np.asarray(default_theta if theta_grid is None else theta_grid, dtype=float)
    phi = np.asarray(default_phi if phi_grid is None else phi_grid, dtype=float)
    moments = second_moments(params, field)

    t, f = theta[:, None], phi[None, :]
    first, lam = conditional_variance(moments, t, f)
    second, _ = conditional_variance(moments, t + math.pi / 2, f + math.pi)
    return EntanglementMap(
        theta=theta,
        phi=phi,
        duan_sum=_duan_sum(moments, t, f, weight),
        duan_bound=duan_bound(weight, convention),
        duan_weight=weight,
        reid_product=first * second,
        reid_lambda=np.broadcast_to(lam, first.shape).copy(),
    )


def twin_beams_from_moments(moments: MomentSet) -> TwinBeamReport:
    """Gaussian expansion of the normally ordered number-difference variance"""
    raw = (moments.n_plus ** 2 + moments.n_minus ** 2
           + abs(moments.anom_plus) ** 2 + abs(moments.anom_minus) ** 2
           - 2 * abs(moments.anom_cross) ** 2 - 2 * abs(moments.hop) ** 2)
    shot = moments.n_plus + moments.n_minus
    if shot <= 0:
        raise NumericalError("shot noise vanishes (E = 0); twin-beam ratio undefined")
    return TwinBeamReport(raw_variance=float(raw), shot_noise=float(shot), normalized=float(raw / shot))


def twin_beams(params: ModelParams) -> TwinBeamReport:
    """Twin-beam variance of the output modes +-k_c"""
    return twin_beams_from_moments(second_moments(params))


def covariance_matrix(moments: MomentSet) -> np.ndarray:
    """
    Symmetrized covariance of (X1, X2, P1, P2), X = a + a^dag, P = -i(a - a^dag).

    Vacuum gives the identity.
    """
    N = np.array([[moments.n_plus, np.conj(moments.hop)],
                  [moments.hop, moments.n_minus]], dtype=complex)
    A = np.array([[moments.anom_plus, moments.anom_cross],
                  [moments.anom_cross, moments.anom_minus]], dtype=complex)
    half = 0.5 * np.eye(2)
    C = np.block([[A, N.T + half], [N + half, np.conj(A)]])
    eye = np.eye(2)
    T = np.block([[eye, eye], [-1j * eye, 1j * eye]])
    V = T @ C @ T.T
    return V.real


def is_physical(V: np.ndarray, tol: float = 1e-10) -> bool:
    """Positive semidefinite and compatible with [X, P] = 2i"""
    V = np.asarray(V, dtype=float)
    if np.min(np.linalg.eigvalsh((V + V.T) / 2)) < -tol:
        return False
    eye, zero = np.eye(2), np.zeros((2, 2))
    symplectic = np.block([[zero, eye], [-eye, zero]])
    return bool(np.min(np.linalg.eigvalsh(V + 1j * symplectic)) >= -tol)


def _gain_per_pump(params: ModelParams) -> float:
    """max(|G+-|^2) / E^2, independent of E"""
    modes = decoupled_modes(params.with_E(1.0))
    return max(modes.g_plus, modes.g_minus)


def analytic_threshold(params: ModelParams) -> float:
    """Closed-form threshold sqrt((1 + M1^2/4) / max(|S/E|^2 |kappa -+ i|^2))"""
    return math.sqrt((1 + (params.M1 / 2) ** 2) / _gain_per_pump(params))


def threshold(params: ModelParams, E_max: float = DEFAULT_E_MAX, xtol: float = DEFAULT_XTOL) -> float:
    """
    Smallest E at which the stationary state loses stability.

    Bisection on the smallest real part of the numerically computed
    eigenvalues of L(omega = 0), independent of the decoupled-mode closed
    form in analytic_threshold. sigma_den vanishes at the same E, but for
    M0 = 0 it only touches zero there, so it cannot be bracketed.

    Raises:
        ThresholdError: no threshold in [0, E_max]
    """
    def margin(E: float) -> float:
        return float(np.min(np.linalg.eigvals(build_L(params.with_E(E), 0.0)).real))

    if margin(E_max) > 0:
        raise ThresholdError(f"no threshold in [0, {E_max:g}]")
    root = optimize.bisect(margin, 0.0, E_max, xtol=xtol)
    logger.debug("Threshold M0=%g M1=%g: E_thr=%.12g (closed form %.12g)",
                 params.M0, params.M1, root, analytic_threshold(params))
    return float(root)
