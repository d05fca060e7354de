"""
Stochastic simulator of the nonlinear pump/signal Langevin field equations

One transverse dimension, periodic box. Fields are Q-representation
c-numbers scaled so that the vacuum level of every discrete mode
amplitude |b_k|^2 equals noise_strength.
"""

import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import fft

from ..errors import CommensurabilityError, ConfigError, DivergenceError, ParameterError
from ..models.params import ModelParams, Scheme, SimConfig
from ..models.results import MomentSet
from .model_core import pump_harmonics

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pcopo.fieldstate/1"

# dt * max|linear eigenvalue| must stay below this
STABILITY_LIMIT = 0.5

# Relative tolerance for k_c, k_p falling on the wavenumber grid
GRID_RTOL = 1e-9

MOMENT_NAMES = ("n_plus", "n_minus", "anom_cross", "anom_plus", "anom_minus", "hop")


@dataclass(frozen=True)
class Grid:
    """Periodic transverse grid and its wavenumbers"""
    points: int
    length: float
    index_kc: int
    index_kp: int

    @property
    def dx(self) -> float:
        return self.length / self.points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.points) * self.dx

    @property
    def k(self) -> np.ndarray:
        return 2 * math.pi * fft.fftfreq(self.points, d=self.dx)

    @property
    def dk(self) -> float:
        return 2 * math.pi / self.length

    def index_of(self, harmonic: int) -> int:
        """FFT index of the wavenumber harmonic * dk (negative values wrap)"""
        return harmonic % self.points


def check_commensurate(params: ModelParams, config: SimConfig) -> Grid:
    """
    Build the grid, requiring k_c and k_p to be exact grid wavenumbers.

    Raises:
        CommensurabilityError: k_c or k_p off the grid, or beyond Nyquist
    """
    length = config.resolved_box_length(params)
    dk = 2 * math.pi / length
    indices = {}
    for name, value in (("kc", params.kc), ("kp", params.kp)):
        ratio = value / dk
        nearest = round(ratio)
        if nearest == 0 or abs(ratio - nearest) > GRID_RTOL * max(1.0, abs(ratio)):
            raise CommensurabilityError(
                f"{name}={value:.12g} is not a multiple of the grid spacing {dk:.12g} "
                f"(box_length={length:.12g}); choose box_length as a multiple of 2*pi/k_c",
                field="box_length",
            )
        if nearest >= config.grid_points // 2:
            raise CommensurabilityError(f"{name} lies beyond the Nyquist wavenumber", field="grid_points")
        indices[name] = nearest
    if 2 * indices["kp"] >= config.grid_points // 2:
        logger.warning("Pump harmonic 2*kp is beyond the Nyquist wavenumber of this grid")
    return Grid(points=config.grid_points, length=length, index_kc=indices["kc"], index_kp=indices["kp"])


@dataclass
class FieldState:
    """Pump and signal c-number fields on the grid at time t"""
    alpha0: np.ndarray
    alpha1: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.alpha0.copy(), self.alpha1.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.alpha0)) and np.all(np.isfinite(self.alpha1)))

    def save(self, path: str, box_length: float, seed: Optional[int] = None,
             rng_state: Optional[Dict] = None) -> None:
        """Write an .npz checkpoint atomically"""
        header = {
            "format": CHECKPOINT_FORMAT,
            "grid_points": int(self.alpha0.size),
            "box_length": float(box_length),
            "t": float(self.t),
            "seed": seed,
            "rng_state": rng_state,
        }
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_name = tempfile.mkstemp(dir=target.parent, suffix=".npz.tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                np.savez(handle, alpha0=self.alpha0, alpha1=self.alpha1, header=np.array(json.dumps(header)))
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(temp_name, target)
        except Exception:
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise
        logger.info("Saved field checkpoint %s (t=%.6g)", target, self.t)

    @classmethod
    def load(cls, path: str) -> Tuple["FieldState", Dict]:
        """
        Read a checkpoint.

        Returns:
            (state, header)
        """
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("format") != CHECKPOINT_FORMAT:
                raise ConfigError(f"unsupported checkpoint format {header.get('format')!r}", field="format")
            state = cls(np.array(data["alpha0"]), np.array(data["alpha1"]), float(header["t"]))
        if state.alpha0.size != header["grid_points"]:
            raise ConfigError("checkpoint grid_points does not match the stored arrays", field="grid_points")
        return state, header


def initial_state(params: ModelParams, grid: Grid, pump: str = "steady") -> FieldState:
    """
    Signal at zero and the pump either homogeneous or at its steady state.

    Args:
        pump: "steady" (coupled-mode harmonics on the grid) or "homogeneous" (E everywhere)
    """
    alpha1 = np.zeros(grid.points, dtype=complex)
    if pump == "homogeneous":
        return FieldState(np.full(grid.points, params.E, dtype=complex), alpha1)
    if pump != "steady":
        raise ParameterError(f"unknown initial pump '{pump}'", field="pump")
    n_max = max(1, (grid.points // 2 - 1) // grid.index_kp)
    n_max = min(n_max, 8)
    harmonics = pump_harmonics(params, n_max)
    spectrum = np.zeros(grid.points, dtype=complex)
    for n, amplitude in zip(range(-n_max, n_max + 1), harmonics):
        spectrum[grid.index_of(n * grid.index_kp)] += amplitude * grid.points
    return FieldState(fft.ifft(spectrum), alpha1)


def mode_amplitudes(alpha: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete mode amplitudes b_k = sqrt(dx/N) FFT(alpha)_k"""
    return math.sqrt(grid.dx / grid.points) * fft.fft(alpha)


def harmonic_amplitudes(alpha: np.ndarray, grid: Grid, harmonics: List[int]) -> np.ndarray:
    """Fourier-series coefficients of alpha at n * k_p"""
    spectrum = fft.fft(alpha) / grid.points
    return np.array([spectrum[grid.index_of(n * grid.index_kp)] for n in harmonics])


def pattern_phase(state: FieldState, grid: Grid) -> float:
    """Spatial phase of the k_c signal pattern, arg(b(k_c) b*(-k_c)) / 2"""
    b = fft.fft(state.alpha1)
    plus = b[grid.index_of(grid.index_kc)]
    minus = b[grid.index_of(-grid.index_kc)]
    return float(np.angle(plus * np.conj(minus)) / 2)


def circular_variance(phases) -> float:
    """1 - |<exp(2 i phase)>| for phases defined modulo pi"""
    phases = np.asarray(phases, dtype=float)
    if phases.size == 0:
        return math.nan
    return float(1 - abs(np.mean(np.exp(2j * phases))))


def noise_coefficients(alpha0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    c1, c2 with xi1 = c1 eta + c2 eta*, giving <xi1 xi1*> = 2 and <xi1 xi1> = -alpha0.

    |alpha0| is clipped at 2, where the diffusion matrix stops being positive.
    """
    magnitude = np.abs(alpha0)
    clipped = np.where(magnitude > 2.0, alpha0 * (2.0 / np.maximum(magnitude, 1e-300)), alpha0)
    c1 = np.sqrt(1 + np.sqrt(np.maximum(1 - np.abs(clipped) ** 2 / 4, 0.0)))
    c2 = -clipped / (2 * c1)
    return c1, c2


class Integrator:
    """Strang-split integrator: exact linear propagation in k-space, nonlinear and noise terms in x"""

    def __init__(self, params: ModelParams, config: SimConfig):
        self.params = params
        self.config = config
        self.grid = check_commensurate(params, config)
        self.dt = config.dt
        self._check_stability()

        k2 = self.grid.k ** 2
        half = config.dt / 2
        self.half_pump = np.exp(-(1 + 1j * params.delta0 + 1j * k2) * half)
        self.half_signal = np.exp(-(1 + 1j * params.delta1 + 2j * k2) * half)

        profile = np.sin(params.kp * self.grid.x)
        self.modulation_pump = np.exp(-1j * params.M0 * profile * config.dt)
        self.modulation_signal = np.exp(-1j * params.M1 * profile * config.dt)

        self.noise_scale = math.sqrt(config.noise_strength * config.dt / self.grid.dx)
        self.has_noise = config.noise_strength > 0

    def _check_stability(self) -> None:
        k2 = self.grid.k ** 2
        p, c = self.params, self.config
        largest = max(
            np.max(np.abs(1 + 1j * (abs(p.delta0) + p.M0) + 1j * k2)),
            np.max(np.abs(1 + 1j * (abs(p.delta1) + p.M1) + 2j * k2)),
        )
        if c.dt * largest >= STABILITY_LIMIT:
            raise ParameterError(
                f"dt*max|lambda| = {c.dt * largest:.3g} >= {STABILITY_LIMIT}; reduce dt or grid_points",
                field="dt",
            )

    def _drift(self, alpha0: np.ndarray, alpha1: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.config.nonlinear:
            return self.params.E - alpha1 ** 2 / 2, alpha0 * np.conj(alpha1)
        return np.full_like(alpha0, self.params.E), np.zeros_like(alpha1)

    def _noise(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Unit complex Gaussians eta0, eta1 with <|eta|^2> = 1"""
        size = self.grid.points
        draws = rng.standard_normal((4, size)) / math.sqrt(2)
        return draws[0] + 1j * draws[1], draws[2] + 1j * draws[3]

    def _signal_noise(self, alpha0: np.ndarray, eta1: np.ndarray) -> np.ndarray:
        c1, c2 = noise_coefficients(alpha0)
        return self.noise_scale * (c1 * eta1 + c2 * np.conj(eta1))

    def _local_step(self, alpha0, alpha1, rng):
        dt = self.dt
        alpha0 = alpha0 * self.modulation_pump
        alpha1 = alpha1 * self.modulation_signal

        if self.has_noise:
            eta0, eta1 = self._noise(rng)
            dw0 = self.noise_scale * math.sqrt(2) * eta0
        else:
            eta1 = None
            dw0 = 0.0

        def increments(a0, a1):
            f0, f1 = self._drift(a0, a1)
            dw1 = self._signal_noise(a0, eta1) if eta1 is not None else 0.0
            return f0 * dt + dw0, f1 * dt + dw1

        if self.config.scheme is Scheme.SEMI_IMPLICIT:
            mid0, mid1 = alpha0, alpha1
            for _ in range(self.config.semi_implicit_iterations):
                d0, d1 = increments(mid0, mid1)
                mid0, mid1 = alpha0 + d0 / 2, alpha1 + d1 / 2
            return 2 * mid0 - alpha0, 2 * mid1 - alpha1

        # Heun predictor-corrector (Stratonovich)
        d0, d1 = increments(alpha0, alpha1)
        p0, p1 = alpha0 + d0, alpha1 + d1
        e0, e1 = increments(p0, p1)
        return alpha0 + (d0 + e0) / 2, alpha1 + (d1 + e1) / 2

    def step(self, state: FieldState, rng: Optional[np.random.Generator] = None) -> FieldState:
        """Advance by one dt"""
        if rng is None and self.has_noise:
            raise ParameterError("an RNG is required when noise_strength > 0", field="rng")
        a0 = fft.ifft(self.half_pump * fft.fft(state.alpha0))
        a1 = fft.ifft(self.half_signal * fft.fft(state.alpha1))
        a0, a1 = self._local_step(a0, a1, rng)
        a0 = fft.ifft(self.half_pump * fft.fft(a0))
        a1 = fft.ifft(self.half_signal * fft.fft(a1))
        return FieldState(a0, a1, state.t + self.dt)

    def check_divergence(self, state: FieldState, trajectory: Optional[int] = None) -> None:
        limit = self.config.divergence_limit
        if not state.is_finite() or max(np.max(np.abs(state.alpha0)), np.max(np.abs(state.alpha1))) > limit:
            raise DivergenceError(
                "field diverged; E may be above threshold or dt too large",
                trajectory=trajectory,
                time=state.t,
            )


@lru_cache(maxsize=16)
def get_integrator(params: ModelParams, config: SimConfig) -> Integrator:
    return Integrator(params, config)


def step(state: FieldState, params: ModelParams, config: SimConfig,
         rng: Optional[np.random.Generator] = None) -> FieldState:
    """One dt advance of the Langevin equations"""
    integrator = get_integrator(params, config)
    new_state = integrator.step(state, rng)
    integrator.check_divergence(new_state)
    return new_state


def _mode_products(b_plus: complex, b_minus: complex) -> np.ndarray:
    """Antinormally ordered estimators in MomentSet order"""
    return np.array([
        abs(b_plus) ** 2,
        abs(b_minus) ** 2,
        b_plus * b_minus,
        b_plus ** 2,
        b_minus ** 2,
        np.conj(b_minus) * b_plus,
    ], dtype=complex)


@dataclass
class TrajectoryResult:
    """Time averages accumulated by one trajectory"""
    index: int
    samples: int
    far_field_pump: np.ndarray
    far_field_signal: np.ndarray
    moments: np.ndarray
    final_state: FieldState
    rng_state: Dict = field(default_factory=dict)


@dataclass
class EnsembleStats:
    """Stationary averages over time and trajectories"""
    k: np.ndarray
    far_field_pump: np.ndarray
    far_field_signal: np.ndarray
    mode_moments: MomentSet
    moment_samples: np.ndarray
    error_bars: Dict[str, np.ndarray] = field(default_factory=dict)
    samples_per_trajectory: int = 0
    n_trajectories: int = 0
    noise_strength: float = 0.0
    seed: int = 0
    final_states: List[FieldState] = field(default_factory=list)
    rng_states: List[Dict] = field(default_factory=list)

    def shifted(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, pump, signal) sorted by wavenumber for plotting"""
        return (fft.fftshift(self.k), fft.fftshift(self.far_field_pump), fft.fftshift(self.far_field_signal))


def trajectory_rngs(seed: int, n_trajectories: int) -> List[np.random.Generator]:
    """Independent generators derived from (seed, trajectory index)"""
    children = np.random.SeedSequence(seed).spawn(n_trajectories)
    return [np.random.default_rng(child) for child in children]


def run_trajectory(params: ModelParams, config: SimConfig, index: int, rng: np.random.Generator,
                   state: Optional[FieldState] = None) -> TrajectoryResult:
    """Integrate one trajectory: transient, then time-averaged sampling"""
    integrator = get_integrator(params, config)
    grid = integrator.grid
    state = state.copy() if state is not None else initial_state(params, grid)

    transient_steps = int(round(config.t_transient / config.dt))
    measure_steps = int(round(config.t_measure / config.dt))
    sample_every = max(1, int(round(config.sample_interval / config.dt)))
    i_plus, i_minus = grid.index_of(grid.index_kc), grid.index_of(-grid.index_kc)

    for _ in range(transient_steps):
        state = integrator.step(state, rng)
    integrator.check_divergence(state, trajectory=index)

    pump_sum = np.zeros(grid.points)
    signal_sum = np.zeros(grid.points)
    moment_sum = np.zeros(len(MOMENT_NAMES), dtype=complex)
    samples = 0
    for n in range(1, measure_steps + 1):
        state = integrator.step(state, rng)
        if n % sample_every:
            continue
        integrator.check_divergence(state, trajectory=index)
        b0 = mode_amplitudes(state.alpha0, grid)
        b1 = mode_amplitudes(state.alpha1, grid)
        pump_sum += np.abs(b0) ** 2
        signal_sum += np.abs(b1) ** 2
        moment_sum += _mode_products(b1[i_plus], b1[i_minus])
        samples += 1

    if samples == 0:
        raise ParameterError("t_measure shorter than sample_interval; no samples taken", field="t_measure")
    logger.debug("Trajectory %d finished: %d samples, t=%.6g", index, samples, state.t)
    return TrajectoryResult(index, samples, pump_sum / samples, signal_sum / samples, moment_sum / samples, state,
                            rng.bit_generator.state)


def _standard_error(values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        return np.full(values.shape[1:], np.nan)
    return np.std(values, axis=0, ddof=1) / math.sqrt(values.shape[0])


def run_ensemble(params: ModelParams, config: SimConfig, workers: int = 1,
                 initial: Optional[FieldState] = None) -> EnsembleStats:
    """
    Stationary ensemble statistics over n_trajectories independent runs.

    Trajectories run on a thread pool; results are reduced in trajectory
    order, so the output depends only on (params, config, initial).

    Args:
        initial: Common starting state (e.g. a loaded checkpoint); the
            coupled-mode pump steady state when omitted

    Raises:
        DivergenceError: a trajectory overflowed
    """
    integrator = get_integrator(params, config)
    rngs = trajectory_rngs(config.seed, config.n_trajectories)
    logger.info("Running %d trajectories on %d worker(s)", config.n_trajectories, workers)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_trajectory(params, config, i, rngs[i], initial), range(len(rngs))))
    else:
        results = [run_trajectory(params, config, i, rng, initial) for i, rng in enumerate(rngs)]

    pump = np.stack([r.far_field_pump for r in results])
    signal = np.stack([r.far_field_signal for r in results])
    moments = np.stack([r.moments for r in results])
    mean_moments = np.mean(moments, axis=0)
    return EnsembleStats(
        k=integrator.grid.k,
        far_field_pump=np.mean(pump, axis=0),
        far_field_signal=np.mean(signal, axis=0),
        mode_moments=MomentSet(
            n_plus=float(mean_moments[0].real),
            n_minus=float(mean_moments[1].real),
            anom_cross=complex(mean_moments[2]),
            anom_plus=complex(mean_moments[3]),
            anom_minus=complex(mean_moments[4]),
            hop=complex(mean_moments[5]),
        ),
        moment_samples=moments,
        error_bars={
            "far_field_pump": _standard_error(pump),
            "far_field_signal": _standard_error(signal),
            "mode_moments": _standard_error(moments.real) + 1j * _standard_error(moments.imag),
        },
        samples_per_trajectory=results[0].samples,
        n_trajectories=len(results),
        noise_strength=config.noise_strength,
        seed=config.seed,
        final_states=[r.final_state for r in results],
        rng_states=[r.rng_state for r in results],
    )


@dataclass
class NearFieldRecord:
    """Re alpha1(x, t) snapshots of one trajectory"""
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    phases: np.ndarray

    def phase_spread(self, windows: int = 4) -> np.ndarray:
        """Circular variance of the pattern phase over growing time windows"""
        edges = np.linspace(0, self.phases.size, windows + 1).astype(int)[1:]
        return np.array([circular_variance(self.phases[:edge]) for edge in edges])


def near_field_record(params: ModelParams, config: SimConfig, trajectory: int = 0) -> NearFieldRecord:
    """Record Re alpha1 every record_stride steps after the transient"""
    integrator = get_integrator(params, config)
    grid = integrator.grid
    rng = trajectory_rngs(config.seed, trajectory + 1)[trajectory]
    state = initial_state(params, grid)

    for _ in range(int(round(config.t_transient / config.dt))):
        state = integrator.step(state, rng)
    integrator.check_divergence(state, trajectory=trajectory)

    times, rows, phases = [], [], []
    for n in range(1, int(round(config.t_measure / config.dt)) + 1):
        state = integrator.step(state, rng)
        if n % config.record_stride:
            continue
        integrator.check_divergence(state, trajectory=trajectory)
        times.append(state.t)
        rows.append(state.alpha1.real.copy())
        phases.append(pattern_phase(state, grid))
    return NearFieldRecord(grid.x, np.array(times), np.array(rows), np.array(phases))


@dataclass
class VarianceMap:
    """Stochastic intracavity superposition variance over an angle grid"""
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    standard_error: np.ndarray
    moments: MomentSet

    @property
    def has_error_bars(self) -> bool:
        return bool(np.all(np.isfinite(self.standard_error)))


def normal_ordered_moments(samples: np.ndarray, vacuum_level: float, noise_strength: float) -> MomentSet:
    """Convert antinormal Q-representation estimators to normally ordered intracavity moments"""
    if noise_strength <= 0:
        raise ParameterError("ordering correction needs noise_strength > 0", field="noise_strength")
    scaled = np.asarray(samples, dtype=complex) / noise_strength
    vacuum = vacuum_level / noise_strength
    return MomentSet(
        n_plus=float(scaled[0].real - vacuum),
        n_minus=float(scaled[1].real - vacuum),
        anom_cross=complex(scaled[2]),
        anom_plus=complex(scaled[3]),
        anom_minus=complex(scaled[4]),
        hop=complex(scaled[5]),
    )


def vacuum_level(config: SimConfig, params: ModelParams, workers: int = 1) -> float:
    """Mean <|b(+-k_c)|^2> of an E = 0 control run with the same config"""
    control = run_ensemble(params.with_E(0.0), config, workers)
    return float((control.mode_moments.n_plus + control.mode_moments.n_minus) / 2)


def intracavity_variance_map(params: ModelParams, config: SimConfig, theta_grid, phi_grid,
                             stats: Optional[EnsembleStats] = None, control: Optional[float] = None,
                             workers: int = 1) -> VarianceMap:
    """
    Superposition variance from sampled alpha1(+-k_c) moments after ordering correction.

    Args:
        stats: Precomputed ensemble for params (run if omitted)
        control: Vacuum level <|b|^2> from an E = 0 run (run if omitted)
    """
    from .correlations import variance_from_moments

    if stats is None:
        stats = run_ensemble(params, config, workers)
    if control is None:
        control = vacuum_level(config, params, workers)

    theta = np.asarray(theta_grid, dtype=float)[:, None]
    phi = np.asarray(phi_grid, dtype=float)[None, :]
    mean = normal_ordered_moments(np.mean(stats.moment_samples, axis=0), control, stats.noise_strength)
    values = variance_from_moments(mean, theta, phi)

    if stats.n_trajectories < 2:
        logger.warning("Fewer than two trajectories: variance map has no error bars")
        error = np.full(values.shape, np.nan)
    else:
        per_trajectory = np.stack([
            variance_from_moments(normal_ordered_moments(sample, control, stats.noise_strength), theta, phi)
            for sample in stats.moment_samples
        ])
        error = _standard_error(per_trajectory)
    return VarianceMap(theta.ravel(), phi.ravel(), values, error, mean)
