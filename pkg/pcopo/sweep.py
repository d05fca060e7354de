"""
Parameter sweeps over the analytic and stochastic engines
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import ValidationError
from scipy import fft

from . import __version__
from .errors import ConfigError, NumericalError, ParameterError, ThresholdError
from .models.params import ModelParams, SimConfig
from .models.results import Engine, Observable, ResultRecord, SweepSpec
from .physics import correlations, langevin
from .utils.file_manager import FileManager, gnuplot_script

logger = logging.getLogger(__name__)

Row = Tuple[Dict[str, Any], Dict[str, Any]]

ANALYTIC_OBSERVABLES = frozenset({
    Observable.INTENSITY, Observable.SPECTRUM, Observable.THRESHOLD, Observable.MIN_VARIANCE,
    Observable.DUAN_MAP, Observable.REID_MAP, Observable.TWIN_BEAMS, Observable.VARIANCE_MAP,
})
LANGEVIN_OBSERVABLES = frozenset({
    Observable.SIMULATE, Observable.INTENSITY, Observable.MIN_VARIANCE,
    Observable.TWIN_BEAMS, Observable.VARIANCE_MAP,
})
ENGINE_SUPPORT = {
    Engine.ANALYTIC: ANALYTIC_OBSERVABLES,
    Engine.LANGEVIN: LANGEVIN_OBSERVABLES,
    Engine.BOTH: ANALYTIC_OBSERVABLES & LANGEVIN_OBSERVABLES,
}

# Observables that only make sense for a stationary state below threshold
BELOW_THRESHOLD_ONLY = frozenset(set(Observable) - {Observable.THRESHOLD, Observable.SIMULATE})

# Row keys shared by both engines when engine=both
GRID_KEYS = {Observable.VARIANCE_MAP: ("theta", "phi")}


def check_engine(spec: SweepSpec) -> None:
    """
    Raises:
        ParameterError: the engine cannot evaluate the observable
    """
    if spec.observable not in ENGINE_SUPPORT[spec.engine]:
        raise ParameterError(
            f"observable '{spec.observable.value}' is not available with engine '{spec.engine.value}'",
            field="engine",
        )


def grid_points(spec: SweepSpec) -> Iterator[Dict[str, float]]:
    """Cartesian product of the axes, last axis fastest; one empty point for no axes"""
    names = [name for name, _ in spec.axes]
    for combo in itertools.product(*(values for _, values in spec.axes)):
        yield dict(zip(names, (float(v) for v in combo)))


def resolve_point(base: ModelParams, point: Dict[str, float],
                  spec: SweepSpec) -> Tuple[ModelParams, Optional[float]]:
    """
    Model parameters at one grid point.

    Returns:
        (params, E_relative): E is resolved from the local threshold when
        E_relative is swept or set on the sweep
    """
    data = base.model_dump()
    updates = {name: value for name, value in point.items() if name != "E_relative"}
    if "delta1" in updates and "kp" not in updates:
        data["kp"] = None
    data.update(updates)
    try:
        params = ModelParams(**data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ())) or None
        raise ParameterError(first.get("msg", str(e)), field=location)

    e_relative = point.get("E_relative", spec.E_relative)
    if e_relative is not None:
        params = params.with_E(e_relative * correlations.threshold(params))
    return params, e_relative


def is_above_threshold(params: ModelParams, e_relative: Optional[float] = None) -> bool:
    if e_relative is not None:
        return e_relative >= 1.0
    try:
        correlations.require_below_threshold(params)
    except ThresholdError:
        return True
    return False


def _analytic_field(spec: SweepSpec) -> str:
    # The simulator samples intracavity fields
    return "output" if spec.engine is Engine.ANALYTIC else "intracavity"


def _map_rows(theta: np.ndarray, phi: np.ndarray, columns: Dict[str, np.ndarray],
              errors: Optional[Dict[str, np.ndarray]] = None) -> List[Row]:
    rows = []
    for i, j in itertools.product(range(theta.size), range(phi.size)):
        values = {"theta": float(theta[i]), "phi": float(phi[j])}
        values.update({name: _scalar(column[i, j]) for name, column in columns.items()})
        error_bars = {name: float(column[i, j]) for name, column in (errors or {}).items()}
        rows.append((values, error_bars))
    return rows


def _scalar(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    return float(value)


def _twin_values(moments) -> Dict[str, float]:
    try:
        report = correlations.twin_beams_from_moments(moments)
    except NumericalError:
        logger.warning("Shot noise vanishes at E=0; twin-beam ratio left undefined")
        return {"raw_variance": 0.0, "shot_noise": 0.0, "normalized": math.nan}
    return report.to_dict()


def evaluate_analytic(params: ModelParams, spec: SweepSpec) -> List[Row]:
    """Rows of (values, error_bars) for one analytic evaluation"""
    which = _analytic_field(spec)
    observable = spec.observable

    if observable is Observable.THRESHOLD:
        try:
            value = correlations.threshold(params)
        except ThresholdError as e:
            logger.warning(f"M0={params.M0:g} M1={params.M1:g}: {e}")
            value = math.nan
        return [({"threshold": value, "analytic_threshold": correlations.analytic_threshold(params)}, {})]
    if observable is Observable.SPECTRUM:
        return [({"omega": float(w), "spectral_intensity": correlations.spectral_intensity(params, w)}, {})
                for w in spec.omega]

    moments = correlations.second_moments(params, which)
    if observable is Observable.INTENSITY:
        return [({"intensity": float(moments.n_plus)}, {})]
    if observable is Observable.TWIN_BEAMS:
        return [(_twin_values(moments), {})]
    if observable is Observable.MIN_VARIANCE:
        best = correlations.min_variance_from_moments(moments, spec.theta_points, spec.phi_points)
        return [({"min_variance": best.value, "theta": best.theta, "phi": best.phi}, {})]

    theta, phi = correlations.angle_grid(spec.theta_points, spec.phi_points)
    if observable is Observable.VARIANCE_MAP:
        values = correlations.variance_from_moments(moments, theta[:, None], phi[None, :])
        return _map_rows(theta, phi, {"variance": values})

    emap = correlations.entanglement_map(params, theta, phi, spec.duan_weight, spec.duan_convention, which)
    if observable is Observable.DUAN_MAP:
        bound = np.full(emap.duan_sum.shape, emap.duan_bound)
        return _map_rows(theta, phi, {"duan_sum": emap.duan_sum, "duan_bound": bound,
                                      "entangled_duan": emap.duan_mask})
    return _map_rows(theta, phi, {"reid_product": emap.reid_product, "reid_lambda": emap.reid_lambda,
                                  "entangled_reid": emap.reid_mask})


def _sem(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def evaluate_langevin(params: ModelParams, spec: SweepSpec, config: SimConfig, workers: int = 1) -> List[Row]:
    """Rows of (values, error_bars) from a stochastic ensemble"""
    stats = langevin.run_ensemble(params, config, workers)

    if spec.observable is Observable.SIMULATE:
        k, pump, signal = stats.shifted()
        pump_error = fft.fftshift(stats.error_bars["far_field_pump"])
        signal_error = fft.fftshift(stats.error_bars["far_field_signal"])
        return [({"k": float(k[n]), "far_field_pump": float(pump[n]), "far_field_signal": float(signal[n])},
                 {"far_field_pump": float(pump_error[n]), "far_field_signal": float(signal_error[n])})
                for n in range(k.size)]

    control = langevin.vacuum_level(config, params, workers)
    moments = langevin.normal_ordered_moments(np.mean(stats.moment_samples, axis=0), control, config.noise_strength)
    per_trajectory = [langevin.normal_ordered_moments(sample, control, config.noise_strength)
                      for sample in stats.moment_samples]

    if spec.observable is Observable.INTENSITY:
        return [({"intensity": moments.n_plus}, {"intensity": _sem([m.n_plus for m in per_trajectory])})]
    if spec.observable is Observable.TWIN_BEAMS:
        values = _twin_values(moments)
        spread = _sem([_twin_values(m)["normalized"] for m in per_trajectory])
        return [(values, {"normalized": spread})]
    if spec.observable is Observable.MIN_VARIANCE:
        best = correlations.min_variance_from_moments(moments, spec.theta_points, spec.phi_points)
        spread = _sem([correlations.variance_from_moments(m, best.theta, best.phi) for m in per_trajectory])
        return [({"min_variance": best.value, "theta": best.theta, "phi": best.phi}, {"min_variance": spread})]

    theta, phi = correlations.angle_grid(spec.theta_points, spec.phi_points)
    vmap = langevin.intracavity_variance_map(params, config, theta, phi, stats=stats, control=control,
                                             workers=workers)
    return _map_rows(theta, phi, {"variance": vmap.values}, {"variance": vmap.standard_error})


def _merge_engines(analytic: List[Row], stochastic: List[Row], grid_keys: Sequence[str] = ()) -> List[Row]:
    merged = []
    for (a_values, _), (l_values, l_errors) in zip(analytic, stochastic):
        values = {key: a_values[key] for key in grid_keys if key in a_values}
        values.update({f"analytic_{key}": value for key, value in a_values.items() if key not in grid_keys})
        values.update({f"langevin_{key}": value for key, value in l_values.items() if key not in grid_keys})
        merged.append((values, {f"langevin_{key}": value for key, value in l_errors.items()}))
    return merged


def evaluate_point(params: ModelParams, spec: SweepSpec, config: SimConfig, workers: int = 1) -> List[Row]:
    if spec.engine is Engine.ANALYTIC:
        return evaluate_analytic(params, spec)
    if spec.engine is Engine.LANGEVIN:
        return evaluate_langevin(params, spec, config, workers)
    return _merge_engines(evaluate_analytic(params, spec), evaluate_langevin(params, spec, config, workers),
                          GRID_KEYS.get(spec.observable, ()))


def _point_records(base: ModelParams, point: Dict[str, float], spec: SweepSpec,
                   config: SimConfig, workers: int, timestamp: str) -> List[ResultRecord]:
    params, e_relative = resolve_point(base, point, spec)
    snapshot = params.snapshot()
    if e_relative is not None:
        snapshot["E_relative"] = e_relative
    seed = config.seed if spec.engine is not Engine.ANALYTIC else None

    def record(values: Dict[str, Any], error_bars: Dict[str, Any], above: bool = False) -> ResultRecord:
        return ResultRecord(params=dict(snapshot), observable=spec.observable.value, values=values,
                            engine=spec.engine.value, version=__version__, seed=seed,
                            error_bars=error_bars, above_threshold=above, timestamp=timestamp)

    if spec.observable in BELOW_THRESHOLD_ONLY and is_above_threshold(params, e_relative):
        logger.info("Grid point %s is at or above threshold; marked", point)
        return [record({}, {}, above=True)]
    return [record(values, error_bars) for values, error_bars in evaluate_point(params, spec, config, workers)]


def run_sweep(spec: SweepSpec, base: Optional[ModelParams] = None, config: Optional[SimConfig] = None,
              workers: int = 1) -> List[ResultRecord]:
    """
    Evaluate spec.observable over every grid point.

    Analytic points fan out over a thread pool; stochastic points hand the
    workers to the trajectory pool instead. Records come back in grid
    order whatever the worker count.

    Args:
        spec: Validated sweep description
        base: Parameters the axes override (defaults to ModelParams())
        config: Simulator settings for the stochastic engine
        workers: Bounded worker count

    Returns:
        List[ResultRecord]: One record per grid point, or per row for curve and map observables

    Raises:
        ParameterError: engine/observable mismatch or invalid grid values
    """
    check_engine(spec)
    base = base if base is not None else ModelParams()
    config = config if config is not None else SimConfig()
    points = list(grid_points(spec))
    timestamp = datetime.now().isoformat()
    logger.info(f"Sweep: {spec.observable.value} ({spec.engine.value}) over {len(points)} point(s)")

    if spec.engine is Engine.ANALYTIC and workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda p: _point_records(base, p, spec, config, 1, timestamp), points))
    else:
        batches = [_point_records(base, p, spec, config, workers, timestamp) for p in points]

    records = [record for batch in batches for record in batch]
    marked = sum(1 for batch in batches if batch and batch[0].above_threshold)
    if marked:
        logger.warning(f"{marked} of {len(points)} grid point(s) at or above threshold")
    return records


def sweep_metadata(spec: SweepSpec, base: ModelParams, config: Optional[SimConfig] = None) -> Dict[str, Any]:
    """Metadata block that rerun_from_metadata turns back into the same sweep"""
    metadata: Dict[str, Any] = {
        "version": __version__,
        "observable": spec.observable.value,
        "engine": spec.engine.value,
        "timestamp": datetime.now().isoformat(),
        "params": base.model_dump(mode="json"),
        "sweep": spec.model_dump(mode="json"),
    }
    if spec.engine is not Engine.ANALYTIC:
        config = config if config is not None else SimConfig()
        metadata["seed"] = config.seed
        metadata["simulation"] = config.model_dump(mode="json")
    return metadata


def rerun_from_metadata(metadata: Dict[str, Any], workers: int = 1) -> List[ResultRecord]:
    """Repeat the sweep a result file was produced by"""
    spec = SweepSpec(**metadata["sweep"])
    base = ModelParams(**metadata["params"])
    config = SimConfig(**metadata["simulation"]) if "simulation" in metadata else None
    return run_sweep(spec, base, config, workers)


# Figure recipes

RECIPE_DIR = Path(__file__).resolve().parent / "recipes"
RECIPE_VERSION = 1
FIGURE_IDS = ("fig1", "fig3a", "fig3b", "fig3c", "fig4", "fig5", "fig6", "fig7")


@dataclass
class RecipeRun:
    name: str
    model: ModelParams
    simulation: SimConfig
    sweep: SweepSpec


@dataclass
class Recipe:
    id: str
    title: str
    runs: List[RecipeRun]
    plot: Dict[str, str] = field(default_factory=dict)


def expand_axis(values: Any) -> List[float]:
    """Axis values from a list or a {start, stop, step} range (stop included)"""
    if isinstance(values, dict):
        start, stop, step = float(values["start"]), float(values["stop"]), float(values["step"])
        if step <= 0 or stop < start:
            raise ValueError(f"invalid range {values}")
        count = int(round((stop - start) / step)) + 1
        return [float(v) for v in np.linspace(start, start + (count - 1) * step, count)]
    return [float(v) for v in values]


def load_recipe(figure_id: str, recipe_dir: Optional[Path] = None) -> Recipe:
    """
    Read a stored figure recipe.

    Raises:
        ConfigError: unknown id, malformed file or invalid records
    """
    path = Path(recipe_dir or RECIPE_DIR) / f"{figure_id}.yaml"
    if not path.exists():
        raise ConfigError(f"no recipe for '{figure_id}' (known: {', '.join(FIGURE_IDS)})", field="figure")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"{path.name}: {getattr(e, 'problem', e)}", line=mark.line + 1 if mark else None)
    if data.get("recipe_version") != RECIPE_VERSION:
        raise ConfigError(f"{path.name}: unsupported recipe_version {data.get('recipe_version')!r}",
                          field="recipe_version")

    runs = []
    for index, run in enumerate(data.get("runs") or []):
        name = run.get("name", f"run{index}")
        sweep = dict(run.get("sweep") or {})
        sweep["axes"] = [(axis, expand_axis(values)) for axis, values in sweep.get("axes", [])]
        if "omega" in sweep:
            sweep["omega"] = expand_axis(sweep["omega"])
        try:
            runs.append(RecipeRun(
                name=name,
                model=ModelParams(**(run.get("model") or {})),
                simulation=SimConfig(**(run.get("simulation") or {})),
                sweep=SweepSpec(**sweep),
            ))
        except (ValidationError, ValueError) as e:
            raise ConfigError(f"{path.name}: run '{name}': {e}", field=f"runs.{index}")
    if not runs:
        raise ConfigError(f"{path.name}: recipe has no runs", field="runs")
    return Recipe(id=data.get("id", figure_id), title=data.get("title", figure_id), runs=runs,
                  plot=data.get("plot") or {})


def run_recipe(recipe: Recipe, workers: int = 1) -> List[ResultRecord]:
    """All runs of a recipe; every record's values start with the run name"""
    records = []
    for run in recipe.runs:
        logger.info(f"Recipe {recipe.id}: run '{run.name}'")
        for record in run_sweep(run.sweep, run.model, run.simulation, workers):
            record.values = {"run": run.name, **record.values}
            records.append(record)
    return records


def reproduce_figure(figure_id: str, output_dir: str = ".", workers: int = 1, plot_script: bool = True,
                     recipe_dir: Optional[Path] = None) -> List[Path]:
    """
    Run a stored recipe and write <id>.csv, <id>.json and optionally <id>.gp.

    Returns:
        List[Path]: Files written
    """
    recipe = load_recipe(figure_id, recipe_dir)
    records = run_recipe(recipe, workers)
    metadata = {
        "version": __version__,
        "figure": recipe.id,
        "title": recipe.title,
        "timestamp": datetime.now().isoformat(),
        "runs": [{"name": run.name, "params": run.model.model_dump(mode="json"),
                  "sweep": run.sweep.model_dump(mode="json"),
                  "simulation": run.simulation.model_dump(mode="json")} for run in recipe.runs],
    }

    files = FileManager(output_dir)
    written = [files.write_results(f"{recipe.id}.csv", records, metadata),
               files.write_results(f"{recipe.id}.json", records, metadata)]
    if plot_script and recipe.plot:
        script = gnuplot_script(f"{recipe.id}.csv", recipe.plot["x"], recipe.plot["y"],
                                z=recipe.plot.get("z"), group=recipe.plot.get("group"), title=recipe.title)
        written.append(files.write_file(f"{recipe.id}.gp", script))
    return written
