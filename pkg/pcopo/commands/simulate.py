"""
Stochastic simulation command
"""

import numpy as np
from rich.panel import Panel

from .. import __version__
from ..errors import ConfigError
from ..models.params import Scheme
from ..models.results import Engine, Observable, ResultRecord
from ..physics import langevin
from .base import (
    BaseCommand,
    add_model_arguments,
    add_output_arguments,
    add_worker_argument,
    load_records,
    print_params,
    print_values,
    resolve_workers,
    write_records,
)

SIMULATION_FLAGS = {
    'grid_points': ('--grid-points', int),
    'box_length': ('--box-length', float),
    'dt': ('--dt', float),
    't_transient': ('--t-transient', float),
    't_measure': ('--t-measure', float),
    'n_trajectories': ('--trajectories', int),
    'noise_strength': ('--noise-strength', float),
    'seed': ('--seed', int),
}


class SimulateCommand(BaseCommand):
    """Integrate the nonlinear Langevin equations and report far fields"""

    name = 'simulate'
    help = 'Stochastic simulation of the nonlinear field equations'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        group = parser.add_argument_group('simulation')
        for key, (flag, kind) in SIMULATION_FLAGS.items():
            group.add_argument(flag, dest=key, type=kind, default=None)
        group.add_argument('--scheme', choices=[s.value for s in Scheme], default=None)
        group.add_argument('--linear', action='store_true', help='Drop the nonlinear pump depletion terms')
        parser.add_argument('--near-field', action='store_true',
                            help='Record the near field of trajectory 0 and its phase spread')
        parser.add_argument('--checkpoint', help='Save the final state of trajectory 0 (.npz)')
        parser.add_argument('--resume', help='Start every trajectory from a saved state')
        add_worker_argument(parser)
        add_output_arguments(parser)
        return parser

    def _overrides(self, args):
        overrides = {f'simulation.{key}': getattr(args, key) for key in SIMULATION_FLAGS}
        overrides['simulation.scheme'] = args.scheme
        if args.linear:
            overrides['simulation.nonlinear'] = False
        return overrides

    def execute(self, args, config_manager, console):
        params, config, _ = load_records(args, config_manager, self._overrides(args))
        workers = resolve_workers(args)
        grid = langevin.check_commensurate(params, config)
        print_params(console, params)

        initial = None
        if args.resume:
            initial, header = langevin.FieldState.load(args.resume)
            if header["grid_points"] != grid.points or not np.isclose(header["box_length"], grid.length):
                raise ConfigError(f"checkpoint grid ({header['grid_points']} points, L={header['box_length']:.6g}) "
                                  f"does not match the configured grid", field="resume")
            console.print(f"[dim]Resuming from {args.resume} at t={initial.t:.6g}[/dim]")

        with console.status(f"Integrating {config.n_trajectories} trajectories..."):
            stats = langevin.run_ensemble(params, config, workers, initial)

        k, pump, signal = stats.shifted()
        positive = k > 0
        peak = int(np.argmax(np.where(positive, signal, -np.inf)))
        i_plus = grid.index_of(grid.index_kc)
        print_values(console, "Ensemble far field", {
            "trajectories": stats.n_trajectories,
            "samples per trajectory": stats.samples_per_trajectory,
            "signal peak |k|": float(k[peak]),
            "expected k_c": params.kc,
            "<|b(k_c)|^2>": float(stats.far_field_signal[i_plus]),
            "<|b(k_c)|^2> error": float(stats.error_bars["far_field_signal"][i_plus]),
        })

        if args.near_field:
            record = langevin.near_field_record(params, config)
            spread = record.phase_spread()
            console.print(Panel.fit(
                "\n".join(f"window {n + 1}: {value:.4f}" for n, value in enumerate(spread)),
                title="Pattern phase circular variance", border_style="cyan",
            ))

        if args.checkpoint:
            stats.final_states[0].save(args.checkpoint, grid.length, config.seed, stats.rng_states[0])
            console.print(f"[green]✓ Checkpoint saved to {args.checkpoint}[/green]")

        records = [
            ResultRecord(params=params.snapshot(), observable=Observable.SIMULATE.value,
                         values={"k": float(k[n]), "far_field_pump": float(pump[n]),
                                 "far_field_signal": float(signal[n])},
                         engine=Engine.LANGEVIN.value, version=__version__, seed=config.seed)
            for n in range(k.size)
        ]
        metadata = {"version": __version__, "observable": Observable.SIMULATE.value,
                    "engine": Engine.LANGEVIN.value, "seed": config.seed,
                    "params": params.model_dump(mode="json"), "simulation": config.model_dump(mode="json")}
        write_records(args.output, records, metadata, console)
