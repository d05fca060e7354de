"""
Parameter sweep and figure reproduction commands
"""

from typing import List, Tuple

from ..errors import ParameterError
from ..models.results import BoundConvention, Engine, Observable
from ..sweep import FIGURE_IDS, expand_axis, reproduce_figure, run_sweep, sweep_metadata
from .base import (
    BaseCommand,
    add_model_arguments,
    add_worker_argument,
    load_records,
    print_params,
    record_table,
    resolve_workers,
    write_records,
)


def parse_axis(text: str) -> Tuple[str, List[float]]:
    """
    NAME=START:STOP:STEP (stop included) or NAME=V1,V2,...

    Raises:
        ParameterError: malformed axis
    """
    name, sep, body = text.partition('=')
    if not sep or not name or not body:
        raise ParameterError(f"axis '{text}' must look like NAME=START:STOP:STEP or NAME=V1,V2", field='axis')
    try:
        if ':' in body:
            start, stop, step = (float(part) for part in body.split(':'))
            return name.strip(), expand_axis({'start': start, 'stop': stop, 'step': step})
        return name.strip(), [float(part) for part in body.split(',')]
    except ValueError as e:
        raise ParameterError(f"axis '{text}': {e}", field='axis')


class SweepCommand(BaseCommand):
    """Evaluate one observable over a parameter grid"""

    name = 'sweep'
    help = 'Run a parameter sweep and export CSV/JSON'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        parser.add_argument('--axis', action='append', default=[], metavar='NAME=SPEC',
                            help='Sweep axis, repeatable (NAME=START:STOP:STEP or NAME=V1,V2)')
        parser.add_argument('--observable', choices=[o.value for o in Observable], default=None)
        parser.add_argument('--engine', choices=[e.value for e in Engine], default=None)
        parser.add_argument('--omega', default=None, help='Spectrum frequencies START:STOP:STEP')
        parser.add_argument('--angle-points', type=int, default=None, help='Theta and phi grid points')
        parser.add_argument('--weight', type=float, default=None, help='Duan balance parameter')
        parser.add_argument('--convention', choices=[c.value for c in BoundConvention], default=None)
        parser.add_argument('--output', '-o', default=None, help='Output .csv or .json (default from config)')
        add_worker_argument(parser)
        return parser

    def _overrides(self, args):
        overrides = {
            'sweep.observable': args.observable,
            'sweep.engine': args.engine,
            'sweep.duan_weight': args.weight,
            'sweep.duan_convention': args.convention,
            'sweep.output_path': args.output,
            'sweep.theta_points': args.angle_points,
            'sweep.phi_points': args.angle_points,
        }
        if args.axis:
            overrides['sweep.axes'] = [list(parse_axis(text)) for text in args.axis]
        if args.omega:
            overrides['sweep.omega'] = parse_axis(f"omega={args.omega}")[1]
        return overrides

    def execute(self, args, config_manager, console):
        params, config, spec = load_records(args, config_manager, self._overrides(args))
        print_params(console, params)
        records = run_sweep(spec, params, config, resolve_workers(args))
        record_table(console, f"{spec.observable.value} ({spec.engine.value})", records)
        write_records(spec.output_path, records, sweep_metadata(spec, params, config), console)


class ReproduceFigureCommand(BaseCommand):
    """Run a stored figure recipe"""

    name = 'reproduce-figure'
    help = 'Regenerate the data of a figure from its stored recipe'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        parser.add_argument('figure', choices=FIGURE_IDS, help='Figure identifier')
        parser.add_argument('--output-dir', default='.', help='Directory for the data files')
        parser.add_argument('--no-plot', action='store_true', help='Skip the gnuplot script')
        add_worker_argument(parser)
        return parser

    def execute(self, args, config_manager, console):
        with console.status(f"Reproducing {args.figure}..."):
            written = reproduce_figure(args.figure, args.output_dir, resolve_workers(args),
                                       plot_script=not args.no_plot)
        for path in written:
            console.print(f"[green]✓ {path}[/green]")
