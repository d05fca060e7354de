"""
Commands evaluating the analytic below-threshold model
"""

import logging
import math
from typing import Dict, NamedTuple

import numpy as np

from .. import __version__
from ..models.params import ModelParams
from ..models.results import BoundConvention, Engine, Observable, QuadratureSpec, ResultRecord
from ..physics import correlations, model_core
from .base import (
    BaseCommand,
    add_model_arguments,
    add_output_arguments,
    format_number,
    load_records,
    print_params,
    print_values,
    write_records,
)

logger = logging.getLogger(__name__)


def _record(params: ModelParams, observable: str, values: Dict) -> ResultRecord:
    return ResultRecord(params=params.snapshot(), observable=observable, values=values,
                        engine=Engine.ANALYTIC.value, version=__version__)


def _metadata(params: ModelParams, observable: str) -> Dict:
    return {"version": __version__, "observable": observable, "engine": Engine.ANALYTIC.value,
            "params": params.model_dump(mode="json")}


class SteadyCommand(BaseCommand):
    """Pump steady state, coupling constants and drift eigenvalues"""

    name = 'steady'
    help = 'Pump steady state and linear stability'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        parser.add_argument('--harmonics', type=int, default=0,
                            help='Also solve the untruncated pump over |n| <= HARMONICS')
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        steady = model_core.pump_steady_state(params)
        values = {f"A({n}*kp)": amplitude for n, amplitude in steady.as_dict().items()}
        if params.is_resonant:
            coupling = model_core.coupling_constants(params)
            modes = model_core.decoupled_modes(params)
            values.update({"S": coupling.S, "kappa": coupling.kappa,
                           "stability margin": modes.stability_margin(),
                           "sigma_den": correlations.sigma_den(params)})
        print_values(console, "Pump steady state", values)

        if args.harmonics:
            amplitudes = model_core.pump_harmonics(params, args.harmonics)
            print_values(console, "Untruncated pump harmonics",
                         {f"A({n}*kp)": complex(amplitudes[n + args.harmonics])
                          for n in range(-args.harmonics, args.harmonics + 1)})


class MatrixCheckResult(NamedTuple):
    closed: float
    numeric: float
    agreement: float
    restriction: float


def dual_inversion_check(draws: int, seed: int = 0) -> MatrixCheckResult:
    """
    Worst residuals over random below-threshold draws.

    E in [0, 0.99 E_thr], M0 and M1 in [0, 1], omega in [-5, 5].

    Returns:
        MatrixCheckResult: max |L L^-1 - I| for the closed and numeric inverses,
        max |closed - numeric| and max |restricted 6-mode L - L|
    """
    rng = np.random.default_rng(seed)
    worst = np.zeros(4)
    for _ in range(draws):
        M0, M1 = rng.uniform(0.0, 1.0, size=2)
        base = ModelParams(M0=M0, M1=M1)
        params = base.with_E(rng.uniform(0.0, 0.99) * correlations.threshold(base))
        omega = float(rng.uniform(-5.0, 5.0))

        L = model_core.build_L(params, omega)
        closed = model_core.invert_L_closed(params, omega)
        numeric = model_core.invert_numeric(L)
        restricted = model_core.restrict_L6(model_core.build_L6(params, params.kc, omega))
        identity = np.eye(4)
        worst = np.maximum(worst, [
            np.max(np.abs(L @ closed - identity)),
            numeric.residual,
            np.max(np.abs(closed - numeric.matrix)),
            np.max(np.abs(restricted - L)),
        ])
    logger.debug(f"Dual inversion over {draws} draws: worst residuals {worst}")
    return MatrixCheckResult(*(float(value) for value in worst))


class MatrixCheckCommand(BaseCommand):
    """Closed-form against numeric inversion of the linear operator"""

    name = 'matrix-check'
    help = 'Verify the closed-form inverse against numeric inversion'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        parser.add_argument('--draws', type=int, default=1000, help='Random below-threshold draws')
        parser.add_argument('--seed', type=int, default=0, help='Random seed')
        return parser

    def execute(self, args, config_manager, console):
        result = dual_inversion_check(args.draws, args.seed)
        console.print(format(result.closed, '.3e'), highlight=False)
        print_values(console, f"Residuals over {args.draws} draws", {
            "max |L L^-1 - I| (closed)": result.closed,
            "max |L L^-1 - I| (numeric)": result.numeric,
            "max |closed - numeric|": result.agreement,
            "max |restricted L6 - L|": result.restriction,
        }, digits=3)


class SpectrumCommand(BaseCommand):
    """Output photon-number spectrum of the mode k_c"""

    name = 'spectrum'
    help = 'Spectral intensity over a frequency range'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        parser.add_argument('--omega-min', type=float, default=-4.0)
        parser.add_argument('--omega-max', type=float, default=4.0)
        parser.add_argument('--points', type=int, default=81)
        add_output_arguments(parser)
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        omegas = np.linspace(args.omega_min, args.omega_max, args.points)
        values = [correlations.spectral_intensity(params, float(w)) for w in omegas]
        records = [_record(params, Observable.SPECTRUM.value, {"omega": float(w), "spectral_intensity": v})
                   for w, v in zip(omegas, values)]
        peak = int(np.argmax(values))
        closed = [correlations.spectral_intensity_closed(params, float(w)) for w in omegas]
        print_values(console, "Spectral intensity", {
            "peak omega": float(omegas[peak]),
            "peak value": values[peak],
            "value at omega=0": correlations.spectral_intensity(params, 0.0),
            "closed form max deviation": float(np.max(np.abs(np.subtract(closed, values))))
                                         / max(values[peak], np.finfo(float).tiny),
        })
        write_records(args.output, records, _metadata(params, Observable.SPECTRUM.value), console)


class IntensityCommand(BaseCommand):
    """Stationary output intensity of the mode k_c"""

    name = 'intensity'
    help = 'Stationary output intensity'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        parser.add_argument('--digits', type=int, default=6, help='Significant digits printed')
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        console.print(format_number(correlations.intensity(params), args.digits), highlight=False)


class ThresholdCommand(BaseCommand):
    """Pump threshold for the configured modulation"""

    name = 'threshold'
    help = 'Threshold pump amplitude'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser, relative=False)
        parser.add_argument('--digits', type=int, default=7, help='Significant digits printed')
        parser.add_argument('--compare', action='store_true', help='Also print the closed-form threshold')
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        console.print(format_number(correlations.threshold(params), args.digits), highlight=False)
        if args.compare:
            console.print(f"[dim]closed form: {format_number(correlations.analytic_threshold(params), 12)}[/dim]",
                          highlight=False)


def _add_angle_arguments(parser) -> None:
    parser.add_argument('--theta', type=float, default=None, help='Quadrature angle (radians)')
    parser.add_argument('--phi', type=float, default=None, help='Superposition angle (radians)')
    parser.add_argument('--field', choices=correlations.FIELDS, default='output')


class SqueezeCommand(BaseCommand):
    """Superposition variance at given angles, or its minimum"""

    name = 'squeeze'
    help = 'Quadrature variance of the two-mode superposition'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        _add_angle_arguments(parser)
        parser.add_argument('--points', type=int, default=correlations.DEFAULT_ANGLE_POINTS,
                            help='Angle grid points for the minimum search')
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        moments = correlations.second_moments(params, args.field)
        if args.theta is not None and args.phi is not None:
            value = correlations.quadrature_variance(params, QuadratureSpec(args.theta, args.phi), args.field)
            print_values(console, "Superposition variance (vacuum 2)", {"variance": value})
            return
        best = correlations.min_variance_from_moments(moments, args.points, args.points)
        print_values(console, "Minimum variance (vacuum 2)", {
            "min variance": best.value,
            "theta": best.theta,
            "phi": best.phi,
            "squeezing (dB)": 10 * math.log10(best.value / 2) if best.value > 0 else -math.inf,
        })


class DuanCommand(BaseCommand):
    """Duan inseparability sum at given angles or its entangled area"""

    name = 'duan'
    help = 'Duan inseparability criterion'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        _add_angle_arguments(parser)
        parser.add_argument('--weight', type=float, default=1.0, help='Balance parameter w')
        parser.add_argument('--convention', choices=[c.value for c in BoundConvention],
                            default=BoundConvention.AS_PRINTED.value, help='Bound 2(w^2+1/w) or 2(w^2+1/w^2)')
        parser.add_argument('--points', type=int, default=correlations.DEFAULT_ANGLE_POINTS)
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        convention = BoundConvention(args.convention)
        if args.theta is not None and args.phi is not None:
            report = correlations.duan_criterion(params, QuadratureSpec(args.theta, args.phi),
                                                 args.weight, convention, args.field)
            print_values(console, "Duan criterion", report.to_dict())
            return
        theta, phi = correlations.angle_grid(args.points, args.points)
        emap = correlations.entanglement_map(params, theta, phi, args.weight, convention, args.field)
        i, j = np.unravel_index(np.argmin(emap.duan_sum), emap.duan_sum.shape)
        print_values(console, "Duan criterion over all angles", {
            "bound": emap.duan_bound,
            "min sum": float(emap.duan_sum[i, j]),
            "at theta": float(theta[i]),
            "at phi": float(phi[j]),
            "entangled area fraction": emap.duan_area,
        })


class ReidCommand(BaseCommand):
    """Reid EPR product at given angles or its entangled area"""

    name = 'reid'
    help = 'Reid EPR criterion'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        _add_angle_arguments(parser)
        parser.add_argument('--points', type=int, default=correlations.DEFAULT_ANGLE_POINTS)
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        if args.theta is not None and args.phi is not None:
            report = correlations.reid_criterion(params, QuadratureSpec(args.theta, args.phi), args.field)
            print_values(console, "Reid criterion", report.to_dict())
            return
        theta, phi = correlations.angle_grid(args.points, args.points)
        emap = correlations.entanglement_map(params, theta, phi, field=args.field)
        i, j = np.unravel_index(np.argmin(emap.reid_product), emap.reid_product.shape)
        print_values(console, "Reid criterion over all angles", {
            "min product": float(emap.reid_product[i, j]),
            "at theta": float(theta[i]),
            "at phi": float(phi[j]),
            "EPR area fraction": emap.reid_area,
            "Duan and EPR overlap": emap.overlap_area,
        })


class TwinCommand(BaseCommand):
    """Twin-beam number-difference variance"""

    name = 'twin'
    help = 'Twin-beam correlations normalized to shot noise'

    def add_parser(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        add_model_arguments(parser)
        return parser

    def execute(self, args, config_manager, console):
        params = load_records(args, config_manager).model
        print_params(console, params)
        report = correlations.twin_beams(params)
        values = report.to_dict()
        values["nonclassical"] = report.nonclassical
        print_values(console, "Twin beams", values)
