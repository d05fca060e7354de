"""
CLI commands package
"""

from .analytic import (
    DuanCommand,
    IntensityCommand,
    MatrixCheckCommand,
    ReidCommand,
    SpectrumCommand,
    SqueezeCommand,
    SteadyCommand,
    ThresholdCommand,
    TwinCommand,
)
from .base import BaseCommand
from .simulate import SimulateCommand
from .sweep import ReproduceFigureCommand, SweepCommand

__all__ = [
    'BaseCommand',
    'SteadyCommand',
    'MatrixCheckCommand',
    'SpectrumCommand',
    'IntensityCommand',
    'ThresholdCommand',
    'SqueezeCommand',
    'DuanCommand',
    'ReidCommand',
    'TwinCommand',
    'SimulateCommand',
    'SweepCommand',
    'ReproduceFigureCommand',
]
