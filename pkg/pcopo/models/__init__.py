"""
Data models for the PCOPO workbench
"""

from .params import ModelParams, Scheme, SimConfig
from .results import (
    BoundConvention,
    Engine,
    EntanglementReport,
    MomentSet,
    Observable,
    QuadratureSpec,
    ResultRecord,
    SweepSpec,
    TwinBeamReport,
)

__all__ = [
    'ModelParams',
    'Scheme',
    'SimConfig',
    'BoundConvention',
    'Engine',
    'EntanglementReport',
    'MomentSet',
    'Observable',
    'QuadratureSpec',
    'ResultRecord',
    'SweepSpec',
    'TwinBeamReport',
]
