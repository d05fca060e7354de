"""
Analytic few-mode model and stochastic field simulator of the PCOPO
"""

from . import correlations, langevin, model_core

__all__ = ['correlations', 'langevin', 'model_core']
