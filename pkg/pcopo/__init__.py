"""
PCOPO workbench: analytical and stochastic engines for the below-threshold
optical parametric oscillator with an intracavity photonic crystal
"""

__version__ = "1.0.0"
