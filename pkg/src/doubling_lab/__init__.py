"""Numerical laboratory for measure doubling of small sets in SO(3).

Quaternion rotation arithmetic with exact Haar sampling, constructive
measurable sets with closed-form measures, Monte Carlo and certified-grid
measure brackets, growth functionals, and derivative-free extremizer search.
"""

__version__ = "0.1.0"
