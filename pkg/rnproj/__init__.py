"""
rnproj: option-implied moments, distributions and dependence by projection
onto traded payoff spans.
"""

__version__ = "0.1.0"
