"""Spare-parts inventory toolkit.

AHP-weighted ABC classification, BIC-selected demand and lead-time models,
roulette-wheel demand synthesis, (ROP, ROQ) simulation-optimization and
service-level / cost curves.
"""

__version__ = "0.1.0"
