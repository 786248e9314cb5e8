"""Forecast calibration and friction-aware portfolio decisions.

The pipeline: predictive distributions (quantile grids) are post-processed
by monotone calibration maps, converted into trades by a cost-aware
constrained optimizer, and evaluated by realised decision loss under a
pre-committed walk-forward protocol with dependence-aware inference,
stress testing, and drift monitoring.
"""

__version__ = "0.1.0"
