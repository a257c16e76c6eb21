"""Next-day cryptocurrency direction prediction with discrete dynamic
Bayesian networks, plus ARIMA and SVR baselines for comparison.

Submodules are imported explicitly (``from coindbn import dbn``); nothing
is re-exported here so the heavy numeric modules load only when used.
"""

__version__ = "0.1.0"
