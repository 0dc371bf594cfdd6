"""wicksde: strong approximation of drift-less scalar Ito SDEs
dX = sigma(X) dB via Wick-exponential stepping, with Euler-Maruyama and
Milstein baselines and a Monte Carlo verification layer.
"""

from . import analysis, brownian, models, schemes, wick

__version__ = "0.1.0"

__all__ = ["analysis", "brownian", "models", "schemes", "wick", "__version__"]
