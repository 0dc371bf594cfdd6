"""Wick-calculus kernel for a single Gaussian increment.

Provides probabilists' Hermite polynomials, Wick powers of a Brownian
increment, the Wick exponential exp(u*db - u^2*dt/2), and the numerically
stable one-step increment

    (sigma/u) * (exp(u*db - u^2*dt/2) - 1)

used by the Wick-exponential scheme.  The increment has a removable
singularity at u = 0; below a dimensionless threshold it is evaluated through
its series expansion

    sigma * sum_{j>=1} u^(j-1) * (db)^{wick j} / j!

truncated at third order, whose u -> 0 limit is sigma*db.  Everything here is
a pure function of its arguments and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HERMITE_MAX_DEGREE",
    "EXPONENT_GUARD",
    "SERIES_THRESHOLD",
    "ExponentOverflowError",
    "WickIncrementInput",
    "hermite",
    "wick_power",
    "wick_exponential",
    "wick_scheme_increment",
    "truncated_wick_increment",
    "increment_array",
    "truncated_increment_array",
]

# degree cap for the Hermite/Wick recurrences (overflow guard)
HERMITE_MAX_DEGREE = 64
# |exponent| cap, just below the double-precision exp() overflow boundary;
# a diagnosable error beats an infinity propagating through a Monte Carlo mean
EXPONENT_GUARD = 700.0
# switch to the series branch when |u|*(|db| + sqrt(dt)) falls below this;
# there the third-order series has relative error ~1e-12 while the
# (expm1/u) form starts to lose significance to cancellation
SERIES_THRESHOLD = 1e-4


class ExponentOverflowError(OverflowError):
    """exp() argument outside the safe double-precision range."""

    def __init__(self, exponent: float):
        self.exponent = exponent
        super().__init__(
            f"wick exponential argument {exponent!r} exceeds +/-{EXPONENT_GUARD:g}"
        )


@dataclass(frozen=True)
class WickIncrementInput:
    """Per-step data for the scheme increment.

    sigma_x and u are sigma and sigma' evaluated at the current state, db is
    the Brownian increment over the step, dt the step length.
    """

    sigma_x: float
    u: float
    db: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        for name in ("sigma_x", "u", "db", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")


def _check_degree(j: int) -> int:
    j = int(j)
    if j < 0:
        raise ValueError(f"degree must be nonnegative, got {j}")
    if j > HERMITE_MAX_DEGREE:
        raise ValueError(
            f"degree {j} exceeds the supported maximum {HERMITE_MAX_DEGREE}"
        )
    return j


def hermite(j: int, x):
    """Probabilists' Hermite polynomial He_j(x).

    Evaluated by the three-term recurrence He_0 = 1, He_1 = x,
    He_{j+1} = x*He_j - j*He_{j-1}, which is stable and O(j).  Accepts a
    float or numpy array.  Degrees above 64 are rejected.
    """
    j = _check_degree(j)
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if j == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x
    for k in range(1, j):
        h_prev, h = h, x * h - k * h_prev
    return h if np.ndim(h) else float(h)


def wick_power(db, dt: float, j: int):
    """j-th Wick power of a centered Gaussian increment of variance dt.

    Equals dt^(j/2) * He_j(db/sqrt(dt)); computed via the scaled recurrence
    w_0 = 1, w_1 = db, w_{j+1} = db*w_j - j*dt*w_{j-1}, which avoids forming
    db/sqrt(dt).  First power is db itself; second is db^2 - dt.
    """
    j = _check_degree(j)
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    db = np.asarray(db, dtype=float)
    w_prev = np.ones_like(db)
    if j == 0:
        return w_prev if w_prev.ndim else float(w_prev)
    w = db
    for k in range(1, j):
        w_prev, w = w, db * w - k * dt * w_prev
    return w if np.ndim(w) else float(w)


def wick_exponential(u: float, db: float, dt: float) -> float:
    """exp(u*db - u^2*dt/2): the Wick exponential of a Gaussian increment.

    Strictly positive, with conditional mean one.  Raises
    ExponentOverflowError when the exponent magnitude exceeds 700.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    z = u * db - 0.5 * u * u * dt
    if abs(z) > EXPONENT_GUARD:
        raise ExponentOverflowError(z)
    return math.exp(z)


def wick_scheme_increment(inp: WickIncrementInput) -> float:
    """One-step increment of the Wick-exponential scheme, regularized.

    Closed form (sigma/u)*expm1(u*db - u^2*dt/2) when
    |u|*(|db| + sqrt(dt)) >= SERIES_THRESHOLD, third-order Wick series
    otherwise; the two branches agree to ~1e-12 relative around the switch.
    """
    u, db, dt = inp.u, inp.db, inp.dt
    if abs(u) * (abs(db) + math.sqrt(dt)) >= SERIES_THRESHOLD:
        z = u * db - 0.5 * u * u * dt
        if abs(z) > EXPONENT_GUARD:
            raise ExponentOverflowError(z)
        return (inp.sigma_x / u) * math.expm1(z)
    w2 = db * db - dt
    w3 = db * w2 - 2.0 * dt * db
    return inp.sigma_x * ((db + (u * 0.5) * w2) + (u * u / 6.0) * w3)


def truncated_wick_increment(inp: WickIncrementInput, order: int) -> float:
    """Partial sum sigma * sum_{j=1..order} u^(j-1) * w_j / j!.

    order = 1 is the Euler increment sigma*db; order = 2 adds the Milstein
    correction sigma*sigma'*(db^2 - dt)/2 (bit-for-bit the same arithmetic as
    ``schemes.milstein_step``); large orders converge to the closed form for
    |u*db| <= 1.
    """
    order = int(order)
    if not 1 <= order <= HERMITE_MAX_DEGREE:
        raise ValueError(f"order must be in [1, {HERMITE_MAX_DEGREE}], got {order}")
    u, db, dt = inp.u, inp.db, inp.dt
    coeff = inp.sigma_x  # sigma * u^(j-1) / j!
    w_prev, w = 1.0, db
    total = coeff * w
    for j in range(2, order + 1):
        coeff = coeff * u / j
        w_prev, w = w, db * w - (j - 1) * dt * w_prev
        total = total + coeff * w
    return total


def increment_array(sigma_x, u, db, dt):
    """Vectorized scheme increment over numpy arrays (broadcasting).

    Same branches as ``wick_scheme_increment`` but never raises: an exponent
    beyond the guard overflows to inf and surfaces as a non-finite state,
    which path-level code counts as a failure.
    """
    sigma_x = np.asarray(sigma_x, dtype=float)
    u = np.asarray(u, dtype=float)
    db = np.asarray(db, dtype=float)
    small = np.abs(u) * (np.abs(db) + math.sqrt(dt)) < SERIES_THRESHOLD
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u_safe = np.where(small, 1.0, u)
        z = np.where(small, 0.0, u * db - 0.5 * u * u * dt)
        closed = (sigma_x / u_safe) * np.expm1(z)
        w2 = db * db - dt
        w3 = db * w2 - 2.0 * dt * db
        series = sigma_x * ((db + (u * 0.5) * w2) + (u * u / 6.0) * w3)
        return np.where(small, series, closed)


def truncated_increment_array(sigma_x, u, db, dt, order: int):
    """Vectorized order-truncated Wick series increment."""
    order = int(order)
    if not 1 <= order <= HERMITE_MAX_DEGREE:
        raise ValueError(f"order must be in [1, {HERMITE_MAX_DEGREE}], got {order}")
    sigma_x = np.asarray(sigma_x, dtype=float)
    u = np.asarray(u, dtype=float)
    db = np.asarray(db, dtype=float)
    coeff = sigma_x
    w_prev, w = np.ones_like(db), db
    total = coeff * w
    for j in range(2, order + 1):
        coeff = coeff * u / j
        w_prev, w = w, db * w - (j - 1) * dt * w_prev
        total = total + coeff * w
    return total
