"""One-step maps and path integrators: Euler-Maruyama, Milstein,
Wick-exponential, and order-truncated Wick schemes.

Scalar step functions operate on one state value; the ``simulate_*`` batch
integrators advance a whole vector of paths per time step.  The ratio
sigma/sigma' from the Wick-exponential update is never materialized: every
step goes through the regularized increment in :mod:`wicksde.wick`, which is
well defined for vanishing sigma'.  Non-finite states abort a path rather
than being clamped, since silent clamping would bias Monte Carlo estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import wick
from .brownian import BrownianGrid, GridSpec
from .models import Diffusion
from .wick import ExponentOverflowError, WickIncrementInput

__all__ = [
    "SchemeKind",
    "EULER",
    "MILSTEIN",
    "WICK",
    "Trajectory",
    "SimulationError",
    "euler_step",
    "milstein_step",
    "wick_step",
    "truncated_step",
    "simulate",
    "simulate_values",
    "simulate_terminal",
]

_TAGS = ("euler", "milstein", "wick", "wick_truncated")


@dataclass(frozen=True)
class SchemeKind:
    """Scheme selector: euler | milstein | wick | wick_truncated(order)."""

    tag: str
    order: int | None = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown scheme {self.tag!r}; expected one of {_TAGS}")
        if self.tag == "wick_truncated":
            if not (isinstance(self.order, int) and 1 <= self.order <= wick.HERMITE_MAX_DEGREE):
                raise ValueError(
                    f"wick_truncated order must be an integer in [1, {wick.HERMITE_MAX_DEGREE}],"
                    f" got {self.order!r}"
                )
        elif self.order is not None:
            raise ValueError(f"scheme {self.tag!r} takes no order")

    @classmethod
    def truncated(cls, order: int) -> "SchemeKind":
        return cls("wick_truncated", int(order))

    @classmethod
    def parse(cls, text: str) -> "SchemeKind":
        """Parse "euler" | "milstein" | "wick" | "wick_truncated:ORDER"."""
        name, sep, order = text.partition(":")
        name = name.strip()
        if name == "wick_truncated":
            if not sep:
                raise ValueError("wick_truncated needs an order, e.g. wick_truncated:2")
            try:
                return cls.truncated(int(order))
            except ValueError as exc:
                raise ValueError(f"bad wick_truncated order {order!r}") from exc
        if sep:
            raise ValueError(f"scheme {name!r} takes no parameter")
        return cls(name)

    def __str__(self) -> str:
        if self.tag == "wick_truncated":
            return f"wick_truncated:{self.order}"
        return self.tag


EULER = SchemeKind("euler")
MILSTEIN = SchemeKind("milstein")
WICK = SchemeKind("wick")


@dataclass(frozen=True)
class Trajectory:
    """Node values x(0..N) of one simulated path."""

    grid: GridSpec
    values: np.ndarray
    scheme: SchemeKind
    model_name: str

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"expected {self.grid.n_steps + 1} node values, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


class SimulationError(RuntimeError):
    """A path became non-finite (or overflowed) at ``step_index``."""

    def __init__(self, step_index: int, message: str):
        self.step_index = step_index
        super().__init__(f"step {step_index}: {message}")


def euler_step(x: float, d: Diffusion, db: float, dt: float) -> float:
    """x + sigma(x)*db (the dt argument is kept for a uniform signature)."""
    return x + float(d.sigma(x)) * db


def milstein_step(y: float, d: Diffusion, db: float, dt: float) -> float:
    """y + sigma*db + sigma*sigma'*(db^2 - dt)/2."""
    s = float(d.sigma(y))
    sp = float(d.sigma_prime(y))
    return y + (s * db + ((s * sp) / 2.0) * (db * db - dt))


def wick_step(x: float, d: Diffusion, db: float, dt: float) -> float:
    """One step of the Wick-exponential scheme.

    For linear sigma(x) = alpha*x this is x*exp(alpha*db - alpha^2*dt/2),
    the exact strong-solution transition.
    """
    inp = WickIncrementInput(float(d.sigma(x)), float(d.sigma_prime(x)), db, dt)
    return x + wick.wick_scheme_increment(inp)


def truncated_step(x: float, d: Diffusion, db: float, dt: float, order: int) -> float:
    """Step of the order-truncated Wick series; order 1 reproduces
    ``euler_step`` and order 2 reproduces ``milstein_step`` exactly."""
    inp = WickIncrementInput(float(d.sigma(x)), float(d.sigma_prime(x)), db, dt)
    return x + wick.truncated_wick_increment(inp, order)


def _scalar_step(kind: SchemeKind):
    if kind.tag == "euler":
        return euler_step
    if kind.tag == "milstein":
        return milstein_step
    if kind.tag == "wick":
        return wick_step
    order = kind.order
    return lambda x, d, db, dt: truncated_step(x, d, db, dt, order)


def simulate(
    d: Diffusion, a: float, g: BrownianGrid, kind: SchemeKind, model_name: str = "custom"
) -> Trajectory:
    """Integrate one path over the grid; deterministic given its inputs.

    Raises SimulationError (with the failing step index) if a step overflows
    or produces a non-finite state.
    """
    dt = g.spec.dt
    step = _scalar_step(kind)
    values = np.empty(g.spec.n_steps + 1)
    x = float(a)
    values[0] = x
    for k in range(g.spec.n_steps):
        try:
            x = float(step(x, d, float(g.increments[k]), dt))
        except ExponentOverflowError as exc:
            raise SimulationError(k, str(exc)) from exc
        if not np.isfinite(x):
            raise SimulationError(k, f"state became non-finite ({x!r})")
        values[k + 1] = x
    return Trajectory(grid=g.spec, values=values, scheme=kind, model_name=model_name)


def _advance(kind: SchemeKind, x: np.ndarray, d: Diffusion, db: np.ndarray, dt: float):
    if kind.tag == "euler":
        return x + d.sigma(x) * db
    if kind.tag == "milstein":
        s = d.sigma(x)
        sp = d.sigma_prime(x)
        return x + (s * db + ((s * sp) / 2.0) * (db * db - dt))
    s = d.sigma(x)
    u = d.sigma_prime(x)
    if kind.tag == "wick":
        return x + wick.increment_array(s, u, db, dt)
    return x + wick.truncated_increment_array(s, u, db, dt, kind.order)


def simulate_values(
    d: Diffusion, a: float, increments: np.ndarray, dt: float, kind: SchemeKind
) -> np.ndarray:
    """All node values for a batch of paths: (n_paths, N) -> (n_paths, N+1).

    Non-finite states propagate instead of raising; callers inspect the
    result (a failed path stays non-finite through to the terminal node).
    """
    increments = np.asarray(increments, dtype=np.float64)
    n_paths, n_steps = increments.shape
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = a
    x = np.full(n_paths, float(a))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = _advance(kind, x, d, increments[:, k], dt)
            out[:, k + 1] = x
    return out


def simulate_terminal(
    d: Diffusion, a: float, increments: np.ndarray, dt: float, kind: SchemeKind
) -> np.ndarray:
    """Terminal values only; same recursion as :func:`simulate_values`."""
    increments = np.asarray(increments, dtype=np.float64)
    n_paths, n_steps = increments.shape
    x = np.full(n_paths, float(a))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = _advance(kind, x, d, increments[:, k], dt)
    return x
