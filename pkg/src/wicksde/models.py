"""Diffusion coefficients and the built-in model catalog.

A model is a drift-less scalar diffusion dX(t) = sigma(X(t)) dB(t), described
by a :class:`Diffusion`: the coefficient, its derivative, and optional
constants consumed by the moment/gap bounds (L1 = Lipschitz constant of
sigma, L2 = Lipschitz constant of sigma*sigma', M1 with
sigma(x)^2 <= M1*(1 + x^2)).  All callables must be pure and accept floats or
numpy arrays elementwise, so they can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Diffusion",
    "ModelCatalogEntry",
    "ModelCheckFailure",
    "make_linear",
    "make_constant",
    "make_pythagoras",
    "make_sine",
    "catalog",
    "catalog_names",
    "resolve_model",
    "validate_model",
    "DEFAULT_PROBES",
]

DEFAULT_PROBES = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)

_FD_STEP = 1e-6
_FD_RTOL = 1e-6
_FD_ATOL = 1e-9
# one-ulp style slack so identities that are exact in real arithmetic
# (e.g. hypot(1,x)^2 vs 1+x^2) do not trip the constant checks
_CONSTANT_SLACK = 1e-12


@dataclass(frozen=True)
class Diffusion:
    """A scalar diffusion coefficient with derivative and declared constants.

    ``sigma`` and ``sigma_prime`` must be vectorized (float in -> float out,
    array in -> array out).  ``exact_terminal(a, b, t)`` maps the initial
    value, the Brownian value B(t) and the time t to the strong solution at
    t; it is present only when a closed form is known.  Constants are
    user-declared, never inferred; ``validate_model`` checks them against
    probe points.
    """

    sigma: Callable
    sigma_prime: Callable
    lipschitz_sigma: float | None = None
    lipschitz_sigma_sigma_prime: float | None = None
    growth_constant: float | None = None
    exact_terminal: Callable | None = None


@dataclass(frozen=True)
class ModelCatalogEntry:
    name: str
    diffusion: Diffusion
    default_initial: float
    notes: str


@dataclass(frozen=True)
class ModelCheckFailure:
    """One violated model invariant, with where and by how much."""

    invariant: str  # "derivative" | "growth" | "lipschitz"
    location: str
    observed: float
    allowed: float

    def __str__(self) -> str:
        return (
            f"{self.invariant} violated at {self.location}: "
            f"observed {self.observed:.6g} > allowed {self.allowed:.6g}"
        )


def make_linear(alpha: float) -> Diffusion:
    """Linear coefficient sigma(x) = alpha*x with its closed-form solution.

    The solution of dX = alpha*X dB is X(t) = a*exp(alpha*B(t) - alpha^2 t/2),
    so ``exact_terminal`` is exact at every time.  Rejects alpha = 0 (the SDE
    degenerates; use ``make_constant(0.0)`` for a frozen state instead).
    """
    alpha = float(alpha)
    if alpha == 0.0 or not np.isfinite(alpha):
        raise ValueError(
            "alpha must be a nonzero finite real; use make_constant(0.0) for zero diffusion"
        )

    def sigma(x):
        return alpha * x

    def sigma_prime(x):
        return np.full_like(np.asarray(x, dtype=float), alpha)

    def exact_terminal(a, b, t):
        return a * np.exp(alpha * b - 0.5 * alpha * alpha * t)

    return Diffusion(
        sigma=sigma,
        sigma_prime=sigma_prime,
        lipschitz_sigma=abs(alpha),
        lipschitz_sigma_sigma_prime=alpha * alpha,
        growth_constant=alpha * alpha,
        exact_terminal=exact_terminal,
    )


def make_constant(c: float) -> Diffusion:
    """Constant coefficient sigma(x) = c; the solution is a + c*B(t)."""
    c = float(c)

    def sigma(x):
        return np.full_like(np.asarray(x, dtype=float), c)

    def sigma_prime(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def exact_terminal(a, b, t):
        return a + c * b

    return Diffusion(
        sigma=sigma,
        sigma_prime=sigma_prime,
        lipschitz_sigma=0.0,
        lipschitz_sigma_sigma_prime=0.0,
        growth_constant=c * c,
        exact_terminal=exact_terminal,
    )


def make_pythagoras() -> Diffusion:
    """sigma(x) = sqrt(1 + x^2); smooth, globally Lipschitz, no closed form.

    sigma' = x/sqrt(1+x^2) so L1 = 1, sigma*sigma' = x so L2 = 1, and
    sigma^2 = 1 + x^2 makes M1 = 1 tight everywhere.
    """

    def sigma(x):
        return np.hypot(1.0, x)

    def sigma_prime(x):
        return x / np.hypot(1.0, x)

    return Diffusion(
        sigma=sigma,
        sigma_prime=sigma_prime,
        lipschitz_sigma=1.0,
        lipschitz_sigma_sigma_prime=1.0,
        growth_constant=1.0,
    )


def make_sine() -> Diffusion:
    """sigma(x) = sin(x); bounded with zeros, so sigma' changes sign."""
    return Diffusion(
        sigma=np.sin,
        sigma_prime=np.cos,
        lipschitz_sigma=1.0,
        # sigma*sigma' = sin(2x)/2, derivative cos(2x) bounded by 1
        lipschitz_sigma_sigma_prime=1.0,
        growth_constant=1.0,
    )


def _build_linear(params: dict) -> ModelCatalogEntry:
    alpha = float(params.pop("alpha", 1.0))
    return ModelCatalogEntry(
        name="linear",
        diffusion=make_linear(alpha),
        default_initial=1.0,
        notes=f"sigma(x) = {alpha}*x, exact solution available",
    )


def _build_constant(params: dict) -> ModelCatalogEntry:
    c = float(params.pop("c", 1.0))
    return ModelCatalogEntry(
        name="constant",
        diffusion=make_constant(c),
        default_initial=1.0,
        notes=f"sigma(x) = {c}, exact solution available",
    )


def _build_pythagoras(params: dict) -> ModelCatalogEntry:
    return ModelCatalogEntry(
        name="pythagoras",
        diffusion=make_pythagoras(),
        default_initial=1.0,
        notes="sigma(x) = sqrt(1+x^2)",
    )


def _build_sine(params: dict) -> ModelCatalogEntry:
    return ModelCatalogEntry(
        name="sine",
        diffusion=make_sine(),
        default_initial=1.0,
        notes="sigma(x) = sin(x)",
    )


_BUILDERS = {
    "linear": _build_linear,
    "constant": _build_constant,
    "pythagoras": _build_pythagoras,
    "sine": _build_sine,
}


def catalog_names() -> list[str]:
    return sorted(_BUILDERS)


def catalog() -> list[ModelCatalogEntry]:
    """All built-in models with their default parameters."""
    return [resolve_model(name) for name in catalog_names()]


def resolve_model(spec: str) -> ModelCatalogEntry:
    """Resolve a model spec string ``name[:key=value[,key=value]*]``.

    Examples: ``"pythagoras"``, ``"linear:alpha=2.0"``, ``"constant:c=0"``.
    Raises ValueError for unknown names, unknown keys or malformed values.
    """
    name, _, tail = spec.partition(":")
    name = name.strip()
    if name not in _BUILDERS:
        raise ValueError(
            f"unknown model {name!r}; available: {', '.join(catalog_names())}"
        )
    params: dict[str, str] = {}
    if tail:
        for item in tail.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise ValueError(f"malformed model parameter {item!r} in {spec!r}")
            params[key.strip()] = value.strip()
    try:
        entry = _BUILDERS[name](params)
    except ValueError as exc:
        raise ValueError(f"invalid parameters for model {name!r}: {exc}") from exc
    if params:
        raise ValueError(
            f"unknown parameter(s) for model {name!r}: {', '.join(sorted(params))}"
        )
    return entry


def validate_model(d: Diffusion, probe_points) -> list[ModelCheckFailure]:
    """Check a diffusion against its declared properties at probe points.

    Report-only: returns a (possibly empty) list of failures and never
    raises.  Checks, where applicable:

    * ``sigma_prime`` matches a central finite difference of ``sigma``
      (relative tolerance 1e-6 at step 1e-6, absolute guard 1e-9);
    * ``sigma(x)^2 <= growth_constant*(1 + x^2)`` at every probe;
    * ``|sigma(x)-sigma(y)| <= lipschitz_sigma*|x-y|`` on every probe pair.
    """
    probes = [float(p) for p in probe_points]
    if not probes:
        raise ValueError("probe_points must be nonempty")
    failures: list[ModelCheckFailure] = []

    for x in probes:
        fd = (float(d.sigma(x + _FD_STEP)) - float(d.sigma(x - _FD_STEP))) / (2.0 * _FD_STEP)
        sp = float(d.sigma_prime(x))
        allowed = _FD_RTOL * abs(sp) + _FD_ATOL
        if abs(fd - sp) > allowed:
            failures.append(
                ModelCheckFailure("derivative", f"x={x:g}", abs(fd - sp), allowed)
            )

    if d.growth_constant is not None:
        m1 = float(d.growth_constant)
        for x in probes:
            lhs = float(d.sigma(x)) ** 2
            rhs = m1 * (1.0 + x * x)
            if lhs > rhs * (1.0 + _CONSTANT_SLACK):
                failures.append(ModelCheckFailure("growth", f"x={x:g}", lhs, rhs))

    if d.lipschitz_sigma is not None:
        l1 = float(d.lipschitz_sigma)
        for i, x in enumerate(probes):
            for y in probes[i + 1 :]:
                lhs = abs(float(d.sigma(x)) - float(d.sigma(y)))
                rhs = l1 * abs(x - y)
                if lhs > rhs * (1.0 + _CONSTANT_SLACK) + _FD_ATOL:
                    failures.append(
                        ModelCheckFailure("lipschitz", f"x={x:g}, y={y:g}", lhs, rhs)
                    )

    return failures
