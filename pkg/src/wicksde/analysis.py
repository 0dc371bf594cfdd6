"""Monte Carlo verification layer: strong-error estimation, convergence-order
regression, second-moment bound checks and Wick/Milstein gap-rate studies.

Coupling discipline: within one path, every scheme and every resolution
consumes coarsenings of the SAME fine increment array, so differences measure
discretization error rather than noise.  Reference terminal values use the
model's closed-form solution when available, otherwise a Milstein run on the
fine grid (at least 8x finer than any tested resolution).

Paths are independent work units keyed by path_index.  All per-path results
are written into buffers indexed by path_index and reduced in a fixed order,
and the internal batch size is a constant, so reports are bit-identical for
any worker count (set via the WICKSDE_WORKERS environment variable).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .brownian import GridSpec, coarsen_increments, generate_increments
from .models import Diffusion
from .schemes import MILSTEIN, WICK, SchemeKind, simulate_terminal, simulate_values

__all__ = [
    "PathFailureError",
    "StrongErrorResult",
    "OrderFit",
    "ResolutionPoint",
    "ConvergenceReport",
    "BoundViolation",
    "BoundReport",
    "GapRateResult",
    "ExactnessResult",
    "strong_error",
    "fit_order",
    "convergence_study",
    "second_moment_bound",
    "check_second_moment",
    "theoretical_gap_bound",
    "check_gap_rate",
    "exactness_check",
]

# fixed batch size: chunk boundaries never depend on the worker count, so the
# per-path buffers (and hence every reduction) are reproducible bit-for-bit
_PATH_BATCH = 4096
# mean errors below this are treated as an exact scheme (no order to fit)
EXACT_ERROR_FLOOR = 1e-10
# abort the run when more than this fraction of paths fails
MAX_FAILURE_FRACTION = 1e-3

WORKERS_ENV_VAR = "WICKSDE_WORKERS"


class PathFailureError(RuntimeError):
    """Too many paths aborted (non-finite states / overflow)."""


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "").strip()
    if raw:
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from None
        if workers < 1:
            raise ValueError(f"{WORKERS_ENV_VAR} must be >= 1, got {workers}")
        return workers
    return os.cpu_count() or 1


def _for_each_batch(n_paths: int, fill) -> None:
    """Run ``fill(start, stop)`` over fixed-size path batches, possibly in
    parallel.  ``fill`` must only write to disjoint buffer slices."""
    spans = [(s, min(s + _PATH_BATCH, n_paths)) for s in range(0, n_paths, _PATH_BATCH)]
    workers = _worker_count()
    if workers == 1 or len(spans) == 1:
        for start, stop in spans:
            fill(start, stop)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # list() propagates worker exceptions
        list(pool.map(lambda span: fill(*span), spans))


@dataclass(frozen=True)
class StrongErrorResult:
    mean_abs_error: float
    std_error: float
    rms_error: float
    n_paths: int  # paths that contributed (failures excluded)
    n_failed: int


class OrderFit(NamedTuple):
    order: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class ResolutionPoint:
    n: int
    mean_abs_error: float
    std_error: float
    rms_error: float
    n_failed: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Strong errors per resolution plus the fitted convergence order.

    ``exact`` is set (and the fit fields are None) when the errors sit at
    the numerical noise floor, e.g. the Wick scheme on a linear model.
    """

    model_name: str
    scheme: SchemeKind
    horizon: float
    seed: int
    n_paths: int
    points: list[ResolutionPoint]
    fitted_order: float | None
    fit_intercept: float | None
    fit_r2: float | None
    exact: bool

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "scheme": str(self.scheme),
            "horizon": self.horizon,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "points": [
                {"n": p.n, "mean_abs_error": p.mean_abs_error, "std_error": p.std_error}
                for p in self.points
            ],
            "fitted_order": self.fitted_order,
            "fit_intercept": self.fit_intercept,
            "fit_r2": self.fit_r2,
            "exact": self.exact,
            "rms_points": [{"n": p.n, "rms_error": p.rms_error} for p in self.points],
        }


@dataclass(frozen=True)
class BoundViolation:
    location: int
    empirical: float
    bound: float
    slack: float  # empirical - 3*std_error - bound (positive = exceeds)


@dataclass(frozen=True)
class BoundReport:
    """Empirical values with standard errors against theoretical bounds.

    A location is flagged only when ``empirical - 3*std_error > bound``: the
    bounds are population statements, so a genuine violation indicates a bug
    rather than noise.
    """

    quantity: str  # "second_moment" | "wick_milstein_gap"
    model_name: str
    scheme_label: str
    horizon: float
    seed: int
    n_paths: int
    loc_key: str  # "k" (per step) or "n" (per resolution)
    locations: list[int]
    empirical: list[float]
    std_errors: list[float]
    bounds: list[float] | None
    violations: list[BoundViolation]
    n_failed: int

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        bounds = self.bounds if self.bounds is not None else [None] * len(self.locations)
        return {
            "quantity": self.quantity,
            "model": self.model_name,
            "scheme": self.scheme_label,
            "horizon": self.horizon,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "points": [
                {self.loc_key: loc, "empirical": emp, "std_error": se, "bound": b}
                for loc, emp, se, b in zip(
                    self.locations, self.empirical, self.std_errors, bounds
                )
            ],
            "violations": [
                {
                    "location": v.location,
                    "empirical": v.empirical,
                    "bound": v.bound,
                    "slack": v.slack,
                }
                for v in self.violations
            ],
            "passed": self.passed,
        }


@dataclass(frozen=True)
class GapRateResult:
    """Wick/Milstein terminal gap per resolution with the fitted ln-ln slope.

    ``exact_agreement`` is set when the schemes coincide pathwise (constant
    sigma); the fit is skipped in that case.
    """

    report: BoundReport
    fitted_slope: float | None
    fit_r2: float | None
    exact_agreement: bool

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out["fitted_slope"] = self.fitted_slope
        out["fit_r2"] = self.fit_r2
        out["exact_agreement"] = self.exact_agreement
        return out


@dataclass(frozen=True)
class ExactnessResult:
    """Largest node-wise relative deviation of Wick paths from the closed form."""

    model_name: str
    n: int
    n_paths: int
    seed: int
    horizon: float
    max_relative_deviation: float

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "scheme": "wick",
            "horizon": self.horizon,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "n": self.n,
            "max_relative_deviation": self.max_relative_deviation,
        }


def _summarize_errors(err: np.ndarray) -> StrongErrorResult:
    finite = np.isfinite(err)
    n_failed = int(err.size - finite.sum())
    if n_failed > MAX_FAILURE_FRACTION * err.size:
        raise PathFailureError(
            f"{n_failed} of {err.size} paths aborted "
            f"(threshold {MAX_FAILURE_FRACTION:.1%})"
        )
    ok = err[finite]
    mean = float(ok.mean())
    se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
    rms = float(np.sqrt(np.mean(ok * ok)))
    return StrongErrorResult(mean, se, rms, int(ok.size), n_failed)


def _reference_terminal(d: Diffusion, a: float, fine: np.ndarray, fine_spec: GridSpec):
    if d.exact_terminal is not None:
        # tree-summed terminal Brownian value: identical to the terminal of
        # any power-of-two coarsening of the same increments
        b_term = coarsen_increments(fine, fine_spec.n_steps)[..., 0]
        return d.exact_terminal(a, b_term, fine_spec.horizon)
    return simulate_terminal(d, a, fine, fine_spec.dt, MILSTEIN)


def _check_resolutions(resolutions, n_ref: int, minimum: int = 1) -> list[int]:
    res = [int(n) for n in resolutions]
    if len(res) < minimum:
        raise ValueError(f"need at least {minimum} resolutions, got {len(res)}")
    if any(n < 1 for n in res):
        raise ValueError(f"resolutions must be positive, got {res}")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ValueError(f"resolutions must be strictly increasing, got {res}")
    if n_ref is not None:
        for n in res:
            if n_ref % n != 0:
                raise ValueError(f"resolution {n} does not divide n_ref {n_ref}")
    return res


def strong_error(
    d: Diffusion,
    a: float,
    scheme: SchemeKind,
    n_coarse: int,
    n_ref: int,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
) -> StrongErrorResult:
    """Terminal strong error E|reference - approximation| at one resolution.

    Per path: generate the fine grid at ``n_ref``, take the reference
    terminal value there, coarsen the same increments to ``n_coarse``, run
    the scheme under test, and accumulate the absolute terminal difference.
    Without a closed-form solution the fine/coarse ratio must be >= 8 so the
    Milstein reference error stays an order of magnitude below the measured
    one.
    """
    n_coarse, n_ref, n_paths = int(n_coarse), int(n_ref), int(n_paths)
    if n_coarse < 1 or n_ref < 1:
        raise ValueError("n_coarse and n_ref must be positive")
    if n_ref % n_coarse != 0:
        raise ValueError(f"n_coarse {n_coarse} does not divide n_ref {n_ref}")
    if d.exact_terminal is None and n_ref // n_coarse < 8:
        raise ValueError(
            f"without an exact solution n_ref/n_coarse must be >= 8, got {n_ref // n_coarse}"
        )
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")

    fine_spec = GridSpec(n_ref, horizon)
    factor = n_ref // n_coarse
    dt_coarse = horizon / n_coarse
    err = np.empty(n_paths)

    def fill(start, stop):
        fine = generate_increments(fine_spec, seed, start, stop - start)
        ref = _reference_terminal(d, a, fine, fine_spec)
        approx = simulate_terminal(
            d, a, coarsen_increments(fine, factor), dt_coarse, scheme
        )
        err[start:stop] = np.abs(ref - approx)

    _for_each_batch(n_paths, fill)
    return _summarize_errors(err)


def fit_order(points) -> OrderFit:
    """Least squares of ln(error) on ln(N); order is minus the slope.

    Requires at least 3 points with strictly positive errors; machine-zero
    errors (exact schemes) must be filtered by the caller.
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit an order, got {len(pts)}")
    if any(e <= 0.0 for _, e in pts):
        raise ValueError("all errors must be positive to fit; filter exact cases first")
    ln_n = np.log([n for n, _ in pts])
    ln_e = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(ln_n, ln_e, 1)
    predicted = slope * ln_n + intercept
    ss_res = float(np.sum((ln_e - predicted) ** 2))
    ss_tot = float(np.sum((ln_e - ln_e.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return OrderFit(float(-slope), float(intercept), float(r2))


def convergence_study(
    d: Diffusion,
    a: float,
    scheme: SchemeKind,
    resolutions,
    n_ref: int,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
    model_name: str = "custom",
) -> ConvergenceReport:
    """Strong errors over several resolutions plus the fitted order.

    All resolutions reuse coarsenings of the same fine grids, so each point
    is bit-identical to a standalone :func:`strong_error` call with the same
    arguments.
    """
    n_ref, n_paths = int(n_ref), int(n_paths)
    res = _check_resolutions(resolutions, n_ref, minimum=1)
    if d.exact_terminal is None and n_ref // max(res) < 8:
        raise ValueError(
            f"without an exact solution n_ref must be >= 8*max(resolutions), "
            f"got n_ref={n_ref}, max resolution {max(res)}"
        )
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")

    fine_spec = GridSpec(n_ref, horizon)
    err = np.empty((len(res), n_paths))

    def fill(start, stop):
        fine = generate_increments(fine_spec, seed, start, stop - start)
        ref = _reference_terminal(d, a, fine, fine_spec)
        for i, n in enumerate(res):
            approx = simulate_terminal(
                d, a, coarsen_increments(fine, n_ref // n), horizon / n, scheme
            )
            err[i, start:stop] = np.abs(ref - approx)

    _for_each_batch(n_paths, fill)

    points = []
    for i, n in enumerate(res):
        s = _summarize_errors(err[i])
        points.append(
            ResolutionPoint(n, s.mean_abs_error, s.std_error, s.rms_error, s.n_failed)
        )

    fit_pts = [(p.n, p.mean_abs_error) for p in points if p.mean_abs_error > EXACT_ERROR_FLOOR]
    if len(fit_pts) >= 3:
        fit = fit_order(fit_pts)
        fitted_order, intercept, r2, exact = fit.order, fit.intercept, fit.r2, False
    else:
        fitted_order = intercept = r2 = None
        exact = True

    return ConvergenceReport(
        model_name=model_name,
        scheme=scheme,
        horizon=horizon,
        seed=int(seed),
        n_paths=n_paths,
        points=points,
        fitted_order=fitted_order,
        fit_intercept=intercept,
        fit_r2=r2,
        exact=exact,
    )


def second_moment_bound(
    a: float, m1: float, l1: float, n: int, k: int, horizon: float = 1.0
) -> float:
    """A-priori bound (1 + M1*exp(L1^2*dt)*dt)^k * (a^2 + 1) - 1 on E[x_k^2].

    With horizon 1 (dt = 1/n) this is the unit-horizon bound verbatim; for
    other horizons dt replaces 1/n, which is the same derivation.
    """
    n, k = int(n), int(k)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if m1 < 0.0 or l1 < 0.0:
        raise ValueError("constants must be nonnegative")
    dt = horizon / n
    return (1.0 + m1 * math.exp(l1 * l1 * dt) * dt) ** k * (a * a + 1.0) - 1.0


def check_second_moment(
    d: Diffusion,
    a: float,
    n: int,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
    model_name: str = "custom",
) -> BoundReport:
    """Empirical E[x_k^2] of Wick-scheme paths at every step vs the bound.

    Requires the model to declare ``growth_constant`` (M1) and
    ``lipschitz_sigma`` (L1).
    """
    if d.growth_constant is None or d.lipschitz_sigma is None:
        raise ValueError(
            "second-moment check needs declared growth_constant and lipschitz_sigma"
        )
    n, n_paths = int(n), int(n_paths)
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")
    spec = GridSpec(n, horizon)
    sq = np.empty((n_paths, n + 1))

    def fill(start, stop):
        inc = generate_increments(spec, seed, start, stop - start)
        vals = simulate_values(d, a, inc, spec.dt, WICK)
        sq[start:stop] = vals * vals

    _for_each_batch(n_paths, fill)

    finite = np.isfinite(sq).all(axis=1)
    n_failed = int(n_paths - finite.sum())
    if n_failed > MAX_FAILURE_FRACTION * n_paths:
        raise PathFailureError(f"{n_failed} of {n_paths} paths aborted")
    ok = sq[finite]
    empirical = ok.mean(axis=0)
    std_errors = ok.std(axis=0, ddof=1) / math.sqrt(ok.shape[0])
    bounds = [
        second_moment_bound(a, d.growth_constant, d.lipschitz_sigma, n, k, horizon)
        for k in range(n + 1)
    ]
    violations = [
        BoundViolation(k, float(empirical[k]), bounds[k],
                       float(empirical[k] - 3.0 * std_errors[k] - bounds[k]))
        for k in range(n + 1)
        if empirical[k] - 3.0 * std_errors[k] > bounds[k]
    ]
    return BoundReport(
        quantity="second_moment",
        model_name=model_name,
        scheme_label="wick",
        horizon=horizon,
        seed=int(seed),
        n_paths=int(ok.shape[0]),
        loc_key="k",
        locations=list(range(n + 1)),
        empirical=[float(v) for v in empirical],
        std_errors=[float(v) for v in std_errors],
        bounds=bounds,
        violations=violations,
        n_failed=n_failed,
    )


def theoretical_gap_bound(
    l1: float, l2: float, m1: float, a: float, n: int, horizon: float = 1.0
) -> float:
    """A-priori bound on the terminal mean-square Wick/Milstein gap.

    Evaluates lambda_n * ((1 + L1^2*dt + L2^2*dt^2/2)^n - 1) /
    (L1^2*dt + L2^2*dt^2/2) with

        lambda_n = M1 * (1 + M1*exp(L1^2*dt)*dt)^n * (a^2+1)
                   * (exp(L1^2*dt) - 1 - L1^2*dt) * dt.

    Degenerate constants give 0 (the schemes then coincide).
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if l1 < 0.0 or l2 < 0.0 or m1 < 0.0:
        raise ValueError("constants must be nonnegative")
    dt = horizon / n
    x = l1 * l1 * dt
    excess = math.expm1(x) - x  # exp(x) - 1 - x, >= 0
    lam = m1 * (1.0 + m1 * math.exp(x) * dt) ** n * (a * a + 1.0) * excess * dt
    denom = x + 0.5 * (l2 * l2) * (dt * dt)
    if denom == 0.0:
        return 0.0
    return lam * ((1.0 + denom) ** n - 1.0) / denom


def check_gap_rate(
    d: Diffusion,
    a: float,
    resolutions,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
    model_name: str = "custom",
) -> GapRateResult:
    """E[(x_N - y_N)^2] between Wick and Milstein on identical grids.

    Fits ln(gap) against ln(N) (expected slope about -2) and, when the model
    declares L1, L2 and M1, compares every gap to
    :func:`theoretical_gap_bound`.
    """
    n_paths = int(n_paths)
    res = _check_resolutions(resolutions, None, minimum=3)
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")
    gsq = np.empty((len(res), n_paths))

    for i, n in enumerate(res):
        spec = GridSpec(n, horizon)

        def fill(start, stop, spec=spec, i=i):
            inc = generate_increments(spec, seed, start, stop - start)
            x_wick = simulate_terminal(d, a, inc, spec.dt, WICK)
            y_mil = simulate_terminal(d, a, inc, spec.dt, MILSTEIN)
            gsq[i, start:stop] = (x_wick - y_mil) ** 2

        _for_each_batch(n_paths, fill)

    finite = np.isfinite(gsq).all(axis=0)
    n_failed = int(n_paths - finite.sum())
    if n_failed > MAX_FAILURE_FRACTION * n_paths:
        raise PathFailureError(f"{n_failed} of {n_paths} paths aborted")
    ok = gsq[:, finite]
    gaps = ok.mean(axis=1)
    std_errors = ok.std(axis=1, ddof=1) / math.sqrt(ok.shape[1])

    have_constants = (
        d.lipschitz_sigma is not None
        and d.lipschitz_sigma_sigma_prime is not None
        and d.growth_constant is not None
    )
    bounds = None
    violations: list[BoundViolation] = []
    if have_constants:
        bounds = [
            theoretical_gap_bound(
                d.lipschitz_sigma, d.lipschitz_sigma_sigma_prime, d.growth_constant,
                a, n, horizon,
            )
            for n in res
        ]
        violations = [
            BoundViolation(res[i], float(gaps[i]), bounds[i],
                           float(gaps[i] - 3.0 * std_errors[i] - bounds[i]))
            for i in range(len(res))
            if gaps[i] - 3.0 * std_errors[i] > bounds[i]
        ]

    exact_agreement = bool(np.all(ok == 0.0))
    fitted_slope = fit_r2 = None
    if not exact_agreement:
        fit_pts = [(res[i], float(gaps[i])) for i in range(len(res)) if gaps[i] > 0.0]
        if len(fit_pts) >= 3:
            fit = fit_order(fit_pts)
            fitted_slope, fit_r2 = -fit.order, fit.r2

    report = BoundReport(
        quantity="wick_milstein_gap",
        model_name=model_name,
        scheme_label="wick,milstein",
        horizon=horizon,
        seed=int(seed),
        n_paths=int(ok.shape[1]),
        loc_key="n",
        locations=res,
        empirical=[float(v) for v in gaps],
        std_errors=[float(v) for v in std_errors],
        bounds=bounds,
        violations=violations,
        n_failed=n_failed,
    )
    return GapRateResult(
        report=report,
        fitted_slope=fitted_slope,
        fit_r2=fit_r2,
        exact_agreement=exact_agreement,
    )


def exactness_check(
    d: Diffusion,
    a: float,
    n: int,
    n_paths: int,
    seed: int,
    horizon: float = 1.0,
    model_name: str = "custom",
) -> ExactnessResult:
    """Max node-wise deviation of Wick paths from the closed-form solution.

    Deviation is |x_k - exact_k| / (1 + |exact_k|), maximized over all nodes
    and paths.  Requires ``exact_terminal``.
    """
    if d.exact_terminal is None:
        raise ValueError("exactness check needs a model with a closed-form solution")
    n, n_paths = int(n), int(n_paths)
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    spec = GridSpec(n, horizon)
    times = np.arange(1, n + 1) * spec.dt
    worst = np.empty(n_paths)

    def fill(start, stop):
        inc = generate_increments(spec, seed, start, stop - start)
        vals = simulate_values(d, a, inc, spec.dt, WICK)
        exact = np.empty_like(vals)
        exact[:, 0] = a
        exact[:, 1:] = d.exact_terminal(a, np.cumsum(inc, axis=1), times[None, :])
        dev = np.abs(vals - exact) / (1.0 + np.abs(exact))
        worst[start:stop] = dev.max(axis=1)

    _for_each_batch(n_paths, fill)
    max_dev = float(worst.max())
    if not math.isfinite(max_dev):
        raise PathFailureError("a path became non-finite during the exactness check")
    return ExactnessResult(
        model_name=model_name,
        n=n,
        n_paths=n_paths,
        seed=int(seed),
        horizon=horizon,
        max_relative_deviation=max_dev,
    )
