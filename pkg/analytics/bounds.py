import logging
import math
from typing import Iterable, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln

from analytics.quadrature import adaptive_simpson
from core.errors import InvalidArgumentError
from core.geometry import ball_volume, log_unit_ball_volume, sphere_surface
from core.schema import AvgCaseParams, BoundParams, BoundsReport

logger = logging.getLogger(__name__)

QKind = Literal["sphere-lift", "ball-projection"]

# relative band around r_u treated as the boundary of the zero region
ZERO_BAND = 1e-10


def _log_d_factor(n: int, m: int) -> float:
    return float(gammaln(0.5 * (n - m) + 1.0) + gammaln(0.5 * m + 1.0) - gammaln(0.5 * n + 1.0))


def d_factor(n: int, m: int) -> float:
    """
    D(n, m) = Gamma((n-m)/2 + 1) Gamma(m/2 + 1) / Gamma(n/2 + 1), the ratio of the unit
    n-ball volume to the product of unit (n-m)- and m-ball volumes, inverted.
    """
    if n < 1 or m < 1:
        raise InvalidArgumentError(f"Dimensions must be positive, got n={n}, m={m}")
    if m > n:
        raise InvalidArgumentError(f"m={m} must not exceed n={n}")
    return math.exp(_log_d_factor(n, m))


def precision_bound_worst(p: BoundParams) -> float:
    """
    Worst-case precision upper bound at the waist fiber:
    D(n,m) (r_u/R)^(n-m) r_u^m / (r_v/L)^m, with the small-ball correction taken as eps^m.
    """
    log_bound = (_log_d_factor(p.n, p.m)
                 + (p.n - p.m) * math.log(p.r_u / p.R)
                 + p.m * math.log(p.r_u * p.L / p.r_v))
    return math.exp(log_bound)


def precision_bound_pnorm(p: BoundParams, exponents: Optional[Sequence[float]] = None) -> float:
    """
    Precision bound on generalized (p-norm) balls: (r_u/R)^(n-m) (r_u/(r_v/L))^m.
    The generalized-ball volumes cancel, so the exponent vector only gets validated.
    """
    if exponents is not None:
        exps = np.asarray(list(exponents), dtype=float)
        if exps.size != p.n or np.any(exps < 1.0):
            raise InvalidArgumentError(f"Need {p.n} exponents, each >= 1, got {exps.tolist()}")
    return math.exp((p.n - p.m) * math.log(p.r_u / p.R) + p.m * math.log(p.r_u * p.L / p.r_v))


def q_linear(p: AvgCaseParams, kind: QKind = "ball-projection", tol: float = None) -> float:
    """
    Probability that a uniform point of B^n_R has a fiber at least as large as the linear
    fiber over radius integration_radius.

    ball-projection (q2): fibers of a coordinate projection are (n-m)-balls of radius
    sqrt(R^2 - |t|^2); the m-dimensional integral over |t| < rho is reduced to a radial one
    and normalized by Vol(B^n_R).
    sphere-lift (q1): fibers of the projection of S^{n+1}_R are (n-m+1)-spheres of the same
    radius, weighted by 1/(2 pi R). Experimental.

    Both integrals are computed in units of R, which cancels.
    """
    n, m, R = p.base.n, p.base.m, p.base.R
    upper = p.integration_radius / R
    if upper <= 0.0:
        return 0.0
    k = n - m
    if kind == "ball-projection":
        def fiber(rho: float) -> float:
            return ball_volume(k, rho)
    elif kind == "sphere-lift":
        def fiber(rho: float) -> float:
            return sphere_surface(k + 2, rho) / (2.0 * math.pi) if rho > 0.0 else 0.0
    else:
        raise InvalidArgumentError(f"Unknown q kind {kind!r}")

    # m * Vol(B^m) u^(m-1) is the shell of fiber centers at radius u
    shell = math.exp(math.log(m) + log_unit_ball_volume(m) - log_unit_ball_volume(n))

    def integrand(u: float) -> float:
        return shell * u ** (m - 1) * fiber(math.sqrt(max(1.0 - u * u, 0.0)))

    value = adaptive_simpson(integrand, 0.0, min(upper, 1.0), tol=tol)
    return min(max(value, 0.0), 1.0)


def precision_bound_avg(p: AvgCaseParams) -> Tuple[float, float]:
    """
    Average-case precision bound and the probability q2 with which it holds:
    D(n,m) (r_u / sqrt(r_u^2 + delta^2))^(n-m) r_u^m / (r_v/L)^m.
    """
    b = p.base
    log_bound = (_log_d_factor(b.n, b.m)
                 + (b.n - b.m) * (math.log(b.r_u) - 0.5 * math.log(b.r_u ** 2 + p.delta ** 2))
                 + b.m * math.log(b.r_u * b.L / b.r_v))
    return math.exp(log_bound), q_linear(p, "ball-projection")


def w2_lower_bound_radius(p: BoundParams) -> float:
    """Radius of the centered ball whose volume lower-bounds Vol(f^-1(V))."""
    log_r = (-_log_d_factor(p.n, p.m) + (p.n - p.m) * math.log(p.R) + p.m * math.log(p.r_v / p.L)) / p.n
    return math.exp(log_r)


def w2_lower_bound(p: BoundParams) -> float:
    """
    Lower bound on W2^2(P_U, P_{f^-1(V)}): n/(n+2) (r - r_u)^2 when r >= r_u, else 0
    (the bound does not apply there, and 0 keeps grid searches total).
    """
    r = w2_lower_bound_radius(p)
    # round-off puts r a few ulps off r_u at r_v = optimal_rv
    if r <= p.r_u * (1.0 + ZERO_BAND):
        return 0.0
    return p.n / (p.n + 2.0) * (r - p.r_u) ** 2


def optimal_rv(n: int, m: int, R: float, r_u: float, L: float = 1.0) -> float:
    """
    Largest retrieval radius whose Wasserstein lower bound is still zero:
    r_v* = L (D(n,m) r_u^n / R^(n-m))^(1/m).
    """
    if not (0 < m < n):
        raise InvalidArgumentError(f"Need 0 < m < n, got n={n}, m={m}")
    if not (0 < r_u < R) or L <= 0:
        raise InvalidArgumentError(f"Need 0 < r_u < R and L > 0, got r_u={r_u}, R={R}, L={L}")
    return L * math.exp((_log_d_factor(n, m) + n * math.log(r_u) - (n - m) * math.log(R)) / m)


def optimal_rv_grid(n: int, m: int, R: float, r_u: float, rv_grid: Iterable[float], L: float = 1.0) -> float:
    """
    Grid-search variant: argmin of w2_lower_bound over rv_grid, ties resolved toward the larger r_v.
    """
    grid = np.asarray(list(rv_grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise InvalidArgumentError("rv_grid must be non-empty and positive")
    values = np.array([w2_lower_bound(BoundParams(n=n, m=m, R=R, r_u=r_u, r_v=float(rv), L=L)) for rv in grid])
    best = values.min()
    return float(grid[values == best].max())


def concentric_ball_w2(n: int, r1: float, r2: float) -> float:
    """
    Exact W2 between uniform distributions on concentric balls r1 <= r2; the optimal map
    is the scaling x -> (r1/r2) x, giving sqrt(n/(n+2)) (r2 - r1).
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    if r1 < 0 or r2 < 0:
        raise InvalidArgumentError(f"Radii must be nonnegative, got r1={r1}, r2={r2}")
    if r1 > r2:
        raise InvalidArgumentError(f"r1={r1} exceeds r2={r2}; use ball_to_ball_w2 for either order")
    return math.sqrt(n / (n + 2.0)) * (r2 - r1)


def ball_to_ball_w2(n: int, r_a: float, r_b: float) -> float:
    """W2 between uniform concentric balls given in either order."""
    return concentric_ball_w2(n, min(r_a, r_b), max(r_a, r_b))


def default_delta(R: float, r_u: float) -> float:
    # delta = r_u when admissible, otherwise half the admissible range
    limit = math.sqrt(R ** 2 - r_u ** 2)
    return r_u if r_u < limit else 0.5 * limit


def bounds_report(p: BoundParams, delta: Optional[float] = None) -> BoundsReport:
    delta = default_delta(p.R, p.r_u) if delta is None else delta
    avg = AvgCaseParams(base=p, delta=delta)
    precision_avg, q2 = precision_bound_avg(avg)
    q1 = q_linear(avg, "sphere-lift")
    if p.m > 1:
        logger.warning("q1 is defined for the m = 1 case only; reported value is experimental")
    return BoundsReport(
        d_factor=d_factor(p.n, p.m),
        precision_worst=precision_bound_worst(p),
        precision_pnorm=precision_bound_pnorm(p),
        precision_avg=precision_avg,
        q1=q1,
        q2=q2,
        w2_lower=w2_lower_bound(p),
        rv_star=optimal_rv(p.n, p.m, p.R, p.r_u, p.L),
        w2_radius=w2_lower_bound_radius(p),
        delta=delta,
    )


def bound_curve(m: int, R: float, r_u: float, r_v: float, n_values: Iterable[int], L: float = 1.0) -> pd.DataFrame:
    """
    Worst-case precision bound and Wasserstein lower bound as the intrinsic dimension grows,
    next to the (R - r_u)^2 scale the Wasserstein bound approaches.
    """
    rows = []
    for n in n_values:
        p = BoundParams(n=int(n), m=m, R=R, r_u=r_u, r_v=r_v, L=L)
        rows.append({
            "n": int(n),
            "d_factor": d_factor(p.n, p.m),
            "precision_worst": precision_bound_worst(p),
            "w2_radius": w2_lower_bound_radius(p),
            "w2_lower": w2_lower_bound(p),
            "w2_asymptote": (R - r_u) ** 2,
        })
    if not rows:
        raise InvalidArgumentError("n_values must be non-empty")
    return pd.DataFrame(rows)
