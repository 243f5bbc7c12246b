import logging
import math
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln

from core.errors import InvalidArgumentError
from core.schema import PointCloud

logger = logging.getLogger(__name__)

LOG_PI = math.log(math.pi)


def _check_dimension(n: int, name: str = "n") -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def log_unit_ball_volume(n: int) -> float:
    """log of pi^(n/2) / Gamma(n/2 + 1)."""
    n = _check_dimension(n)
    return 0.5 * n * LOG_PI - float(gammaln(0.5 * n + 1.0))


def unit_ball_volume(n: int) -> float:
    """
    Volume of the unit Euclidean n-ball, pi^(n/2) / Gamma(n/2 + 1), evaluated in log space.
    """
    return math.exp(log_unit_ball_volume(n))


def ball_volume(n: int, r: float) -> float:
    if r < 0:
        raise InvalidArgumentError(f"Radius must be nonnegative, got {r}")
    if r == 0:
        return 0.0
    return math.exp(log_unit_ball_volume(n) + n * math.log(r))


def sphere_surface(n: int, r: float) -> float:
    """
    (n-1)-dimensional measure of the sphere S^{n-1}_r bounding the n-ball of radius r:
    n * unit_ball_volume(n) * r^(n-1). For n = 1 this is the two endpoints.
    """
    n = _check_dimension(n)
    if not r > 0:
        raise InvalidArgumentError(f"Sphere radius must be positive, got {r}")
    return math.exp(math.log(n) + log_unit_ball_volume(n) + (n - 1) * math.log(r))


def generalized_ball_volume(p: Sequence[float]) -> float:
    """
    Volume of {x : sum |x_i|^p_i <= 1}: 2^n prod Gamma(1 + 1/p_i) / Gamma(1 + sum 1/p_i).
    """
    exponents = np.asarray(list(p), dtype=float)
    if exponents.size == 0:
        raise InvalidArgumentError("Exponent vector must be non-empty")
    if np.any(~np.isfinite(exponents)) or np.any(exponents < 1.0):
        raise InvalidArgumentError(f"Every exponent must be >= 1, got {exponents.tolist()}")
    inv = 1.0 / exponents
    log_vol = exponents.size * math.log(2.0) + float(np.sum(gammaln(1.0 + inv))) - float(gammaln(1.0 + inv.sum()))
    return math.exp(log_vol)


def sample_uniform_ball(n: int, R: float, N: int, seed: int) -> PointCloud:
    """
    N i.i.d. uniform points in the n-ball of radius R.

    Fixed generator: directions are normalized standard Gaussians, radii are R * U^(1/n).
    Both draws come from one numpy PCG64 stream seeded with `seed`, directions first,
    so a given (n, R, N, seed) always yields the same cloud.
    """
    n = _check_dimension(n)
    N = _check_dimension(N, "N")
    if not R > 0:
        raise InvalidArgumentError(f"Ball radius must be positive, got {R}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((N, n))
    norms = np.linalg.norm(directions, axis=1)
    # a zero Gaussian vector has probability zero; redraw deterministically if it ever happens
    while np.any(norms == 0):
        bad = norms == 0
        directions[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(directions, axis=1)
    radii = R * rng.random(N) ** (1.0 / n)
    points = directions / norms[:, None] * radii[:, None]
    logger.debug(f"Sampled {N} uniform points in B^{n}_{R} (seed={seed})")
    return PointCloud(points=points)


def pairwise_sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of A and rows of B."""
    return cdist(np.asarray(A, dtype=float), np.asarray(B, dtype=float), metric="sqeuclidean")
