import logging
from typing import Optional, Tuple, Union

import numpy as np
from sklearn.datasets import make_s_curve, make_swiss_roll

from core.errors import InvalidArgumentError, RankDeficiencyError
from core.neighbors import NeighborIndex
from core.schema import EmbeddingPair, LinearMap, PointCloud

logger = logging.getLogger(__name__)


def _check_dims(d: int, m: int):
    if m < 1 or d < 1:
        raise InvalidArgumentError(f"Dimensions must be positive, got d={d}, m={m}")
    if m >= d:
        raise InvalidArgumentError(f"Projection must reduce dimension, got m={m} >= d={d}")


def random_projection(d: int, m: int, seed: int, orthonormal: bool = True) -> LinearMap:
    """
    Random linear map R^d -> R^m.
    Default: rows of a d x m Gaussian orthonormalized by QR, signs fixed by diag(R), so L = 1.
    With orthonormal=False the raw Gaussian matrix is returned with its operator norm as L.
    """
    _check_dims(d, m)
    rng = np.random.default_rng(seed)
    if not orthonormal:
        matrix = rng.standard_normal((m, d))
        return LinearMap(matrix=matrix, lipschitz=float(np.linalg.norm(matrix, 2)), kind="gaussian", seed=seed)
    G = rng.standard_normal((d, m))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    matrix = (Q * signs).T
    return LinearMap(matrix=matrix, lipschitz=1.0, kind="orthonormal", seed=seed)


def coordinate_projection(d: int, m: int) -> LinearMap:
    """Keeps the first m coordinates."""
    _check_dims(d, m)
    return LinearMap(matrix=np.eye(m, d), lipschitz=1.0, kind="coordinate")


def explained_variance_ratio(X: PointCloud) -> np.ndarray:
    """Eigenvalues of the sample covariance, descending, as fractions of the total variance."""
    if X.count < 2:
        raise InvalidArgumentError("Need at least two points for a covariance")
    centered = X.points - X.points.mean(axis=0)
    eigvals = np.linalg.eigvalsh(centered.T @ centered / (X.count - 1))[::-1]
    eigvals = np.clip(eigvals, 0.0, None)
    total = eigvals.sum()
    return eigvals / total if total > 0 else eigvals


def pca_projection(X: PointCloud, m: int, rank_tol: float = 1e-10) -> LinearMap:
    """
    Top-m principal directions of the centered cloud as an orthonormal-row map.
    Uses a symmetric eigendecomposition; each direction is signed so that its
    largest-magnitude entry is positive.
    """
    _check_dims(X.dim, m)
    if X.count < 2:
        raise InvalidArgumentError("PCA needs at least two points")
    centered = X.points - X.points.mean(axis=0)
    cov = centered.T @ centered / (X.count - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals, eigvecs = eigvals[::-1], eigvecs[:, ::-1]

    rank = int(np.sum(eigvals > rank_tol * max(eigvals[0], np.finfo(float).tiny)))
    if rank < m:
        logger.warning(f"PCA: data has rank {rank}, fewer than the requested {m} directions")
        raise RankDeficiencyError(f"Data spans {rank} directions, cannot extract {m}", achieved_rank=rank)

    directions = eigvecs[:, :m].T.copy()
    for row in directions:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    ratio = eigvals[:m].sum() / eigvals.sum()
    logger.info(f"PCA: top {m} of {X.dim} directions explain {ratio:.2%} of the variance")
    return LinearMap(matrix=directions, lipschitz=float(np.linalg.norm(directions, 2)), kind="pca")


def lipschitz_of(linear_map: LinearMap, tol: float = 1e-8, max_iter: int = 10000, seed: int = 0) -> float:
    """Top singular value of the map by power iteration on A^T A."""
    A = linear_map.matrix
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        new_lam = float(np.linalg.norm(w))
        if new_lam == 0.0:
            return 0.0
        v = w / new_lam
        if abs(new_lam - lam) <= tol * new_lam:
            lam = new_lam
            break
        lam = new_lam
    else:
        logger.warning(f"Power iteration did not settle in {max_iter} steps")
    return float(np.sqrt(lam))


def project(X: PointCloud, linear_map: LinearMap) -> EmbeddingPair:
    return EmbeddingPair(X=X, Y=linear_map.apply(X))


def calibrate_r_u(X: PointCloud, k_target: int, index: Optional[NeighborIndex] = None, max_iter: int = 200) -> float:
    """
    Radius r_U at which the mean number of other points strictly within r_U is k_target (+1).

    Bisection keeps mean(lo) < k_target <= mean(hi) and stops once mean(hi) - k_target <= 1;
    hi is returned. Ties that make the count jump past k_target + 1 are unreachable targets.
    """
    if isinstance(k_target, bool) or int(k_target) != k_target or not 1 <= k_target < X.count:
        raise InvalidArgumentError(f"k_target={k_target!r} must be an integer in [1, {X.count - 1}]")
    index = index or NeighborIndex(X, use_tree=True)
    centroid = X.points.mean(axis=0)
    diameter = 2.0 * float(np.max(np.linalg.norm(X.points - centroid, axis=1)))
    lo, hi = 0.0, diameter * (1.0 + 1e-9) + 1e-12
    mean_hi = index.mean_neighbor_count(hi)
    if mean_hi < k_target:
        raise InvalidArgumentError(f"k_target={k_target} unreachable: at most {mean_hi:.3f} neighbors on average")

    for _ in range(max_iter):
        if mean_hi - k_target <= 1.0:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        mean_mid = index.mean_neighbor_count(mid)
        if mean_mid < k_target:
            lo = mid
        else:
            hi, mean_hi = mid, mean_mid

    if mean_hi - k_target > 1.0:
        logger.error(f"r_U calibration stuck: mean count jumps to {mean_hi:.3f} at r={hi:.6g}")
        raise InvalidArgumentError(
            f"k_target={k_target} unreachable within +-1: mean count jumps to {mean_hi:.3f} (tied distances)"
        )
    logger.info(f"Calibrated r_U={hi:.6g} for k_target={k_target} (mean count {mean_hi:.3f})")
    return hi


def _manifold_args(N: int, noise: float):
    if N < 1:
        raise InvalidArgumentError(f"N must be positive, got {N}")
    if noise < 0:
        raise InvalidArgumentError(f"noise must be nonnegative, got {noise}")


def s_curve(N: int, noise: float = 0.0, seed: int = 0,
            return_params: bool = False) -> Union[PointCloud, Tuple[PointCloud, np.ndarray]]:
    """
    S-curve in 3-D: (sin t, y, sign(t)(cos t - 1)), t in [-3pi/2, 3pi/2], y in [0, 2].
    With return_params the curve parameter t of each point is returned too.
    """
    _manifold_args(N, noise)
    points, t = make_s_curve(n_samples=N, noise=noise, random_state=seed)
    cloud = PointCloud(points=points)
    return (cloud, t) if return_params else cloud


def swiss_roll(N: int, noise: float = 0.0, seed: int = 0,
               return_params: bool = False) -> Union[PointCloud, Tuple[PointCloud, np.ndarray]]:
    """
    Swiss roll in 3-D: (t cos t, y, t sin t), t in [1.5pi, 4.5pi], y in [0, 21].
    """
    _manifold_args(N, noise)
    points, t = make_swiss_roll(n_samples=N, noise=noise, random_state=seed)
    cloud = PointCloud(points=points)
    return (cloud, t) if return_params else cloud
