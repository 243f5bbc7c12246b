import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.isotonic import IsotonicRegression

from analytics.bounds import optimal_rv
from analytics.measures import f_beta, mean_w2_measures, precision_recall_sweep
from core.geometry import sample_uniform_ball
from core.schema import LinearMap, PointCloud, SimulationConfig
from data.cloud_store import write_table
from data.synthetic import calibrate_r_u, coordinate_projection, project, random_projection
from experiments.plotting import emit_plot

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["m", "r_V", "precision", "recall", "f_beta", "is_rv_star", "is_fbeta_argmax",
                 "w2_many_to_one", "w2_discontinuity"]
GRID_POINTS = 40
GRID_SPAN = (0.05, 2.0)


def default_rv_grid(anchor: float, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced retrieval radii over [0.05, 2] x anchor."""
    return np.geomspace(GRID_SPAN[0] * anchor, GRID_SPAN[1] * anchor, points)


def isotonic(values: Sequence[float], increasing: bool = True) -> np.ndarray:
    """
    Monotone least-squares fit of a curve sampled in order; NaN entries stay NaN.
    Used to assert PR-curve monotonicity on the underlying trend rather than raw jitter.
    """
    y = np.asarray(values, dtype=np.float64)
    out = np.full_like(y, np.nan)
    defined = ~np.isnan(y)
    if defined.sum() == 0:
        return out
    x = np.arange(y.size, dtype=np.float64)[defined]
    out[defined] = IsotonicRegression(increasing=increasing).fit_transform(x, y[defined])
    return out


def make_projection(kind: str, d: int, m: int, seed: int) -> LinearMap:
    if kind == "coordinate":
        return coordinate_projection(d, m)
    return random_projection(d, m, seed, orthonormal=(kind == "orthonormal"))


def _defined_means(values: np.ndarray) -> np.ndarray:
    """Column means over the defined (non-NaN) entries; NaN for an all-undefined column."""
    counts = (~np.isnan(values)).sum(axis=0)
    return np.where(counts > 0, np.nansum(values, axis=0) / np.maximum(counts, 1), np.nan)


def _sweep_rows(X: PointCloud, linear_map: LinearMap, r_u: float, grid: Optional[Iterable[float]],
                beta: float, R: float = 1.0, k: Optional[int] = None) -> pd.DataFrame:
    """
    Mean precision/recall/f-beta of one map over a retrieval-radius grid, with the two markers.
    The mean W2 measures on k-nearest sets do not depend on r_V and repeat on every row (NaN without k).
    """
    n, m = linear_map.in_dim, linear_map.out_dim
    rv_star = optimal_rv(n, m, R, r_u, linear_map.lipschitz) if r_u < R else math.nan
    if math.isnan(rv_star):
        logger.warning(f"r_U={r_u:.4g} is not below R={R}; no optimal r_V, grid anchored at r_U")
    anchor = r_u if math.isnan(rv_star) else rv_star
    grid = default_rv_grid(anchor) if grid is None else np.asarray(list(grid), dtype=np.float64)
    if not math.isnan(rv_star):
        grid = np.union1d(grid, [rv_star])

    pair = project(X, linear_map)
    precision, recall = precision_recall_sweep(pair, r_u, grid)
    mean_p, mean_r = _defined_means(precision), _defined_means(recall)
    fb = np.array([f_beta(p, r, beta) if not (np.isnan(p) or np.isnan(r)) else np.nan
                   for p, r in zip(mean_p, mean_r)])
    many_to_one, discontinuity = mean_w2_measures(pair, k) if k else (math.nan, math.nan)

    df = pd.DataFrame({
        "m": m,
        "r_V": grid,
        "precision": mean_p,
        "recall": mean_r,
        "f_beta": fb,
        "is_rv_star": grid == rv_star,
        "is_fbeta_argmax": False,
        "w2_many_to_one": many_to_one,
        "w2_discontinuity": discontinuity,
    })
    if not np.all(np.isnan(fb)):
        df.loc[int(np.nanargmax(fb)), "is_fbeta_argmax"] = True
    return df


def _flush(frames, config: SimulationConfig):
    if config.table_path and frames:
        write_table(pd.concat(frames, ignore_index=True), config.table_path, config.table_format)


def simulate_tradeoff(config: SimulationConfig) -> pd.DataFrame:
    """
    Precision/recall tradeoff of linear maps on a uniform ball: samples B^n_1, calibrates
    r_U to k_target neighbors on average, then for each m sweeps r_V and records mean
    precision, recall and f-beta, marking optimal_rv and the grid f-beta argmax.
    Rows computed before a failure are written to table_path before re-raising.
    """
    logger.info(f"Sampling {config.N} points in B^{config.n}_1 (seed {config.seed})")
    X = sample_uniform_ball(config.n, 1.0, config.N, config.seed)
    r_u = calibrate_r_u(X, config.effective_k_target)

    frames = []
    try:
        for m in config.m_list:
            logger.info(f"Sweeping m={m}")
            linear_map = make_projection(config.projection, config.n, m, config.seed + m)
            frames.append(_sweep_rows(X, linear_map, r_u, config.rv_grid, config.beta, k=config.k))
    except Exception as e:
        logger.error(f"Tradeoff simulation failed after {len(frames)} of {len(config.m_list)} m values: {e}")
        _flush(frames, config)
        raise

    table = pd.concat(frames, ignore_index=True)[TABLE_COLUMNS]
    table.attrs["r_u"] = r_u
    _flush([table], config)
    if config.plot_path:
        emit_plot(table, "pr-curve", config.plot_path)
    return table


def simulate_radius_sweep(config: SimulationConfig, m: int = 5,
                          k_list: Sequence[int] = (50, 100, 250, 500, 1000)) -> pd.DataFrame:
    """
    Fixed embedding dimension m, relevant radius varied through the neighbor target k:
    r_U is calibrated per k and the grid anchored at that r_U's optimal r_V.
    Same columns as simulate_tradeoff plus k and r_u.
    """
    X = sample_uniform_ball(config.n, 1.0, config.N, config.seed)
    linear_map = make_projection(config.projection, config.n, m, config.seed + m)
    w2 = mean_w2_measures(project(X, linear_map), config.k) if config.k else (math.nan, math.nan)
    frames = []
    try:
        for k in k_list:
            if k >= config.N:
                logger.warning(f"Skipping k={k}: needs more than {config.N} samples")
                continue
            logger.info(f"Sweeping k={k} at m={m}")
            r_u = calibrate_r_u(X, k)
            df = _sweep_rows(X, linear_map, r_u, config.rv_grid, config.beta)
            df["w2_many_to_one"], df["w2_discontinuity"] = w2
            df.insert(0, "k", k)
            df.insert(1, "r_u", r_u)
            frames.append(df)
    except Exception as e:
        logger.error(f"Radius sweep failed after {len(frames)} k values: {e}")
        _flush(frames, config)
        raise
    table = pd.concat(frames, ignore_index=True)
    _flush([table], config)
    return table


def rv_star_agreement(table: pd.DataFrame, rel_tol: float = 0.15) -> pd.DataFrame:
    """
    Per m: f-beta at optimal_rv against the grid's best f-beta, and whether the former is
    within rel_tol of the latter.
    """
    rows = []
    for m, group in table.groupby("m", sort=True):
        best = group["f_beta"].max()
        at_star = group.loc[group["is_rv_star"], "f_beta"]
        value = float(at_star.iloc[0]) if len(at_star) else math.nan
        rows.append({
            "m": m,
            "f_beta_at_rv_star": value,
            "f_beta_best": float(best),
            "within_tolerance": bool(value >= (1.0 - rel_tol) * best) if not math.isnan(value) else False,
        })
    return pd.DataFrame(rows)
