import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from core.errors import InvalidArgumentError
from core.schema import EmbeddingPair, PointCloud, TransportPlan

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def cloud_to_frame(cloud: PointCloud) -> pd.DataFrame:
    return pd.DataFrame(cloud.points, columns=[f"x{j}" for j in range(cloud.dim)])


def save_cloud_csv(cloud: PointCloud, path: str):
    """One point per row, header x0,x1,...; 17 significant digits so values round-trip exactly."""
    _ensure_parent(path)
    cloud_to_frame(cloud).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {cloud.count} x {cloud.dim} cloud to {path}")


def load_cloud_csv(path: str) -> PointCloud:
    if not os.path.exists(path):
        raise InvalidArgumentError(f"Cloud file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    if df.empty:
        raise InvalidArgumentError(f"Cloud file {path} has no rows")
    try:
        points = df.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise InvalidArgumentError(f"Cloud file {path} has non-numeric entries: {e}") from e
    logger.info(f"Loaded {points.shape[0]} x {points.shape[1]} cloud from {path}")
    return PointCloud(points=points)


def save_cloud_json(cloud: PointCloud, path: str):
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump({"dim": cloud.dim, "count": cloud.count, "points": cloud.points.tolist()}, f)


def load_cloud_json(path: str) -> PointCloud:
    if not os.path.exists(path):
        raise InvalidArgumentError(f"Cloud file not found: {path}")
    with open(path, "r") as f:
        payload = json.load(f)
    cloud = PointCloud(points=payload["points"])
    if cloud.dim != payload.get("dim", cloud.dim) or cloud.count != payload.get("count", cloud.count):
        raise InvalidArgumentError(f"Cloud file {path} header disagrees with its points")
    return cloud


def load_cloud(path: str) -> PointCloud:
    if path.lower().endswith(".json"):
        return load_cloud_json(path)
    return load_cloud_csv(path)


def save_cloud(cloud: PointCloud, path: str):
    if path.lower().endswith(".json"):
        save_cloud_json(cloud, path)
    else:
        save_cloud_csv(cloud, path)


def save_embedding_pair(pair: EmbeddingPair, prefix: str, sidecar: Optional[Dict[str, Any]] = None) -> Dict[str, str]:
    """
    Writes <prefix>_high.csv, <prefix>_low.csv and <prefix>.json (map metadata such as L and seed).
    """
    paths = {
        "high": f"{prefix}_high.csv",
        "low": f"{prefix}_low.csv",
        "sidecar": f"{prefix}.json",
    }
    save_cloud_csv(pair.X, paths["high"])
    save_cloud_csv(pair.Y, paths["low"])
    meta = {"count": pair.count, "high_dim": pair.X.dim, "low_dim": pair.Y.dim}
    meta.update(sidecar or {})
    with open(paths["sidecar"], "w") as f:
        json.dump(meta, f, indent=2)
    return paths


def export_plan_csv(plan: TransportPlan, path: str, threshold: float = 0.0):
    """(i, j, mass) triplets of the entries above threshold, row-major order."""
    rows, cols = np.nonzero(plan.mass > threshold)
    df = pd.DataFrame({"i": rows, "j": cols, "mass": plan.mass[rows, cols]})
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Exported {len(df)} plan entries to {path}")


def table_format(path: str, fmt: Optional[str] = None) -> str:
    """A .json or .csv suffix decides; any other path falls back to fmt (csv by default)."""
    lowered = path.lower()
    if lowered.endswith(".json"):
        return "json"
    if lowered.endswith(".csv"):
        return "csv"
    fmt = fmt or "csv"
    if fmt not in ("csv", "json"):
        raise InvalidArgumentError(f"Unknown table format {fmt!r}; expected csv or json")
    return fmt


def write_table(df: pd.DataFrame, path: str, fmt: Optional[str] = None) -> str:
    """Result table as CSV (17 significant digits) or as a JSON list of records."""
    _ensure_parent(path)
    if table_format(path, fmt) == "json":
        df.to_json(path, orient="records", indent=2, double_precision=15)
    else:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path
