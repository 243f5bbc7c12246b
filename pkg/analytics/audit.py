import logging
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from analytics.measures import assignment_w2, count_sweep, f_beta
from config import settings
from core.errors import InvalidArgumentError
from core.neighbors import NeighborIndex
from core.schema import MEASURE_COLUMNS, AuditConfig, EmbeddingPair, MeasureReport, PointCloud, QueryMeasures

logger = logging.getLogger(__name__)


class AuditEngine:
    """
    Audits one DR map from its aligned input/output samples.
    Produces, per query:
    1. Precision/Recall: radius neighborhoods r_U in X against r_V in Y.
    2. Many-to-one W2: X-space transport between the kNN of x_i and the preimages of the kNN of y_i.
    3. Discontinuity W2: the same comparison carried out on the images in Y-space.
    """

    def __init__(self, config: AuditConfig, exact_limit: int = None):
        self.config = config
        self.exact_limit = settings.EXACT_SOLVER_LIMIT if exact_limit is None else exact_limit

    def _effective_k(self, count: int) -> int:
        k = self.config.k
        if k > count - 1:
            logger.warning(f"k={k} exceeds the {count - 1} available neighbors; using k={count - 1}")
            k = count - 1
        return k

    def audit(self, pair: EmbeddingPair) -> MeasureReport:
        """
        Every per-query measure, the aggregates and the skip list, in index order.
        Undefined measures stay None and their query lands in `skipped`.
        """
        count = pair.count
        cfg = self.config
        logger.info(f"Auditing {count} points: dim {pair.X.dim} -> {pair.Y.dim}, k={cfg.k}, "
                    f"r_U={cfg.r_u:.4g}, r_V={cfg.r_v:.4g}")
        if count == 1:
            logger.warning("Single-point cloud: every measure is undefined")
            rows = [QueryMeasures(index=0)]
            return MeasureReport(per_query=rows, aggregates=self.aggregate(rows), skipped=[0],
                                 config=cfg, k_used=0)

        k = self._effective_k(count)
        hits, retrieved, relevant = count_sweep(pair, cfg.r_u, [cfg.r_v])
        hits, retrieved = hits[:, 0], retrieved[:, 0]

        x_knn = NeighborIndex(pair.X).knn_all(k)
        y_knn = NeighborIndex(pair.Y).knn_all(k)
        X, Y = pair.X.points, pair.Y.points

        rows: List[QueryMeasures] = []
        skipped: List[int] = []
        for i in range(count):
            p = float(hits[i] / retrieved[i]) if retrieved[i] else None
            r = float(hits[i] / relevant[i]) if relevant[i] else None
            fb = f_beta(p, r, cfg.beta) if p is not None and r is not None else None
            U, V = x_knn[i], y_knn[i]
            rows.append(QueryMeasures(
                index=i,
                precision=p,
                recall=r,
                f_beta=fb,
                w2_many_to_one=assignment_w2(X[U], X[V], index=i, limit=self.exact_limit),
                w2_discontinuity=assignment_w2(Y[U], Y[V], index=i, limit=self.exact_limit),
                retrieved_count=int(retrieved[i]),
                relevant_count=int(relevant[i]),
            ))
            if p is None or r is None:
                skipped.append(i)

        if skipped:
            logger.warning(f"{len(skipped)} of {count} queries have undefined precision or recall")
        return MeasureReport(per_query=rows, aggregates=self.aggregate(rows), skipped=skipped,
                             config=cfg, k_used=k)

    @staticmethod
    def aggregate(rows: List[QueryMeasures]) -> Dict[str, Dict[str, Optional[float]]]:
        """mean / median / std (population) / count of each measure over its defined entries."""
        df = report_rows_frame(rows)
        out = {}
        for col in MEASURE_COLUMNS:
            values = df[col].dropna() if col in df else pd.Series(dtype=float)
            if values.empty:
                out[col] = {"mean": None, "median": None, "std": None, "count": 0.0}
                continue
            out[col] = {
                "mean": float(values.mean()),
                "median": float(values.median()),
                "std": float(values.std(ddof=0)),
                "count": float(values.size),
            }
        return out

    def compare(self, X: PointCloud, embeddings: Mapping[str, PointCloud]) -> pd.DataFrame:
        """
        Audits several embeddings of the same X and ranks them by mean Wasserstein cost
        (lowest first). Many-to-one and discontinuity are kept as separate columns.
        """
        if not embeddings:
            raise InvalidArgumentError("No embeddings to compare")
        records = []
        for name, Y in embeddings.items():
            logger.info(f"Comparing embedding '{name}'")
            report = self.audit(EmbeddingPair(X=X, Y=Y))
            row = {"name": name, "dim": Y.dim, "skipped": len(report.skipped)}
            for col in MEASURE_COLUMNS:
                row[col] = report.aggregates[col]["mean"]
            records.append(row)
        df = pd.DataFrame(records).sort_values(["w2_cost", "name"], na_position="last", kind="stable")
        df["rank"] = np.arange(1, len(df) + 1)
        return df.reset_index(drop=True)


def report_rows_frame(rows: List[QueryMeasures]) -> pd.DataFrame:
    df = pd.DataFrame([r.model_dump() for r in rows])
    for col in MEASURE_COLUMNS:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    return df


def report_frame(report: MeasureReport) -> pd.DataFrame:
    """Per-query table of a report, one row per index."""
    return report_rows_frame(report.per_query)


def audit(pair: EmbeddingPair, config: AuditConfig) -> MeasureReport:
    return AuditEngine(config).audit(pair)


def compare_embeddings(X: PointCloud, embeddings: Mapping[str, PointCloud], config: AuditConfig) -> pd.DataFrame:
    return AuditEngine(config).compare(X, embeddings)
