import logging

from fastapi import FastAPI, HTTPException
from pydantic import ValidationError

from analytics.audit import AuditEngine
from analytics.bounds import bounds_report
from core.errors import DRAuditError, InvalidArgumentError
from core.schema import AuditRequest, BoundsReport, BoundsRequest, EmbeddingPair, MeasureReport, PointCloud

app = FastAPI(title="dr-audit API", version="1.0.0")
logger = logging.getLogger("API")


def _status_of(e: Exception) -> int:
    if isinstance(e, (InvalidArgumentError, ValidationError, ValueError)):
        return 422
    return 500


@app.get("/health")
def health_check():
    return {"status": "healthy", "service": "dr-audit"}


@app.post("/bounds", response_model=BoundsReport)
def compute_bounds(request: BoundsRequest):
    """
    Closed-form precision and Wasserstein bounds for one parameter set.
    """
    try:
        return bounds_report(request.params, delta=request.delta)
    except (DRAuditError, ValueError) as e:
        logger.error(f"API Error (bounds): {e}")
        raise HTTPException(status_code=_status_of(e), detail=str(e))


@app.post("/audit", response_model=MeasureReport)
def audit_embedding(request: AuditRequest):
    """
    Per-query precision/recall and Wasserstein measures of an inline embedding.
    """
    try:
        pair = EmbeddingPair(X=PointCloud(points=request.X), Y=PointCloud(points=request.Y))
        return AuditEngine(request.config).audit(pair)
    except (DRAuditError, ValueError) as e:
        logger.error(f"API Error (audit): {e}")
        raise HTTPException(status_code=_status_of(e), detail=str(e))
