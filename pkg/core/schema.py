import math
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class PointCloud(BaseModel):
    """
    N points in d dimensions, in a fixed order.
    Points are held as a read-only float64 array of shape (count, dim).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def validate_points(cls, v):
        arr = _as_matrix(v, "points")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"A point cloud needs at least one point of positive dimension, got shape {arr.shape}")
        return arr

    @field_serializer("points")
    def serialize_points(self, v: np.ndarray):
        return v.tolist()

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


class Neighborhood(BaseModel):
    """
    Neighbors of one query point: either a radius ball or a k-nearest set.
    The query itself is never a member.
    """
    center_index: int = Field(..., ge=0)
    member_indices: List[int] = Field(default_factory=list)
    radius: Optional[float] = Field(None, ge=0.0)
    k: Optional[int] = Field(None, gt=0)

    @model_validator(mode="after")
    def validate_kind(self):
        if (self.radius is None) == (self.k is None):
            raise ValueError("Exactly one of radius or k must be set on a Neighborhood")
        if self.center_index in self.member_indices:
            raise ValueError("A Neighborhood never contains its own center")
        return self


class BoundParams(BaseModel):
    """
    Parameter bundle for every closed-form bound.
    n: intrinsic dimension, m: embedding dimension, R: domain radius,
    r_u: relevant radius, r_v: retrieval radius, L: Lipschitz constant.
    """
    n: int = Field(..., gt=0)
    m: int = Field(..., gt=0)
    R: float = Field(..., gt=0.0)
    r_u: float = Field(..., gt=0.0)
    r_v: float = Field(..., gt=0.0)
    L: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def validate_ranges(self):
        if self.m >= self.n:
            raise ValueError(f"Embedding dimension m={self.m} must be below n={self.n}")
        if self.r_u >= self.R:
            raise ValueError(f"Relevant radius r_u={self.r_u} must be below R={self.R}")
        return self


class AvgCaseParams(BaseModel):
    """
    Average-case bound parameters: the worst-case bundle plus the slack delta.
    """
    base: BoundParams
    delta: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def validate_delta(self):
        limit = self.base.R ** 2 - self.base.r_u ** 2
        if self.delta ** 2 >= limit:
            raise ValueError(f"delta^2={self.delta ** 2:.6g} must be below R^2 - r_u^2 = {limit:.6g}")
        return self

    @property
    def integration_radius(self) -> float:
        """Radius of the m-ball of fiber centers whose fibers are large enough."""
        return math.sqrt(max(self.base.R ** 2 - self.base.r_u ** 2 - self.delta ** 2, 0.0))


class CostMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def validate_entries(cls, v):
        arr = _as_matrix(v, "entries")
        if arr.size == 0:
            raise ValueError("Cost matrix must be non-empty")
        if np.any(arr < 0):
            raise ValueError("Cost entries must be nonnegative")
        return arr

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    @property
    def T(self) -> "CostMatrix":
        return CostMatrix(entries=self.entries.T)


class TransportPlan(BaseModel):
    """
    Discrete coupling between two weighted supports.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mass: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray
    total_cost: float = Field(..., ge=0.0)
    method: str = "network-simplex"
    converged: bool = True
    marginal_error: float = 0.0
    iterations: Optional[int] = None
    epsilon: Optional[float] = None

    @field_validator("mass", mode="before")
    @classmethod
    def validate_mass(cls, v):
        return _as_matrix(v, "mass")

    @field_validator("source_marginal", "target_marginal", mode="before")
    @classmethod
    def validate_marginals(cls, v):
        return _as_vector(v, "marginal")

    @field_serializer("mass", "source_marginal", "target_marginal")
    def serialize_arrays(self, v: np.ndarray):
        return v.tolist()

    @property
    def transported_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def w2(self) -> float:
        """Wasserstein-2 value of the plan: square root of its squared-distance cost."""
        return math.sqrt(self.total_cost)


class EmbeddingPair(BaseModel):
    """
    Aligned high-dimensional inputs X and their low-dimensional images Y (row i of Y = f(row i of X)).
    """
    X: PointCloud
    Y: PointCloud

    @model_validator(mode="after")
    def validate_alignment(self):
        if self.X.count != self.Y.count:
            raise ValueError(f"X has {self.X.count} points but Y has {self.Y.count}")
        if self.Y.dim >= self.X.dim:
            raise ValueError(f"Embedding dim {self.Y.dim} must be below input dim {self.X.dim}")
        return self

    @property
    def count(self) -> int:
        return self.X.count


class AuditConfig(BaseModel):
    k: int = Field(30, gt=0, description="Neighborhood size for the Wasserstein measures")
    r_u: float = Field(..., gt=0.0, description="Relevant radius in data space")
    r_v: float = Field(..., gt=0.0, description="Retrieval radius in feature space")
    beta: float = Field(0.3, gt=0.0, description="Beta of the f-beta score")


class QueryMeasures(BaseModel):
    index: int
    precision: Optional[float] = None
    recall: Optional[float] = None
    f_beta: Optional[float] = None
    w2_many_to_one: Optional[float] = None
    w2_discontinuity: Optional[float] = None
    w2_cost: Optional[float] = None
    retrieved_count: int = 0
    relevant_count: int = 0

    @model_validator(mode="after")
    def validate_measures(self):
        for name in ("precision", "recall"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("w2_many_to_one", "w2_discontinuity"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name}={v} is negative")
        if self.w2_many_to_one is not None and self.w2_discontinuity is not None:
            self.w2_cost = (self.w2_many_to_one + self.w2_discontinuity) / 2
        return self


MEASURE_COLUMNS = ("precision", "recall", "f_beta", "w2_many_to_one", "w2_discontinuity", "w2_cost")


class MeasureReport(BaseModel):
    """
    Per-query and aggregate precision/recall/f-beta/Wasserstein diagnostics.
    aggregates: column -> {mean, median, std, count}, over defined entries only (None when there are none).
    """
    per_query: List[QueryMeasures]
    aggregates: Dict[str, Dict[str, Optional[float]]]
    skipped: List[int] = Field(default_factory=list)
    config: Optional[AuditConfig] = None
    k_used: Optional[int] = None


class LinearMap(BaseModel):
    """
    A linear DR map y = matrix @ x with its Lipschitz constant (operator 2-norm).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    lipschitz: float = Field(..., gt=0.0)
    kind: str = "linear"
    seed: Optional[int] = None

    @field_validator("matrix", mode="before")
    @classmethod
    def validate_matrix(cls, v):
        return _as_matrix(v, "matrix")

    @field_serializer("matrix")
    def serialize_matrix(self, v: np.ndarray):
        return v.tolist()

    @model_validator(mode="after")
    def validate_lipschitz(self):
        m, d = self.matrix.shape
        if m >= d:
            raise ValueError(f"A DR map must reduce dimension, got {m}x{d}")
        top = float(np.linalg.norm(self.matrix, 2))
        if abs(top - self.lipschitz) > 1e-8 * max(1.0, top):
            raise ValueError(f"lipschitz={self.lipschitz} does not match operator norm {top}")
        return self

    @property
    def in_dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, cloud: PointCloud) -> PointCloud:
        if cloud.dim != self.in_dim:
            raise ValueError(f"Map expects dim {self.in_dim}, cloud has dim {cloud.dim}")
        return PointCloud(points=cloud.points @ self.matrix.T)


class SimulationConfig(BaseModel):
    """
    Protocol of the precision/recall tradeoff simulation on a uniform ball.
    k_target defaults to 500 neighbors per 10000 samples, scaled to N.
    rv_grid defaults (per m) to 40 log-spaced values over [0.05, 2] x rv_star.
    """
    n: int = Field(10, gt=1)
    N: int = Field(3000, gt=1)
    seed: int = 0
    k_target: Optional[int] = Field(None, gt=0)
    m_list: List[int] = Field(default_factory=lambda: list(range(1, 10)))
    rv_grid: Optional[List[float]] = None
    beta: float = Field(0.3, gt=0.0)
    k: Optional[int] = Field(30, gt=0, description="Neighborhood size of the mean W2 columns; None skips them")
    projection: Literal["orthonormal", "gaussian", "coordinate"] = "orthonormal"
    table_path: Optional[str] = None
    table_format: Literal["csv", "json"] = "csv"
    plot_path: Optional[str] = None

    @model_validator(mode="after")
    def validate_protocol(self):
        bad = [m for m in self.m_list if not 0 < m < self.n]
        if bad:
            raise ValueError(f"m_list entries must lie in (0, n={self.n}), got {bad}")
        if self.rv_grid is not None:
            grid = np.asarray(self.rv_grid, dtype=float)
            if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
                raise ValueError("rv_grid must be strictly increasing and positive")
        if self.k_target is not None and self.k_target >= self.N:
            raise ValueError(f"k_target={self.k_target} must be below N={self.N}")
        if self.k is not None and self.k >= self.N:
            raise ValueError(f"k={self.k} must be below N={self.N}")
        return self

    @property
    def effective_k_target(self) -> int:
        if self.k_target is not None:
            return self.k_target
        return max(1, int(round(500 * self.N / 10000)))


class VerificationResult(BaseModel):
    """
    Outcome of one desk-scale check.
    tolerance_kind says how observed/expected/tolerance relate:
      absolute: |observed - expected| <= tolerance
      relative: |observed - expected| <= tolerance * |expected|
      upper: observed <= expected + tolerance
      lower: observed >= expected - tolerance
    conditions holds secondary criteria; every one must hold for the check to pass.
    """
    model_config = ConfigDict(populate_by_name=True)

    name: str
    passed: bool = Field(..., alias="pass")
    observed: float
    expected: float
    tolerance: float
    tolerance_kind: Literal["absolute", "relative", "upper", "lower"] = "absolute"
    runtime_seconds: float = 0.0
    details: Dict[str, float] = Field(default_factory=dict)
    conditions: Dict[str, bool] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_verdict(self):
        diff = self.observed - self.expected
        if self.tolerance_kind == "absolute":
            ok = abs(diff) <= self.tolerance
        elif self.tolerance_kind == "relative":
            ok = abs(diff) <= self.tolerance * abs(self.expected)
        elif self.tolerance_kind == "upper":
            ok = diff <= self.tolerance
        else:
            ok = diff >= -self.tolerance
        ok = ok and all(self.conditions.values())
        if ok != self.passed:
            raise ValueError(f"{self.name}: pass={self.passed} disagrees with its {self.tolerance_kind} tolerance or conditions")
        return self

    @classmethod
    def judge(cls, name: str, observed: float, expected: float, tolerance: float,
              tolerance_kind: str = "absolute", runtime_seconds: float = 0.0,
              details: Optional[Dict[str, float]] = None,
              conditions: Optional[Dict[str, bool]] = None) -> "VerificationResult":
        diff = observed - expected
        verdict = {
            "absolute": abs(diff) <= tolerance,
            "relative": abs(diff) <= tolerance * abs(expected),
            "upper": diff <= tolerance,
            "lower": diff >= -tolerance,
        }[tolerance_kind]
        conditions = {k: bool(v) for k, v in (conditions or {}).items()}
        verdict = verdict and all(conditions.values())
        return cls(name=name, passed=bool(verdict), observed=float(observed), expected=float(expected),
                   tolerance=float(tolerance), tolerance_kind=tolerance_kind,
                   runtime_seconds=float(runtime_seconds), details=details or {}, conditions=conditions)


class BoundsReport(BaseModel):
    """
    Every closed-form quantity for one parameter set; field names are the JSON keys of `dr-audit bounds`.
    q1 follows the sphere-lift formula and is experimental.
    """
    d_factor: float
    precision_worst: float
    precision_pnorm: float
    precision_avg: float
    q1: float
    q2: float
    w2_lower: float
    rv_star: float
    w2_radius: float
    delta: float
    q1_experimental: bool = True


class BoundsRequest(BaseModel):
    params: BoundParams
    delta: Optional[float] = Field(None, gt=0.0)


class AuditRequest(BaseModel):
    """Inline audit request: row-aligned X and Y as nested lists."""
    X: List[List[float]]
    Y: List[List[float]]
    config: AuditConfig
