import os
from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


def _env(name: str, default):
    return type(default)(os.getenv(f"DR_AUDIT_{name}", default))


class Settings(BaseModel):
    """
    Application Configuration.
    Loads from environment variables (DR_AUDIT_*) via os.getenv, after a local .env file.
    """

    # System
    LOG_LEVEL: str = Field(default_factory=lambda: _env("LOG_LEVEL", "INFO"), description="Logging level")
    OUTPUT_DIR: str = Field(default_factory=lambda: _env("OUTPUT_DIR", "./results"), description="Directory for tables and plots")

    # Experiment Defaults
    DEFAULT_SEED: int = Field(default_factory=lambda: _env("DEFAULT_SEED", 0), description="Seed used when none is given")
    DEFAULT_K: int = Field(default_factory=lambda: _env("DEFAULT_K", 30), description="Neighborhood size for Wasserstein measures")
    DEFAULT_BETA: float = Field(default_factory=lambda: _env("DEFAULT_BETA", 0.3), description="Beta of the f-beta score")

    # Solver Limits
    EXACT_SOLVER_LIMIT: int = Field(default_factory=lambda: _env("EXACT_SOLVER_LIMIT", 512), description="Max support points per side for exact OT")
    PARTIAL_OT_LIMIT: int = Field(default_factory=lambda: _env("PARTIAL_OT_LIMIT", 400), description="Max atoms per side for the partial OT LP")
    SINKHORN_EPSILON_FACTOR: float = Field(default_factory=lambda: _env("SINKHORN_EPSILON_FACTOR", 0.05), description="Fallback epsilon as a fraction of the median nonzero cost")
    SINKHORN_MAX_ITER: int = Field(default_factory=lambda: _env("SINKHORN_MAX_ITER", 100000), description="Sinkhorn iteration cap")

    # Tolerances
    QUADRATURE_TOL: float = Field(default_factory=lambda: _env("QUADRATURE_TOL", 1e-8), description="Absolute tolerance of adaptive Simpson")
    QUADRATURE_MAX_INTERVALS: int = Field(default_factory=lambda: _env("QUADRATURE_MAX_INTERVALS", 2 ** 20), description="Interval budget of adaptive Simpson")
    PLAN_TOL: float = Field(default_factory=lambda: _env("PLAN_TOL", 1e-9), description="Marginal/cost tolerance for exact plans")
    LP_TOL: float = Field(default_factory=lambda: _env("LP_TOL", 1e-7), description="Marginal tolerance for interior-point LP plans")


# Global settings instance
try:
    settings = Settings()
except Exception as e:
    print(f"WARNING: Settings failed to load from environment, using defaults: {e}")
    settings = Settings.model_construct(
        LOG_LEVEL="INFO", OUTPUT_DIR="./results", DEFAULT_SEED=0, DEFAULT_K=30, DEFAULT_BETA=0.3,
        EXACT_SOLVER_LIMIT=512, PARTIAL_OT_LIMIT=400, SINKHORN_EPSILON_FACTOR=0.05,
        SINKHORN_MAX_ITER=100000, QUADRATURE_TOL=1e-8, QUADRATURE_MAX_INTERVALS=2 ** 20,
        PLAN_TOL=1e-9, LP_TOL=1e-7,
    )
