"""jumpmlmc: multilevel Monte Carlo for parabolic problems with random
jump-diffusion coefficients.

Pipeline per sample: Matérn Gaussian field via circulant embedding, random
quadrangle partition with uniform jump heights, interface-adapted (or
structured) P1 finite elements, backward Euler in time, and a linear
quantity of interest.  Standard and coupled multilevel estimators combine
the per-level samples; see the README for the command-line study driver.
"""
from ._kernels import BACKEND as kernel_backend
from .config import ConfigError, Expr, ProblemConfig, dumps_config, load_config, loads_config
from .fem import (
    DiscreteSystem,
    PathError,
    QoISpec,
    Trajectory,
    assemble,
    backward_euler,
    evaluate_qoi,
    interpolate_initial,
    solve_path,
)
from .jump_field import (
    BMap,
    CoefficientSample,
    JumpHeights,
    Partition,
    eval_a,
    eval_b,
    locate,
    sample_jump_heights,
    sample_partition_quadrangles,
)
from .mesh import (
    Mesh,
    MeshQualityError,
    check_conformity,
    min_angle,
    shape_regularity,
    triangulate_adapted,
    triangulate_uniform,
)
from .mlmc import (
    EstimatorResult,
    LevelSchedule,
    build_schedule,
    compute_reference,
    coupled_mlmc_estimate,
    mlmc_estimate,
    rmse_study,
)
from .random_field import (
    CirculantEmbedding,
    CovarianceSpec,
    EmbeddingError,
    GridField,
    SampleGrid,
    build_embedding,
    coarsen_nested,
    interpolate,
    matern_cov,
    sample_grf,
)
from .sparse_linalg import SolveError, SparseMatrix, from_triplets, solve, spmv
from .streams import RandomStream

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "ConfigError", "Expr", "ProblemConfig", "dumps_config", "load_config", "loads_config",
    "DiscreteSystem", "PathError", "QoISpec", "Trajectory", "assemble", "backward_euler",
    "evaluate_qoi", "interpolate_initial", "solve_path",
    "BMap", "CoefficientSample", "JumpHeights", "Partition", "eval_a", "eval_b", "locate",
    "sample_jump_heights", "sample_partition_quadrangles",
    "Mesh", "MeshQualityError", "check_conformity", "min_angle", "shape_regularity",
    "triangulate_adapted", "triangulate_uniform",
    "EstimatorResult", "LevelSchedule", "build_schedule", "compute_reference",
    "coupled_mlmc_estimate", "mlmc_estimate", "rmse_study",
    "CirculantEmbedding", "CovarianceSpec", "EmbeddingError", "GridField", "SampleGrid",
    "build_embedding", "coarsen_nested", "interpolate", "matern_cov", "sample_grf",
    "SolveError", "SparseMatrix", "from_triplets", "solve", "spmv",
    "RandomStream",
    "__version__",
]
