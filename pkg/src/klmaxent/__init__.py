"""Regularized maximum-entropy density estimation.

KL-proximal primal-dual solvers with elastic-net, group-lasso and max-norm
penalties, warm-started regularization paths, and two classical baselines
for comparison.  Hot kernels run through a compiled extension when available
(``klmaxent.backend_name()`` tells which); set ``KLMAXENT_BACKEND=python``
to force the pure-numpy fallback.
"""

from . import _backend
from .core import (
    ElasticNet,
    FeatureMatrix,
    GroupLasso,
    GroupPartition,
    LInf,
    PenaltySpec,
    SimplexDistribution,
    SolveReport,
    largest_singular_value,
    model_average,
    operator_norm_1to2,
)
from .data import (
    CellTable,
    build_empirical,
    load_problem,
    load_table,
    minmax_scale,
    save_problem,
    save_table,
    synth_problem,
    table_to_problem,
)
from .errors import ConvergenceError, NonFiniteIterateError, OracleError, TableParseError
from .gibbs import GibbsCache, dual_objective, gibbs_distribution, kl_divergence, primal_objective
from .path import (
    PathResult,
    PathSchedule,
    feature_entry_order,
    fit_path,
    make_schedule,
    t_max,
)
from .prox import prox_elastic_net, prox_group_lasso, prox_linf, project_l1_ball, shrink1
from .solvers import (
    Problem,
    SolverOptions,
    check_optimality,
    fbs_solve,
    npdhg_nonsmooth,
    npdhg_smooth,
    structmaxent2_solve,
)

__version__ = "0.1.0"


def backend_name():
    """Name of the kernel backend selected at import ('compiled' or 'python')."""
    return _backend.active_name()
