"""Variance-reduced stochastic solvers with randomized batch sizes for sparse GLMs.

The library bundles:

* ``dataio``  -- LIBSVM parsing into an immutable CSR container
* ``glm``     -- composite objectives (logistic / squared loss, l1 / l2)
* ``prox``    -- proximal operators and the closed-form nested soft threshold
* ``solver``  -- the unified solver (GD, SAGA, SVRG, SAGA++) with lazy updates
* ``rates``   -- step sizes, contraction factors and optimal batch planning
* ``profiler``-- sequential-vs-random access timing (cache effect ratio)
* ``synth``   -- synthetic problem generation with known conditioning
* ``cli``     -- experiment harness (``batchvr`` command)
"""

from .dataio import SparseDataset, DatasetStats, ParseError, parse_libsvm, stats, write_libsvm
from .glm import LossKind, Regularizer, CompositeObjective, ConstantsUnavailable
from .prox import prox_l1, prox_l2, lazy_nested_prox
from .solver import (
    BatchDistribution,
    UpdateRule,
    SolverConfig,
    TraceRecord,
    RunResult,
    DivergenceError,
    init_state,
    vr_gradient,
    step,
    flush_lazy,
    run,
    staleness_distribution,
    simulate_staleness,
    make_config,
)
from .rates import (
    validate_gamma,
    gamma_adaptive,
    gamma_dependent,
    access_cost_curve,
    wall_cost_curve,
    solve_optimal_batch,
    two_point_params,
    feasible_tau_max,
    make_plan,
)
from .profiler import CacheProfile, measure_cache_ratio
from .synth import SyntheticSpec, SyntheticProblem, generate_synthetic

__version__ = "0.1.0"
