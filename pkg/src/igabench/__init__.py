"""Gram-matrix integration benchmark for 3D tensor-product B-spline spaces.

Compares classical quadrature-loop integration with sum factorization,
schedules the per-element task graph by Foata classes, and analyses
strong-scaling measurements with Amdahl's law.
"""

__version__ = "0.1.0"

from .assembly import GlobalGram, assemble, dof_index, spmv
from .heat import HeatProblem, SplineField, run_demo, stable_timestep
from .integrators import (
    ElementMatrix,
    SumFactBuffers,
    flop_count,
    integrate_element_classical,
    integrate_element_sumfact,
)
from .mesh import QuadratureRule, element_list, gauss_rule, local_index, support_set
from .runtime import (
    ExecutionTrace,
    IntegrationRuntime,
    RunConfig,
    RunResult,
    grams_bitwise_equal,
    run_integration,
    run_within_element,
)
from .scaling import (
    AmdahlEstimate,
    BenchRecord,
    amdahl_fraction,
    amdahl_limit,
    combined_limit,
    efficiency,
    estimate_amdahl,
    fit_complexity_slope,
    speedup,
)
from .splines import (
    BasisValues,
    KnotVector,
    eval_basis,
    eval_basis_order0,
    eval_nonzero_basis,
    eval_nonzero_basis_derivatives,
    make_knot_vector,
)
from .taskgraph import (
    DependencyGraph,
    Task,
    build_alphabet,
    build_dependencies,
    build_graph,
    export_dot,
    export_json,
    foata_classes,
    validate_schedule,
)
