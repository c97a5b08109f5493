"""mlab: a numerical laboratory for phase-space symbol calculus.

Discretized Weyl/Wick quantization, solvability-condition checks,
phase-space weight functions, multiplier construction, a priori
estimate verification, model operators, and a quasilinear leaf solver.
"""

__version__ = "0.1.0"

from .phase_grid import (  # noqa: F401
    PhaseGrid,
    SymbolField,
    build_grid,
    fd_derivative,
    seminorm,
)
from .conditions import (  # noqa: F401
    ConditionReport,
    HessianReport,
    LeafSignTable,
    LimitHamiltonField,
    check_subr_psi,
    hessian_at_sigma2,
    leaf_sign,
    limit_hamilton_field,
    refined_symbol,
    subprincipal_symbol,
)
from .quantize import (  # noqa: F401
    CompositionReport,
    DiscreteOperator,
    TruncationBiasWarning,
    compose_leading_check,
    gaussian_regularize,
    kn_quantize,
    kn_to_weyl,
    operator_from_npz,
    operator_to_csv,
    operator_to_npz,
    weyl_quantize,
    wick_quantize,
)
from .symlang import SymbolExpr, eval_on_grid, parse_expr  # noqa: F401
from .weights import (  # noqa: F401
    FactorizationReport,
    SignConditionWarning,
    WeightField,
    XSets,
    compute_H,
    compute_M,
    compute_h1,
    compute_m,
    compute_x_sets,
    factorize_alpha,
    gradient_norm,
    hessian_norm,
    lattice_distance,
    signed_delta,
    weight_csv_slice,
    weight_fields_from_npz,
    weight_fields_to_npz,
)
from .multiplier import (  # noqa: F401
    DEFAULT_EPSILON,
    LMatrixReport,
    MultiplierBundle,
    build_multiplier,
    bundle_to_json,
    compute_L_matrix,
    compute_lambda,
    compute_rho,
)
from .estimate import (  # noqa: F401
    DEFAULT_BAND_FRACTION,
    DEFAULT_C0_CAP,
    DominationReport,
    EstimateReport,
    EstimateRow,
    StateVector,
    assemble_normal_form,
    bilinear,
    generate_tests,
    mu_domination_check,
    report_plot_data,
    report_to_csv,
    report_to_json,
    sweep_window_halfwidths,
    verify_apriori,
    wick_domination_check,
)
