"""Probability metrics and fractional smoothness for polynomial images of Gaussians."""

__version__ = "0.1.0"

from .errors import (
    DegenerateSampleError,
    DimensionMismatch,
    GpmError,
    ParseError,
    SolverFailure,
    TruncationError,
)
from .besov import (
    ShiftProfile,
    besov_order_fit,
    besov_seminorm,
    difference_profile,
    directional_profiles,
    gaussian_radial_moment,
    gaussian_smooth,
    hll_constant,
    log_shift_grid,
    set_bound_constant,
    shift_tv_profile,
    smoothing_split,
)
from .malliavin import (
    MalliavinEval,
    MalliavinMatrixPoly,
    carbery_wright_profile,
    det_perturbation_bound,
    expected_det,
    gaussian_tail_check,
    grad_star_norm,
    malliavin_det,
    malliavin_eval,
    malliavin_matrix,
    reverse_poincare_check,
    small_ball_profile,
)
from .metrics import (
    Measure,
    TransportPlan,
    bv_norm,
    fm_distance,
    kantorovich_1d,
    kantorovich_kd,
    kantorovich_kd_plan,
    kr_distance,
    lp_norm_of_density,
    measure,
    tv_distance,
    tv_distance_meta,
)
from .polynomial import (
    ChaosDecomposition,
    Polynomial,
    PolynomialMap,
    gaussian_inner,
    gaussian_moment,
    hermite_decompose,
    hermite_polynomial,
    l2_norm,
    lp_norm_mc,
    ou_apply,
    parse,
    parse_map,
    variance,
)
from .verify import (
    InequalityReport,
    SuiteResult,
    describe_measure,
    image_measure,
    parse_measure_spec,
    parse_poly_spec,
    rate_exponent,
    run_check,
    run_suite,
    verify_cw_set_corollary,
    verify_frac_hll,
    verify_frac_hll_fm,
    verify_k_vs_fm,
    verify_poly_besov,
    verify_set_bound,
    verify_tv_vs_kantorovich,
    verify_tv_vs_l2,
)
from .sampling import (
    Gaussian1D,
    GridDensity,
    MonomialPower,
    ProductLaw,
    SampleSet,
    abs_moment,
    chisq1,
    kde_density,
    pushforward,
    sample_gaussian,
    sample_law,
    silverman_bandwidth,
)
