"""Numerical laboratory for Bergman kernels of positive line bundles over
covering towers of flat complex tori.

The universal-cover model is the Gaussian-weighted space of entire
functions with its closed-form reproducing kernel; quotient kernels at each
tower level are rigorously truncated periodized lattice sums.  On top of
the kernels sit coherent-state frames, random section sampling, certified
zero location, and the analytic mean/variance formulas for pairings of
normalized zero currents with periodic test forms.
"""

__version__ = "0.1.0"

from .errors import (
    BaseLocusError,
    BoundaryZeroError,
    ClusterUnresolved,
    ConfigError,
    CovertowerError,
    DepthError,
    DivisionDegenerate,
    DomainError,
    FrameDegenerate,
    LevelOutOfRange,
    NonIntegerWinding,
    QuantizationError,
    TruncationError,
    ZeroCountMismatch,
)
from .fock import (
    AGMON_BETA,
    BundleParams,
    KernelValue,
    agmon_check,
    fock_kernel,
    fock_wmag,
    reproducing_residual,
)
from .lattice import (
    Lattice,
    Tower,
    TowerLevel,
    coset_reps,
    make_matrix_tower,
    make_product_tower,
    packing_count_bound,
    points_in_disk,
    reduce,
    shortest_vector,
)
from .quotient import (
    DEFAULT_TRUNCATION,
    MetricDensity,
    TruncationPolicy,
    base_locus_min,
    bergman_metric_density,
    idempotence_residual,
    kernel_trace,
    metric_density_array,
    normalized_kernel,
    normalized_kernel_array,
    quotient_kernel,
    stability_gap,
    weighted_kernel,
    weighted_kernel_dz,
)
from .sections import (
    CoherentFrame,
    Section,
    build_frame,
    derive_rng,
    dump_samples,
    eval_section,
    eval_section_deriv,
    eval_section_deriv_weighted,
    eval_section_weighted,
    load_samples,
    sample_onb,
    sample_sphere,
)
from .stats import (
    PairingStats,
    TestForm,
    bootstrap_var_stderr,
    empirical_pairings,
    empirical_stats,
    expected_pairing_theory,
    gtilde,
    gtilde_integral,
    onb_mean_square_deviation,
    pair_current,
    preset_forms,
    summability_partial_sums,
    variance_paper_bound,
    variance_theory,
)
from .zeros import Rect, ZeroSet, locate_zeros, pushforward_zeros, winding_count
