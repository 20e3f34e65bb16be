"""Empirical intensity measures of i.i.d. point processes.

Estimation and validation tools for the intensity measure of independent
point patterns: empirical intensities and their uniform deviations over
VC function classes, half-space depth (exact in dimensions 1 and 2),
closed-form deviation and covering bounds, generational estimators on
branching random walks, and a seeded Monte Carlo harness.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundValue,
    CoverResult,
    DeviationBound,
    DeviationBoundParams,
    TailBound,
    VcBoundParams,
    chernoff_tail,
    deviation_bound,
    entropy_integral,
    greedy_cover,
    maximal_packing,
    sauer_bound,
    vc_constant,
    vc_covering_bound,
)
from .branching import (
    BrwTree,
    TreeCapError,
    dump_tree,
    grow_tree,
    harris,
    laplace_estimates,
    load_tree,
    lotka_nagaev,
    normalized_fluctuations,
    true_laplace,
    vertex_pattern,
)
from .depth import (
    DepthResult,
    batch_depth_queries,
    deepest_point,
    depth_1d,
    depth_2d_exact,
    depth_approx,
    depth_oracle,
    depth_sup_deviation,
    halfspace_mass,
)
from .functions import (
    Constant,
    EvalFunction,
    Exponential,
    FunctionClass,
    HalfLineIndicator,
    HalfSpaceIndicator,
    Tabulated,
    exponentials,
    finite_list,
    half_lines,
    half_spaces,
)
from .generators import (
    CountLaw,
    CountMoments,
    CoxMixture,
    DiagonalGaussian,
    DiscretePoints,
    DisplacementLaw,
    FixedCount,
    Pmf,
    RngStream,
    ShiftedPoisson,
    UniformBox,
    cox_pmf,
    count_moments,
    sample_count,
    sample_pattern,
    sample_sample,
)
from .measure import (
    EmpiricalReference,
    MixedBinomialReference,
    ReferenceMeasure,
    SupDeviation,
    covariance_hat,
    empirical_intensity,
    empirical_pseudo_distance,
    pattern_integral,
    reference_for,
    reference_mass,
    signed_halfline_sup,
    sup_deviation,
)
from .patterns import PointPattern, Sample, load_sample, save_sample
