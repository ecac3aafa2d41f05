"""Sparse signal recovery with smoothed lp-over-lq penalties.

Library layout:

* penalties: the lp-over-lq penalty (value, gradient, Lipschitz bound,
  trust-region majorant metric, zero-minimizer classification) and the
  baseline penalties used in comparisons.
* operators: the box-and-residual-ball constraint set and the
  variable-metric prox inner solver with its inexactness certificates.
* solvers: trust-region variable-metric forward-backward and the baseline
  solvers (fixed-metric, half-quadratic, primal-dual), plus the shared
  l1 warm start.
* msdata: synthetic isotopic-pattern dictionaries, ground truths,
  observations and their text serialization.
* metrics: SNR/sparsity/debiasing metrics and the per-run report record.
* experiments, plots, cli: benchmark orchestration, figure rendering and
  the command-line interface.
"""

from .penalties import (
    DEFAULT_SPOQ,
    MajorantMetric,
    PenaltySpec,
    SpoqParams,
    baseline_curvature,
    baseline_gradient,
    baseline_value,
    check_zero_minimizer,
    chi_curvature,
    exact_ratio,
    spoq_gradient,
    spoq_lipschitz,
    spoq_majorant_gap,
    spoq_majorant_metric,
    spoq_value,
)
from .operators import (
    InnerSolveResult,
    Problem,
    check_inner_conditions,
    kappa_bound,
    project_ball,
    project_box,
    prox_metric_phi,
)
from .solvers import (
    InitializationError,
    IterateTrace,
    SolverConfig,
    fb_solve,
    primal_dual_solve,
    radius_schedule,
    tr_vmfb_solve,
    vmfb_halfquadratic_solve,
    vmfb_solve,
    warm_start_l1,
)
from .msdata import (
    DictionarySpec,
    GroundTruth,
    Instance,
    build_dictionary,
    load_instance,
    make_instance,
    sample_ground_truth,
    save_instance,
    synthesize_observation,
)
from .metrics import (
    RunReport,
    debias_least_squares,
    snr,
    sparsity_degree,
    tsnr,
)

__version__ = "0.1.0"
