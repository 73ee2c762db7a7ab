"""Hyperspectral unmixing under a perturbed linear mixing model.

Each pixel is modeled as y_n = (M + dM_n) a_n + noise with nonnegative
endmembers M, simplex-constrained abundances a_n, and a per-pixel additive
perturbation dM_n capturing endmember variability. The three blocks are
estimated jointly by coordinate descent, each block solved by a splitting
method with nonnegativity enforced through projections.

Figure rendering lives in :mod:`plmm.plots` and the command line front end in
:mod:`plmm.cli`; neither is imported here to keep library imports light.
"""
from .model import (
    PSI_KINDS,
    HsiMatrix,
    ObjectiveTerms,
    PenaltyConfig,
    PlmmState,
    constraint_report,
    objective,
    objective_terms,
    reconstruct,
)
from .penalties import (
    MutualDistOperator,
    SmoothnessOperator,
    build_smoothness_operator,
    mutual_dist_operator,
    phi_grad,
    phi_value,
    psi_dist_grad,
    psi_dist_value,
    psi_mutual_grad,
    psi_mutual_value,
    upsilon_grad,
    upsilon_value,
)
from .subspace import (
    DegenerateSubspaceError,
    InfeasibleBoundsError,
    PcaFrame,
    VolumeContext,
    cofactor_vector,
    fit_projection,
    g_constraint,
    positivity_bounds,
    volume,
    volume_psi,
    volume_psi_row_grad,
)
from .admm import (
    AdmmConfig,
    AdmmTrace,
    BcdConfig,
    BcdTrace,
    ResidualCheck,
    adjust_rho,
    admm_residuals,
    unmix,
    update_abundances,
    update_endmembers,
    update_variability,
)
from .initialization import (
    DM_INIT_DEFAULT,
    DegenerateDataError,
    InitSpec,
    estimate_snr,
    fcls,
    initialize,
    vca,
)
from .synthgen import (
    GroundTruth,
    SyntheticSpec,
    builtin_endmembers,
    generate,
    halves_cvar_map,
    piecewise_affine_factor,
)
from .metrics import (
    EvalReport,
    apply_permutation,
    asam,
    evaluate,
    gmse_a,
    gmse_dm,
    match_endmembers,
    re,
    spectral_angle,
    variability_energy,
)
from .fileio import (
    FormatError,
    RunConfig,
    flatten_dm,
    load_hsm,
    load_pgm16,
    load_run_config,
    save_hsm,
    save_pgm16,
    save_run_config,
    unflatten_dm,
)

__version__ = "0.1.0"
