"""Lattice-based Latin hypercube designs, their space-filling criteria,
design search, regularly repeated designs and shared-factorization local
Gaussian-process emulation."""
from .design_core import (
    CriterionKind,
    Design,
    criterion_full,
    fill_distance_grid,
    validate_lhd,
    wrap_dist,
    wrap_dist_1d,
)
from .emulator import (
    GpHyperParams,
    LocalGpModel,
    corr_matrix,
    estimate_lengthscales,
    fit_shared_model,
    predict,
    predict_batch,
)
from .errors import CapabilityError, NumericalError, ValidationError
from .lattice_designs import (
    BivariateCache,
    LatticeSpec,
    ReducedBasis,
    coprime_residues,
    gaussian_reduce,
    lattice_criterion,
    lattice_points,
    slice_extract,
    wf2_fast,
    wf2_update,
    ws2_fast,
    ws2_update,
)
from .optimizers import (
    LlhdSearchConfig,
    SaConfig,
    SwapState,
    criterion_swap_delta,
    korobov_search,
    llhd_optimize,
    random_lhd,
    sa_optimize_lhd,
    sliced_objective,
)
from .rlhd import (
    PointIndex,
    RlhdSpec,
    expected_size,
    iter_rlhd_keys,
    local_window,
    nearest_window_corner,
    rlhd_points,
    rlhd_size,
    translate_member,
)

__version__ = "0.1.0"
