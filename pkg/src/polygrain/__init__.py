"""Fitting polynomial minimisation diagrams to labelled pixel grain maps.

Power diagrams and anisotropic power diagrams are the degree-1 and degree-2
members of a family of diagrams whose per-grain cost is a polynomial of total
degree d in the pixel coordinates. Fitting maximises a concave softmax
log-likelihood of the observed labels over the polynomial coefficients.
"""

from .basis import (
    DesignBasis,
    DesignMatrix,
    GAUGE_FREE,
    GAUGE_LAST_ZERO,
    LEGENDRE,
    MONOMIAL,
    MultiIndexSet,
    ORDERING_CONVENTION,
    ParamMatrix,
    assemble_design_matrix,
    basis_change,
    basis_change_inverse,
    eval_design,
    feature_count,
    gram_condition,
    legendre_all,
    legendre_eval,
    zero_pad,
)
from .conversions import (
    APDRecovery,
    apd_to_theta,
    coeffs_to_basis,
    pd_to_theta,
    psd_repair,
    theta_to_apd,
    theta_to_pd,
)
from .errors import InputFormatError, NumericalError, ResourceError
from .geometry import (
    GrainMap,
    PhysicalAPD,
    PhysicalPD,
    PixelGrid,
    accuracy_and_error,
    argmin_labels,
    generate_apd,
    generate_pd,
    make_grid,
    sym2x2_eigvals,
)
from .heuristics import MomentSummary, heuristic_theta, moments
from .metrics import (
    BoundReport,
    CompressionEntry,
    SweepRow,
    bound_report,
    compression,
    compression_entry,
    degree_sweep,
    padded_objective,
)
from .objective import (
    SoftAssignment,
    cost_matrix,
    energy_eps,
    energy_zero,
    gradient,
    hard_assign,
    hessian_block,
    objective,
    soft_assign,
)
from .optimizer import FitConfig, FitReport, fit, init_zero, line_search

__version__ = "0.1.0"

__all__ = [
    "APDRecovery",
    "BoundReport",
    "CompressionEntry",
    "DesignBasis",
    "DesignMatrix",
    "FitConfig",
    "FitReport",
    "GAUGE_FREE",
    "GAUGE_LAST_ZERO",
    "GrainMap",
    "InputFormatError",
    "LEGENDRE",
    "MONOMIAL",
    "MomentSummary",
    "MultiIndexSet",
    "NumericalError",
    "ORDERING_CONVENTION",
    "ParamMatrix",
    "PhysicalAPD",
    "PhysicalPD",
    "PixelGrid",
    "ResourceError",
    "SoftAssignment",
    "SweepRow",
    "accuracy_and_error",
    "apd_to_theta",
    "argmin_labels",
    "assemble_design_matrix",
    "basis_change",
    "basis_change_inverse",
    "bound_report",
    "coeffs_to_basis",
    "compression",
    "compression_entry",
    "cost_matrix",
    "degree_sweep",
    "energy_eps",
    "energy_zero",
    "eval_design",
    "feature_count",
    "fit",
    "generate_apd",
    "generate_pd",
    "gradient",
    "gram_condition",
    "hard_assign",
    "heuristic_theta",
    "hessian_block",
    "init_zero",
    "legendre_all",
    "legendre_eval",
    "line_search",
    "make_grid",
    "moments",
    "objective",
    "padded_objective",
    "pd_to_theta",
    "psd_repair",
    "soft_assign",
    "sym2x2_eigvals",
    "theta_to_apd",
    "theta_to_pd",
    "zero_pad",
]
