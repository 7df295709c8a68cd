"""Independent component analysis by minimizing mutual dependence measures."""

__version__ = "0.1.0"

from .estimator import MDMICA
from .exceptions import (
    DegenerateBandwidthError,
    IllConditionedGPError,
    InsufficientSampleError,
    InvalidAnglesError,
    InvalidIndexError,
    InvalidRotationError,
    MDMICAError,
    NonFiniteObjectiveError,
    ShapeError,
    SingularCovarianceError,
    SingularMatrixError,
)
from .measures import (
    MeasureKind,
    dcov_sq,
    dhsic,
    evaluate,
    mdm_asym,
    mdm_comp_star,
    mdm_sym,
)
from .metrics import MDReport, align_components, hungarian, md_index
from .optimizer import (
    ICAResult,
    OptimizerConfig,
    estimate_ica,
    ica_deflation,
    ica_parallel,
    local_minimize,
)
from .rotation import angles_from_rotation, rotation_from_angles
from .whitening import Whitener, whiten

__all__ = [
    "MDMICA", "MeasureKind", "OptimizerConfig", "ICAResult", "MDReport", "Whitener",
    "dcov_sq", "mdm_asym", "mdm_sym", "mdm_comp_star", "dhsic", "evaluate",
    "estimate_ica", "ica_parallel", "ica_deflation", "local_minimize",
    "md_index", "hungarian", "align_components",
    "rotation_from_angles", "angles_from_rotation", "whiten",
    "MDMICAError", "InvalidIndexError", "InvalidRotationError", "InvalidAnglesError",
    "ShapeError", "InsufficientSampleError", "SingularCovarianceError",
    "DegenerateBandwidthError", "NonFiniteObjectiveError", "IllConditionedGPError",
    "SingularMatrixError",
]
