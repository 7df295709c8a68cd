"""Input validation and seeding helpers shared across modules."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import InsufficientSampleError, ShapeError


def check_data_matrix(X, min_samples=2, min_features=2, name="data"):
    """Return ``X`` as a finite float64 C-contiguous 2-d array.

    Raises ``ShapeError`` for wrong dimensionality or too few columns and
    ``InsufficientSampleError`` for too few rows.
    """
    X = np.asarray(X, dtype=float) if not hasattr(X, "dtype") else X
    if getattr(X, "ndim", 2) != 2:
        raise ShapeError(f"{name} must be a 2-d array, got shape {np.shape(X)}")
    if X.shape[0] < min_samples:
        raise InsufficientSampleError(
            f"{name} needs at least {min_samples} rows, got {X.shape[0]}")
    if X.shape[1] < min_features:
        raise ShapeError(f"{name} needs at least {min_features} columns, got {X.shape[1]}")
    return check_array(X, dtype=np.float64, order="C", ensure_min_samples=min_samples,
                       ensure_min_features=min_features, input_name=name)


def as_seed_sequence(seed):
    """Coerce an int, ``SeedSequence`` or None into a ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def make_rng(seed):
    """Counter-based generator (Philox) so spawned streams never overlap."""
    return np.random.Generator(np.random.Philox(as_seed_sequence(seed)))
