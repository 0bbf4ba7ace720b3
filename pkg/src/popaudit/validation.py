"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class ConfigError(ValueError):
    """Raised when a user-supplied configuration value is invalid."""


def check_fraction(value, name: str, *, open_interval: bool = True) -> float:
    """Validate that ``value`` is a fraction, by default in the open (0, 1)."""
    value = float(value)
    if open_interval:
        if not 0.0 < value < 1.0:
            raise ConfigError(f"{name} must be in (0, 1), got {value}")
    elif not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got {value}")
    return value


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_ratings_matrix(X) -> sp.csr_matrix:
    """Coerce ``X`` to CSR and check it is a finite 2-D ratings matrix."""
    if not sp.issparse(X):
        X = sp.csr_matrix(np.asarray(X, dtype=np.float64))
    X = X.tocsr().astype(np.float64)
    if X.ndim != 2:
        raise ValueError("ratings matrix must be 2-D (users x items)")
    if X.nnz and not np.all(np.isfinite(X.data)):
        raise ValueError("ratings matrix contains non-finite values")
    return X


def check_distribution(p, name: str = "p", *, atol: float = 1e-6) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within ``atol``."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector")
    if np.any(p < -atol):
        raise ValueError(f"{name} has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"{name} must sum to 1 (+/- {atol}), got {total}")
    return np.clip(p, 0.0, None)


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
