"""Input validation helpers and the package's exception types."""
import numbers

import numpy as np


class ContractViolation(ValueError):
    """An argument breaks a documented precondition."""


class DomainError(ValueError):
    """A semigroup element lies outside the representation's carrier."""


class CertificationError(ValueError):
    """A requested certificate cannot be produced with the given parameters."""


class QuadratureError(RuntimeError):
    """Step halving did not reach the requested quadrature tolerance."""


class NumericalOverflowError(ArithmeticError):
    """A computation overflowed instead of producing a finite result."""


class NotMeanErgodicError(RuntimeError):
    """The direct-sum decomposition failed, so no mean ergodic projection exists."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InconsistentVerdictError(RuntimeError):
    """Equivalent conditions disagreed in exact (finite-dimensional) mode."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def check_operator(S, name="S"):
    """Return ``S`` as a finite square complex matrix."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
        raise ContractViolation(f"{name} must be a non-empty square matrix, got shape {S.shape}")
    S = S.astype(complex, copy=False)
    if not np.all(np.isfinite(S)):
        raise ContractViolation(f"{name} has non-finite entries")
    return S


def check_generators(generators):
    """Return a stack of generators with shape (k, d, d).

    Accepts a single square matrix or a sequence of equally sized ones.
    """
    arr = np.asarray(generators)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ContractViolation(f"expected a (k, d, d) generator stack, got shape {arr.shape}")
    return np.stack([check_operator(g, name=f"generator {i}") for i, g in enumerate(arr)])


def check_vector(x, dim=None, name="x"):
    """Return ``x`` as a complex vector (or column block) with leading dimension ``dim``."""
    x = np.asarray(x)
    if x.ndim not in (1, 2):
        raise ContractViolation(f"{name} must be a vector or a (d, m) column block")
    if dim is not None and x.shape[0] != dim:
        raise ContractViolation(f"{name} has leading dimension {x.shape[0]}, expected {dim}")
    x = x.astype(complex, copy=False)
    if not np.all(np.isfinite(x)):
        raise ContractViolation(f"{name} has non-finite entries")
    return x


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ContractViolation(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def check_nonneg_int(value, name):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral) or value < 0:
        raise ContractViolation(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_unimodular(value, name="character", atol=1e-10):
    value = complex(value)
    if abs(abs(value) - 1.0) > atol:
        raise ContractViolation(f"{name} must lie on the unit circle, |{name}| = {abs(value)}")
    return value
