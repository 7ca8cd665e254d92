"""scikit-learn style wrappers around the mean ergodic machinery.

Both estimators are fitted on operators, not on samples: ``fit`` takes a
square matrix or a stack of commuting matrices, and ``transform`` maps row
vectors ``X`` (shape ``(n_samples, d)``) through the fitted operator.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractViolation, check_generators
from .mean_ergodic import (
    ANGLE_TOL, RANK_TOL, dual_fix_space, fix_space, mean_ergodic_projection, range_space)
from .nets import Abel, Cesaro, net_apply
from .operators import SemigroupRep


def _rep_from(operators):
    gens = check_generators(operators)
    if len(gens) == 1:
        return SemigroupRep.powers(gens[0])
    return SemigroupRep.abelian(gens)


def _rows(X, d):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ContractViolation(f"expected rows of length {d}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ContractViolation("X has non-finite entries")
    return X


class MeanErgodicProjector(TransformerMixin, BaseEstimator):
    """Learn the projection onto the joint fixed space along the joint range.

    Parameters
    ----------
    tol : float
        Relative singular-value threshold for numerical rank.
    angle_tol : float
        Smallest principal angle accepted between fixed space and range.

    Attributes
    ----------
    projection_ : ndarray of shape (d, d)
    fix_basis_, dual_fix_basis_, range_basis_ : ndarray
        Orthonormal columns.
    n_features_in_ : int
    """

    def __init__(self, tol=RANK_TOL, angle_tol=ANGLE_TOL):
        self.tol = tol
        self.angle_tol = angle_tol

    def fit(self, X, y=None):
        rep = _rep_from(X)
        self.projection_ = mean_ergodic_projection(rep, self.tol, self.angle_tol)
        self.fix_basis_ = fix_space(rep, self.tol).vectors
        self.dual_fix_basis_ = dual_fix_space(rep, self.tol).vectors
        self.range_basis_ = range_space(rep, self.tol).vectors
        self.n_features_in_ = rep.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = _rows(X, self.n_features_in_)
        out = X @ self.projection_.T
        return out.real if np.isrealobj(X) and np.allclose(out.imag, 0, atol=1e-12) else out


class ErgodicAverager(TransformerMixin, BaseEstimator):
    """Apply a Cesaro or Abel mean of the fitted operator(s) to row vectors.

    Parameters
    ----------
    scheme : {"cesaro", "abel"}
    n_terms : int
        Cesaro length N (per generator for several commuting operators).
    r : float
        Abel parameter in (0, 1).
    tail_eps : float
        Abel truncation tolerance.
    """

    def __init__(self, scheme="cesaro", n_terms=1024, r=0.99, tail_eps=1e-12):
        self.scheme = scheme
        self.n_terms = n_terms
        self.r = r
        self.tail_eps = tail_eps

    def _scheme(self):
        if self.scheme == "cesaro":
            return Cesaro(self.n_terms)
        if self.scheme == "abel":
            return Abel(self.r, self.tail_eps)
        raise ContractViolation(f"scheme must be 'cesaro' or 'abel', got {self.scheme!r}")

    def fit(self, X, y=None):
        self._scheme()
        self.rep_ = _rep_from(X)
        self.n_features_in_ = self.rep_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "rep_")
        X = _rows(X, self.n_features_in_)
        out = net_apply(self._scheme(), self.rep_, X.T.astype(complex)).T
        return out.real if np.isrealobj(X) and np.allclose(out.imag, 0, atol=1e-12) else out
