"""Normed-space carriers: coordinate vectors, sampled functions, trig polynomials.

Three concrete spaces stand in for the abstract Banach space:

* ``C^d`` with the 1-, 2- or sup-norm (plain numpy vectors),
* continuous functions on a compact model space sampled on a :class:`SampleGrid`,
  normed by the maximum over grid points,
* trigonometric polynomials in coefficient form, whose sup-norm can be
  bracketed rigorously by :func:`certified_sup_norm`.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import CertificationError, ContractViolation

_MODELS = ("circle", "torus", "interval", "finite")


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Finite ordered sample of a compact model space.

    ``points`` has shape (n,) for one-dimensional models and (n, 2) for the
    torus. Finite sets use the integer labels ``0..n-1``.
    """

    model: str
    points: np.ndarray
    resolution: tuple

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ContractViolation(f"unknown model space {self.model!r}")
        pts = np.asarray(self.points)
        if pts.shape[0] == 0:
            raise ContractViolation("a sample grid needs at least one point")
        if self.model != "finite" and min(self.resolution) < 2:
            raise ContractViolation("continuum grids need resolution >= 2")
        flat = pts.reshape(pts.shape[0], -1)
        if np.unique(flat, axis=0).shape[0] != flat.shape[0]:
            raise ContractViolation("grid points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def circle(cls, m):
        return cls("circle", np.arange(m) / m, (int(m),))

    @classmethod
    def torus(cls, m1, m2=None):
        m2 = m1 if m2 is None else m2
        x, y = np.meshgrid(np.arange(m1) / m1, np.arange(m2) / m2, indexing="ij")
        return cls("torus", np.column_stack([x.ravel(), y.ravel()]), (int(m1), int(m2)))

    @classmethod
    def interval(cls, m, accumulate_at_one=0):
        """Equispaced points of [0, 1], optionally joined by ``1 - 2**-j`` for
        ``j = 1..accumulate_at_one`` so that a neighbourhood of 1 is resolved."""
        pts = np.linspace(0.0, 1.0, m)
        if accumulate_at_one:
            extra = 1.0 - 2.0 ** -np.arange(1, accumulate_at_one + 1)
            pts = np.union1d(pts, extra)
        return cls("interval", pts, (int(m),))

    @classmethod
    def finite(cls, n):
        return cls("finite", np.arange(n), (int(n),))

    def __len__(self):
        return self.points.shape[0]

    def refine(self, factor=2):
        """Grid of the same model with ``factor`` times the resolution."""
        if self.model == "circle":
            return SampleGrid.circle(self.resolution[0] * factor)
        if self.model == "torus":
            return SampleGrid.torus(self.resolution[0] * factor, self.resolution[1] * factor)
        if self.model == "interval":
            m = (self.resolution[0] - 1) * factor + 1
            extra = self.points[~np.isin(self.points, np.linspace(0, 1, self.resolution[0]))]
            return SampleGrid("interval", np.union1d(np.linspace(0, 1, m), extra), (m,))
        return self


@dataclass(frozen=True)
class NormContext:
    """Which norm to use: ``p`` in {1, 2, inf} on coordinates, or grid-sup."""

    p: float = 2
    grid: Optional[SampleGrid] = None
    dim: Optional[int] = None

    def __post_init__(self):
        if self.grid is None and self.p not in (1, 2, np.inf):
            raise ContractViolation(f"p must be 1, 2 or inf, got {self.p}")

    @classmethod
    def pnorm(cls, p, dim=None):
        return cls(p=p, dim=dim)

    @classmethod
    def grid_sup(cls, grid):
        return cls(p=np.inf, grid=grid)

    @property
    def is_grid(self):
        return self.grid is not None


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Samples of a (possibly vector-valued) continuous function on a grid.

    ``formula`` is an optional closed-form evaluator ``points -> values``;
    Koopman operators use it when the dynamics leaves the grid.
    """

    grid: SampleGrid
    values: np.ndarray
    formula: Optional[Callable] = field(default=None, repr=False)
    lipschitz: Optional[float] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape[0] != len(self.grid):
            raise ContractViolation(
                f"{vals.shape[0]} values for a grid of {len(self.grid)} points")
        if vals.ndim not in (1, 2):
            raise ContractViolation("values must be scalars or d-tuples per point")
        if self.lipschitz is not None and self.lipschitz < 0:
            raise ContractViolation("lipschitz constant must be non-negative")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_formula(cls, grid, formula, lipschitz=None):
        return cls(grid, formula(grid.points), formula, lipschitz)

    @property
    def value_dim(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def with_values(self, values, formula=None):
        return SampledFunction(self.grid, values, formula, None)

    def __add__(self, other):
        return self.with_values(self.values + _values_of(other))

    def __sub__(self, other):
        return self.with_values(self.values - _values_of(other))

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_values(self.values / scalar)


def _values_of(v):
    return v.values if isinstance(v, SampledFunction) else v


def pointwise_magnitude(f):
    """Modulus of a scalar function, Euclidean length of an H-valued one."""
    vals = f.values
    return np.abs(vals) if vals.ndim == 1 else np.linalg.norm(vals, axis=1)


def norm(v, ctx=None):
    """Norm of a coordinate vector or sampled function.

    Without a context, arrays use the 2-norm and sampled functions the grid
    sup-norm. Column blocks of shape (d, m) are normed column by column.
    """
    if isinstance(v, SampledFunction):
        if ctx is not None and ctx.is_grid and len(ctx.grid) != len(v.grid):
            raise ContractViolation("sampled function lives on a different grid")
        if ctx is not None and not ctx.is_grid:
            raise ContractViolation("sampled functions need a grid-sup context")
        return float(pointwise_magnitude(v).max())
    v = np.asarray(v)
    ctx = ctx or NormContext()
    if ctx.is_grid:
        if v.shape[0] != len(ctx.grid):
            raise ContractViolation("array length does not match the grid")
        mags = np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=1)
        return float(mags.max())
    if ctx.dim is not None and v.shape[0] != ctx.dim:
        raise ContractViolation(f"vector of dimension {v.shape[0]}, context expects {ctx.dim}")
    if v.ndim == 2:
        return np.linalg.norm(v, ord=ctx.p, axis=0)
    return float(np.linalg.norm(v, ord=ctx.p))


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """Trigonometric polynomial sum_k c_k exp(2 pi i <k, x>) on the torus T^n.

    ``coef`` is an n-dimensional array; entry ``idx`` multiplies the frequency
    ``kmin + idx``. One-dimensional polynomials use ``kmin`` as an int.
    """

    coef: np.ndarray
    kmin: object = 0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coef, dtype=complex))
        object.__setattr__(self, "coef", c)
        kmin = np.broadcast_to(np.asarray(self.kmin, dtype=np.int64), (c.ndim,)).copy()
        object.__setattr__(self, "kmin", kmin)

    @property
    def half_span(self):
        """Half width of the frequency window along each axis.

        ``|p|`` is unchanged by multiplying with a character, so Bernstein's
        inequality applies with this (possibly half-integer) degree.
        """
        return tuple((s - 1) / 2 for s in self.coef.shape)

    def __call__(self, x):
        """Evaluate a one-dimensional polynomial at points ``x``."""
        if self.coef.ndim != 1:
            raise ContractViolation("pointwise evaluation is only provided in one variable")
        k = self.kmin[0] + np.arange(self.coef.size)
        x = np.asarray(x, dtype=float)
        return np.exp(2j * np.pi * np.multiply.outer(x, k)) @ self.coef

    def samples(self, n_samples):
        """Moduli at the equispaced grid ``j / M`` along every axis."""
        shape = tuple(np.broadcast_to(np.asarray(n_samples), (self.coef.ndim,)))
        for s, m in zip(self.coef.shape, shape):
            if m < s:
                raise ContractViolation("sampling below the frequency window would alias")
        vals = np.fft.ifftn(self.coef, s=shape, axes=tuple(range(self.coef.ndim))) * np.prod(shape)
        return np.abs(vals)


def certified_sup_norm(poly, degree=None, n_samples=None):
    """Bracket the sup-norm of a trigonometric polynomial.

    With ``M`` equispaced samples per axis every point is within ``1/(2M)`` of
    a sample along each axis. Bernstein's inequality ``|p'| <= 2 pi D ||p||``
    then bounds the loss per axis by ``pi D / M``, so

        lower = max |samples| >= ||p|| (1 - sum_i pi D_i / M_i).

    Parameters
    ----------
    poly : TrigPolynomial
    degree : float or tuple, optional
        Declared degree per axis; must cover the polynomial's half span.
        Defaults to the half span.
    n_samples : int or tuple
        Samples per axis. Must satisfy ``sum pi D_i / M_i < 1``.

    Returns
    -------
    (lower, upper) : tuple of float
    """
    nd = poly.coef.ndim
    span = np.asarray(poly.half_span, dtype=float)
    deg = span if degree is None else np.broadcast_to(np.asarray(degree, dtype=float), (nd,))
    if np.any(deg < span - 1e-12):
        raise ContractViolation(f"declared degree {tuple(deg)} below half span {tuple(span)}")
    if n_samples is None:
        raise ContractViolation("n_samples is required")
    m = np.broadcast_to(np.asarray(n_samples, dtype=float), (nd,))
    loss = float(np.sum(np.pi * deg / m))
    if loss >= 1.0:
        raise CertificationError(
            f"need sum(pi*D/M) < 1 for a certificate, got {loss:.4f}")
    lower = float(poly.samples(tuple(int(v) for v in m)).max())
    return lower, lower / (1.0 - loss)


def samples_for_certificate(degree, oversample=16.0):
    """Smallest power of two with at least ``oversample * degree`` samples (and > pi*degree)."""
    need = max(oversample * degree, np.pi * degree + 1, 1.0)
    return 1 << int(np.ceil(np.log2(need)))
