"""Bounded representations of semigroups on the carriers in :mod:`ergonet.spaces`.

Representations follow the contravariant convention ``S_g S_h = S_{hg}``.
All shipped carriers are abelian or small finite groups, where the two
conventions agree; the finite-group multiplication table is built so that the
convention holds verbatim.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from ._validation import (
    ContractViolation, DomainError, NumericalOverflowError, check_generators,
    check_nonneg_int, check_operator, check_unimodular, check_vector)
from .spaces import NormContext, SampledFunction, SampleGrid

COMMUTE_TOL = 1e-10
UNITARY_TOL = 1e-10


def operator_norm(S, ctx=None):
    """Induced operator norm for p in {1, 2, inf}."""
    S = check_operator(S)
    p = (ctx or NormContext()).p
    return float(np.linalg.norm(S, ord=p))


def matrix_power(S, n):
    """``S**n`` by binary decomposition of ``n`` (O(log n) products).

    ``S`` may carry leading batch dimensions.
    """
    n = check_nonneg_int(n, "n")
    S = np.asarray(S, dtype=complex)
    result = np.broadcast_to(np.eye(S.shape[-1], dtype=complex), S.shape).copy()
    base = S
    while n:
        if n & 1:
            result = result @ base
        n >>= 1
        if n:
            base = base @ base
    return result


def power_apply(S, n, x):
    """``S**n x`` via :func:`matrix_power`."""
    S = check_operator(S)
    x = check_vector(x, S.shape[0])
    if n == 0:
        return x.copy()
    return matrix_power(S, n) @ x


def matrix_exponential(A, t=1.0):
    """``exp(tA)`` by scaling and squaring with a Pade approximant (scipy)."""
    A = check_operator(A, "A")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = expm(t * A)
        except FloatingPointError as exc:
            raise NumericalOverflowError(f"exp(tA) overflowed for t*||A|| = {t * np.abs(A).sum():.3g}") from exc
    if not np.all(np.isfinite(E)):
        raise NumericalOverflowError("exp(tA) is not finite")
    return E


def matrix_exponential_apply(A, t, x):
    """``exp(tA) x`` for ``t >= 0``."""
    E = matrix_exponential(A, t)
    return E @ check_vector(x, E.shape[0])


# --------------------------------------------------------------------------- dynamics


@dataclass(frozen=True, eq=False)
class DynamicsMap:
    """A continuous self-map of a compact model space.

    Rules: ``rotation`` (circle), ``square`` (interval), ``skew`` (torus),
    ``table`` (finite set ``{0..n-1}``).
    """

    rule: str
    alpha: float = 0.0
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.rule not in ("rotation", "square", "skew", "table"):
            raise ContractViolation(f"unknown dynamics rule {self.rule!r}")
        if self.rule == "table":
            if not self.table:
                raise ContractViolation("a finite map needs a non-empty table")
            n = len(self.table)
            if any((not 0 <= v < n) for v in self.table):
                raise ContractViolation("finite map table entries must lie in {0..n-1}")

    @classmethod
    def rotation(cls, alpha):
        return cls("rotation", float(alpha))

    @classmethod
    def square(cls):
        return cls("square")

    @classmethod
    def skew(cls, alpha):
        return cls("skew", float(alpha))

    @classmethod
    def finite(cls, table):
        return cls("table", table=tuple(int(v) for v in table))

    @property
    def model(self):
        return {"rotation": "circle", "square": "interval", "skew": "torus", "table": "finite"}[self.rule]

    def __call__(self, points):
        p = np.asarray(points)
        if self.rule == "rotation":
            return np.mod(p + self.alpha, 1.0)
        if self.rule == "square":
            return p * p
        if self.rule == "skew":
            x, y = p[..., 0], p[..., 1]
            return np.stack([np.mod(x + self.alpha, 1.0), np.mod(y + x, 1.0)], axis=-1)
        return np.asarray(self.table)[p]

    def iterate(self, points, n):
        p = np.asarray(points)
        for _ in range(n):
            p = self(p)
        return p

    def grid_permutation(self, grid):
        """Index map ``i -> j`` with ``phi(points[i]) == points[j]``, or None
        when the grid is not invariant."""
        if grid.model != self.model:
            raise ContractViolation(f"{self.rule} acts on {self.model}, grid is {grid.model}")
        if self.rule == "table":
            if len(self.table) != len(grid):
                raise ContractViolation("finite map and grid have different sizes")
            return np.asarray(self.table)
        img = self(grid.points)
        if grid.model == "circle":
            m = grid.resolution[0]
            j = np.rint(img * m).astype(np.int64) % m
            ok = np.abs(_wrap(img - j / m)) < 1e-12
            return j if ok.all() else None
        if grid.model == "torus":
            m1, m2 = grid.resolution
            jx = np.rint(img[:, 0] * m1).astype(np.int64) % m1
            jy = np.rint(img[:, 1] * m2).astype(np.int64) % m2
            ok = (np.abs(_wrap(img[:, 0] - jx / m1)) < 1e-12) & (np.abs(_wrap(img[:, 1] - jy / m2)) < 1e-12)
            return jx * m2 + jy if ok.all() else None
        pos = np.searchsorted(grid.points, img)
        pos = np.clip(pos, 0, len(grid) - 1)
        return pos if np.all(grid.points[pos] == img) else None


def _wrap(d):
    return d - np.rint(d)


@dataclass(frozen=True, eq=False)
class KoopmanOperator:
    """Composition operator ``f -> f o phi``, optionally twisted by a unitary cocycle.

    ``cocycle`` maps an array of points to unitary matrices, shape (n, d, d),
    or unimodular scalars, shape (n,). The twisted operator acts as
    ``((gamma S) f)(p) = gamma(p) f(phi(p))``.
    """

    dynamics: DynamicsMap
    cocycle: Optional[Callable] = field(default=None, repr=False)

    def _gamma(self, points):
        G = np.asarray(self.cocycle(points), dtype=complex)
        if G.ndim == 1:
            if np.max(np.abs(np.abs(G) - 1.0), initial=0.0) > UNITARY_TOL:
                raise ContractViolation("scalar cocycle values must be unimodular")
            return G
        eye = np.eye(G.shape[-1])
        err = np.abs(np.conj(np.swapaxes(G, -1, -2)) @ G - eye).max(initial=0.0)
        if err > UNITARY_TOL:
            raise ContractViolation(f"cocycle is not unitary (deviation {err:.2e})")
        return G

    def orbit(self, f, count, start=0):
        """Yield the value arrays of ``(gamma S)^n f`` for ``n = start .. start+count-1``."""
        if not isinstance(f, SampledFunction):
            raise ContractViolation("Koopman operators act on SampledFunction values")
        if f.formula is not None:
            return self._orbit(np.array(f.grid.points), f.formula, self.dynamics,
                               lambda p: p, count, start)
        grid = f.grid
        perm = self.dynamics.grid_permutation(grid)
        if perm is None:
            raise ContractViolation("the dynamics leaves the grid; supply the function in closed form")
        return self._orbit(np.arange(len(grid)), lambda idx: f.values[idx],
                           lambda idx: perm[idx], lambda idx: grid.points[idx], count, start)

    def orbit_at(self, points, formula, count, start=0):
        """Like :meth:`orbit` but for a closed-form ``formula`` at arbitrary points."""
        return self._orbit(np.asarray(points), formula, self.dynamics, lambda p: p, count, start)

    def _orbit(self, pts, evaluate, advance, where, count, start):
        acc = None
        for j in range(start + count):
            if j >= start:
                vals = np.asarray(evaluate(pts), dtype=complex)
                yield vals if acc is None else _act(acc, vals)
            if j == start + count - 1:
                break
            if self.cocycle is not None:
                G = self._gamma(where(pts))
                acc = G if acc is None else _compose(acc, G)
            pts = advance(pts)

    def apply(self, f, n=1):
        n = check_nonneg_int(n, "n")
        vals = next(self.orbit(f, 1, start=n))
        formula = None
        if f.formula is not None:
            g = f.formula
            formula = lambda p: next(self.orbit_at(p, g, 1, n))  # noqa: E731
        return SampledFunction(f.grid, vals, formula)


def _act(acc, vals):
    if acc.ndim == 1:
        return acc * vals if vals.ndim == 1 else acc[:, None] * vals
    if vals.ndim == 1:
        raise ContractViolation("matrix cocycles need vector-valued functions")
    return np.einsum("nij,nj->ni", acc, vals)


def _compose(acc, G):
    if acc.ndim == 1 and G.ndim == 1:
        return acc * G
    if acc.ndim == 1:
        return acc[:, None, None] * G
    if G.ndim == 1:
        return acc * G[:, None, None]
    return acc @ G


# --------------------------------------------------------------------------- Folner sets


@dataclass(frozen=True)
class IntervalSet:
    """``{start, ..., start + length - 1}`` in (N, +)."""

    start: int
    length: int

    def __post_init__(self):
        check_nonneg_int(self.start, "start")
        if check_nonneg_int(self.length, "length") == 0:
            raise ContractViolation("Folner sets must be non-empty")

    @property
    def size(self):
        return self.length

    def elements(self):
        return range(self.start, self.start + self.length)

    def symmetric_difference_size(self, h):
        return 2 * min(int(h), self.length)


@dataclass(frozen=True)
class BoxSet:
    """Product of intervals in (N^k, +)."""

    corner: tuple
    lengths: tuple

    def __post_init__(self):
        if len(self.corner) != len(self.lengths) or not self.lengths:
            raise ContractViolation("box corner and lengths must have the same positive length")
        if any(int(v) <= 0 for v in self.lengths):
            raise ContractViolation("Folner sets must be non-empty")

    @property
    def size(self):
        return int(np.prod(self.lengths))

    def elements(self):
        grids = np.meshgrid(*[np.arange(c, c + n) for c, n in zip(self.corner, self.lengths)], indexing="ij")
        return [tuple(int(v) for v in t) for t in np.stack([g.ravel() for g in grids], axis=1)]

    def symmetric_difference_size(self, h):
        overlap = np.prod([max(0, n - int(s)) for n, s in zip(self.lengths, h)])
        return int(2 * (self.size - overlap))


@dataclass(frozen=True, eq=False)
class GroupSet:
    """A subset of a finite group, given by element indices."""

    members: frozenset
    table: np.ndarray

    def __post_init__(self):
        if not self.members:
            raise ContractViolation("Folner sets must be non-empty")

    @property
    def size(self):
        return len(self.members)

    def elements(self):
        return sorted(self.members)

    def translate(self, h):
        return frozenset(int(self.table[h, g]) for g in self.members)

    def symmetric_difference_size(self, h):
        return len(self.members ^ self.translate(h))


@dataclass(frozen=True)
class ContinuousInterval:
    """``[start, start + length]`` in (R+, +) with Lebesgue measure."""

    start: float
    length: float

    def __post_init__(self):
        if self.start < 0 or not self.length > 0:
            raise ContractViolation("need start >= 0 and length > 0")

    @property
    def size(self):
        return self.length

    def symmetric_difference_size(self, h):
        return 2 * min(float(h), self.length)


@dataclass(frozen=True)
class FolnerSequence:
    sets: tuple

    def __post_init__(self):
        if not self.sets:
            raise ContractViolation("a Folner sequence needs at least one set")
        if all(isinstance(s, IntervalSet) for s in self.sets):
            lengths = [s.length for s in self.sets]
            if any(b <= a for a, b in zip(lengths, lengths[1:])):
                raise ContractViolation("interval lengths must strictly increase")

    @classmethod
    def intervals(cls, lengths, start=0):
        return cls(tuple(IntervalSet(start, int(n)) for n in lengths))

    @classmethod
    def boxes(cls, lengths, k):
        return cls(tuple(BoxSet((0,) * k, (int(n),) * k) for n in lengths))

    @classmethod
    def whole_group(cls, rep):
        return cls((GroupSet(frozenset(range(len(rep.operators))), rep.table),))

    def __getitem__(self, alpha):
        if not 0 <= alpha < len(self.sets):
            raise ContractViolation(f"Folner index {alpha} outside 0..{len(self.sets) - 1}")
        return self.sets[alpha]

    def __len__(self):
        return len(self.sets)


# --------------------------------------------------------------------------- representations

_KINDS = ("powers", "abelian", "one_parameter", "finite_group")


@dataclass(frozen=True, eq=False)
class SemigroupRep:
    """A bounded representation ``g -> S_g``.

    kind
        ``powers`` of one operator over (N, +); ``abelian`` over N^k with k
        commuting generators; ``one_parameter`` over (R+, +) with
        ``S(t) = exp(tA)``; ``finite_group`` given by its element matrices.
    operators
        Tuple of dense matrices or :class:`KoopmanOperator` (powers only).
        For ``one_parameter`` it holds the generator ``A``.
    character
        Optional modulation: a unimodular scalar (powers), a tuple of them
        (abelian), a real frequency r meaning ``exp(2 pi i r t)``
        (one_parameter), or an array of unimodular values per element
        (finite_group).
    bound
        Stored certificate ``M >= sup ||S_g||`` over sampled g.
    """

    kind: str
    operators: tuple
    bound: float
    character: object = None
    table: Optional[np.ndarray] = field(default=None, repr=False)
    t_range: tuple = (0.0, 10.0)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ContractViolation(f"unknown representation kind {self.kind!r}")
        if not np.isfinite(self.bound) or self.bound <= 0:
            raise ContractViolation("the bound M must be finite and positive")

    # constructors -----------------------------------------------------------
    @classmethod
    def powers(cls, S, bound=None, character=None, ctx=None):
        if isinstance(S, KoopmanOperator):
            return cls("powers", (S,), 1.0 if bound is None else bound, character)
        S = check_operator(S)
        if bound is None:
            bound = _sampled_power_bound(S, ctx)
        return cls("powers", (S,), float(bound), character)

    @classmethod
    def abelian(cls, generators, bound=None, character=None, ctx=None):
        gens = check_generators(generators)
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                scale = max(1.0, np.linalg.norm(gens[i], 2) * np.linalg.norm(gens[j], 2))
                if np.abs(gens[i] @ gens[j] - gens[j] @ gens[i]).max() > COMMUTE_TOL * scale:
                    raise ContractViolation(f"generators {i} and {j} do not commute")
        if bound is None:
            bound = float(np.prod([_sampled_power_bound(g, ctx) for g in gens]))
        return cls("abelian", tuple(gens), float(bound), character)

    @classmethod
    def one_parameter(cls, A, t_range=(0.0, 10.0), bound=None, character=None, ctx=None):
        A = check_operator(A, "A")
        if bound is None:
            ts = np.linspace(t_range[0], t_range[1], 65)
            bound = max(operator_norm(matrix_exponential(A, t), ctx) for t in ts)
        return cls("one_parameter", (A,), float(bound), character, t_range=tuple(t_range))

    @classmethod
    def finite_group(cls, elements, character=None, ctx=None):
        mats = check_generators(elements)
        table = _group_table(mats)
        bound = max(operator_norm(m, ctx) for m in mats)
        return cls("finite_group", tuple(mats), float(bound), character, table=table)

    # helpers ----------------------------------------------------------------
    @property
    def is_dense(self):
        return not isinstance(self.operators[0], KoopmanOperator)

    @property
    def dim(self):
        if not self.is_dense:
            raise ContractViolation("Koopman representations have no coordinate dimension")
        return self.operators[0].shape[0]

    @property
    def n_generators(self):
        return len(self.operators) if self.kind == "abelian" else 1

    def modulated(self, character):
        """Same representation multiplied by an additional character."""
        if character is None:
            return self
        if self.kind == "powers":
            new = check_unimodular(character) * (1 if self.character is None else self.character)
        elif self.kind == "abelian":
            lam = np.asarray([check_unimodular(c) for c in np.ravel(character)])
            if lam.size != len(self.operators):
                raise ContractViolation("torus character needs one value per generator")
            new = tuple(lam * (1 if self.character is None else np.asarray(self.character)))
        elif self.kind == "one_parameter":
            new = float(character) + (0.0 if self.character is None else self.character)
        else:
            vals = np.asarray(character, dtype=complex)
            new = vals * (1 if self.character is None else self.character)
        return replace(self, character=new)

    def character_value(self, g):
        if self.character is None:
            return 1.0 + 0j
        if self.kind == "powers":
            return complex(self.character) ** int(g)
        if self.kind == "abelian":
            return complex(np.prod(np.asarray(self.character) ** np.asarray(g)))
        if self.kind == "one_parameter":
            return complex(np.exp(2j * np.pi * self.character * g))
        return complex(np.asarray(self.character)[g])

    def effective_generators(self):
        """Dense matrices with the character folded in (``lambda S`` etc.)."""
        if not self.is_dense:
            raise ContractViolation("Koopman representations are not dense")
        if self.kind == "powers":
            lam = 1 if self.character is None else self.character
            return (lam * self.operators[0],)
        if self.kind == "abelian":
            lam = np.ones(len(self.operators)) if self.character is None else self.character
            return tuple(c * S for c, S in zip(lam, self.operators))
        if self.kind == "one_parameter":
            r = 0.0 if self.character is None else self.character
            A = self.operators[0]
            return (A + 2j * np.pi * r * np.eye(A.shape[0]),)
        return tuple(self.character_value(g) * M for g, M in enumerate(self.operators))

    def generators(self):
        """Matrices whose joint fixed vectors are Fix(S).

        For one-parameter semigroups this is ``exp(A)``; fixed vectors of all
        ``S(t)`` are those of ``exp(tA)`` for small t, i.e. ker A, which
        :mod:`ergonet.mean_ergodic` handles through the generator directly.
        """
        return self.effective_generators()


def _sampled_power_bound(S, ctx=None):
    ns = sorted(set(range(65)) | {2 ** k for k in range(7, 13)})
    best, P, last = 1.0, np.eye(S.shape[0], dtype=complex), 0
    for n in ns:
        P = P @ matrix_power(S, n - last)
        last = n
        best = max(best, operator_norm(P, ctx))
    return best


def _group_table(mats, tol=1e-9):
    n = len(mats)
    flat = mats.reshape(n, -1)
    table = np.empty((n, n), dtype=np.int64)
    for h in range(n):
        for g in range(n):
            prod = (mats[g] @ mats[h]).ravel()
            dist = np.abs(flat - prod).max(axis=1)
            k = int(np.argmin(dist))
            if dist[k] > tol:
                raise ContractViolation("element matrices are not closed under multiplication")
            table[h, g] = k
    if np.unique(flat.round(9), axis=0).shape[0] != n:
        raise ContractViolation("finite group elements must be pairwise distinct matrices")
    return table


def apply(rep, g, x):
    """``S_g x`` for the representation ``rep``.

    ``g`` is an int (powers, finite group index), a tuple of ints (abelian)
    or a real time ``t >= 0`` (one-parameter).
    """
    if rep.kind == "powers":
        n = _check_element(g)
        chi = rep.character_value(n)
        op = rep.operators[0]
        if isinstance(op, KoopmanOperator):
            out = op.apply(x, n)
            return out if chi == 1 else out * chi
        return chi * power_apply(op, n, x)
    if rep.kind == "abelian":
        g = tuple(g) if np.ndim(g) else (g,)
        if len(g) != len(rep.operators):
            raise DomainError(f"element {g} has wrong rank for N^{len(rep.operators)}")
        v = check_vector(x, rep.dim)
        for S, n in zip(rep.operators, g):
            v = power_apply(S, _check_element(n), v)
        return rep.character_value(g) * v
    if rep.kind == "one_parameter":
        t = float(g)
        if t < 0:
            raise DomainError(f"negative time {t} is outside R+")
        return rep.character_value(t) * matrix_exponential_apply(rep.operators[0], t, x)
    if not (isinstance(g, (int, np.integer)) and 0 <= g < len(rep.operators)):
        raise DomainError(f"group element {g!r} is not an index 0..{len(rep.operators) - 1}")
    return rep.character_value(g) * (rep.operators[g] @ check_vector(x, rep.dim))


def _check_element(n):
    if isinstance(n, (bool, np.bool_)) or not isinstance(n, (int, np.integer)):
        raise DomainError(f"element {n!r} is not a natural number")
    if n < 0:
        raise DomainError(f"element {n} is negative")
    return int(n)


def compose_elements(rep, h, g):
    """The product ``h g`` in the carrier of ``rep``."""
    if rep.kind in ("powers", "one_parameter"):
        return h + g
    if rep.kind == "abelian":
        return tuple(a + b for a, b in zip(h, g))
    return int(rep.table[h, g])


def function_on(grid: SampleGrid, formula, lipschitz=None):
    """Shorthand for :meth:`SampledFunction.from_formula`."""
    return SampledFunction.from_formula(grid, formula, lipschitz)
