"""Uniform families of ergodic nets over a sampled compact index set.

A family attaches to every index ``i`` a modulated representation ``S_i``
(``lambda^n S^n``, ``chi(g) S_g``, ``exp(2 pi i r t) S(t)`` or a cocycle
twist) and shares one net scheme across all of them. The index set is
sampled on a finite :class:`IndexGrid`; suprema over the index set are
maxima over the samples, and every profile is recomputed on a refined grid
to flag sampling instability.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import ContractViolation
from .nets import (
    chain_factor, convex_chain, folner_average, interval_average_dense, power_sum, time_average)
from .operators import (
    BoxSet, FolnerSequence, KoopmanOperator, SemigroupRep, apply,
    matrix_power, operator_norm)
from .reports import ExperimentReport
from .spaces import norm

#: Indices evaluated together in one batched matrix computation.
CHUNK = 4096
STABILITY = 0.10
#: Relative rounding allowance when a defect attains its explicit bound exactly.
BOUND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class IndexGrid:
    """Samples of a compact index set.

    ``values`` holds unimodular numbers (circle), rows of them (torus),
    real frequencies (interval) or arbitrary objects (finite list).
    """

    model: str
    values: object
    params: tuple = ()
    factor: int = 2

    def __post_init__(self):
        if self.model not in ("circle", "torus", "interval", "finite"):
            raise ContractViolation(f"unknown index model {self.model!r}")
        if len(self.values) == 0:
            raise ContractViolation("index grids must be non-empty")
        if self.factor < 2:
            raise ContractViolation("refinement factor must be at least 2")

    @classmethod
    def circle(cls, m, factor=2):
        return cls("circle", np.exp(2j * np.pi * np.arange(m) / m), (int(m),), factor)

    @classmethod
    def torus(cls, m, k, factor=2):
        axes = np.meshgrid(*[np.arange(m)] * k, indexing="ij")
        pts = np.stack([a.ravel() for a in axes], axis=1)
        return cls("torus", np.exp(2j * np.pi * pts / m), (int(m), int(k)), factor)

    @classmethod
    def interval(cls, lo, hi, m, factor=2):
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ContractViolation("frequency set must be bounded; equicontinuity cannot be certified")
        if hi < lo:
            raise ContractViolation("interval needs lo <= hi")
        vals = np.array([float(lo)]) if hi == lo else np.linspace(lo, hi, m)
        return cls("interval", vals, (float(lo), float(hi), int(m)), factor)

    @classmethod
    def finite(cls, items):
        return cls("finite", list(items), (len(items),))

    def __len__(self):
        return len(self.values)

    def refine(self):
        f = self.factor
        if self.model == "circle":
            return IndexGrid.circle(self.params[0] * f, f)
        if self.model == "torus":
            return IndexGrid.torus(self.params[0] * f, self.params[1], f)
        if self.model == "interval":
            lo, hi, m = self.params
            return IndexGrid.interval(lo, hi, (m - 1) * f + 1, f)
        return self


_SCHEMES = {"a": "cesaro", "b": "abel", "c": "cesaro", "d": "time", "e": "chain", "f": "folner"}


@dataclass(frozen=True, eq=False)
class UniformFamily:
    """One of the six standard uniform families (kinds ``a`` to ``f``).

    ``alpha`` is interpreted per scheme: the length N (cesaro), the
    parameter r (abel), the averaging time s (time), the chain length
    (chain) or an index into ``folner`` (folner).
    """

    kind: str
    base: object
    grid: IndexGrid
    bound: float
    folner: Optional[FolnerSequence] = None
    tail_eps: float = 1e-13
    quad_tol: float = 1e-10

    @property
    def scheme(self):
        return _SCHEMES[self.kind]

    # members -----------------------------------------------------------------
    def member(self, value):
        """The representation ``S_i`` for one index value."""
        if self.kind == "c":
            return SemigroupRep.powers(KoopmanOperator(self.base.dynamics, value))
        if self.kind == "d":
            return self.base.modulated(float(value))
        return self.base.modulated(value)

    def members(self, grid=None):
        return [self.member(v) for v in (grid or self.grid).values]

    @property
    def dense(self):
        return self.kind != "c"

    def _batched_generators(self, grid):
        """``(m, d, d)`` stack of ``lambda_i S`` for kinds a and b."""
        S = self.base.effective_generators()[0]
        lam = np.asarray(grid.values, dtype=complex)
        return lam[:, None, None] * S[None]

    # evaluation --------------------------------------------------------------
    def evaluate(self, alpha, x, grid=None):
        """``A_alpha^{S_i} x`` for every sampled index, stacked along axis 0."""
        grid = grid or self.grid
        if self.kind in ("a", "b") and self.base.is_dense:
            x = np.asarray(x, dtype=complex)
            out = []
            for lo in range(0, len(grid), CHUNK):
                sub = IndexGrid(grid.model, grid.values[lo:lo + CHUNK], grid.params, grid.factor)
                T = self._batched_generators(sub)
                out.append(self._dense_scheme(T, alpha, x))
            return np.concatenate(out)
        vals = [self.net(self.member(v), alpha, x) for v in grid.values]
        return vals if not self.dense else np.stack(vals)

    def _dense_scheme(self, T, alpha, x):
        if self.scheme == "cesaro":
            return interval_average_dense(T, 0, _positive_int(alpha), x)
        r = _abel_r(alpha)
        n0 = self.abel_terms(r, x)
        return (1 - r) * power_sum(r * T, n0, x)

    def abel_terms(self, r, x):
        xn = float(np.max(norm(x)))
        if xn == 0:
            return 0
        return max(0, math.ceil(math.log(self.tail_eps / (self.bound * xn)) / math.log(r)))

    def net(self, rep, alpha, x):
        """The shared scheme at ``alpha`` applied with one member representation."""
        s = self.scheme
        if s == "cesaro":
            from .nets import cesaro
            return cesaro(rep, _positive_int(alpha), x)
        if s == "abel":
            from .nets import abel
            return abel(rep, _abel_r(alpha), self.tail_eps, x).value
        if s == "time":
            return time_average(rep, float(alpha), self.time_step(alpha), x, self.quad_tol).value
        if s == "chain":
            return convex_chain(rep, int(alpha), x).values[-1]
        return folner_average(rep, self.folner[int(alpha)], x)

    def time_step(self, s):
        """Quadrature step tied to the declared frequency bound of the index set."""
        rmax = float(np.max(np.abs(self.grid.values))) if self.grid.model == "interval" else 0.0
        A = self.base.operators[0]
        scale = 1.0 + 2 * np.pi * rmax + float(np.linalg.norm(A, 2))
        return min(float(s) / 4, 1.0 / (4 * scale))

    def uniform_bound_certificate(self, samples=(0, 1, 2, 3, 5, 8, 13, 21, 34, 55)):
        """Max of ``||S_{i,g}||`` over sampled indices and elements; must not exceed M."""
        if not self.dense:
            return 1.0
        best = 0.0
        for v in self.grid.values[: min(len(self.grid), 64)]:
            rep = self.member(v)
            for g in _sample_elements(rep, samples):
                best = max(best, _element_norm(rep, g))
        return best


def _sample_elements(rep, samples):
    if rep.kind == "powers":
        return list(samples)
    if rep.kind == "abelian":
        k = rep.n_generators
        return [tuple([n] * k) for n in samples] + [tuple(int(i == j) * n for i in range(k)) for j in range(k) for n in samples]
    if rep.kind == "one_parameter":
        return [0.1 * n for n in samples]
    return list(range(len(rep.operators)))


def _element_norm(rep, g):
    if rep.kind == "powers":
        return abs(rep.character_value(g)) * operator_norm(matrix_power(rep.operators[0], g))
    if rep.kind == "abelian":
        M = np.eye(rep.dim, dtype=complex)
        for S, n in zip(rep.operators, g):
            M = M @ matrix_power(S, n)
        return operator_norm(M)
    if rep.kind == "one_parameter":
        from .operators import matrix_exponential
        return operator_norm(matrix_exponential(rep.operators[0], g))
    return operator_norm(rep.operators[g])


def _positive_int(alpha):
    n = int(alpha)
    if n != alpha or n < 1:
        raise ContractViolation(f"Cesaro index must be a positive integer, got {alpha!r}")
    return n


def _abel_r(alpha):
    r = float(alpha)
    if not 0 < r < 1:
        raise ContractViolation(f"Abel index must lie in (0, 1), got {alpha!r}")
    return r


def build_family(kind, base, grid, folner=None, bound=None, **options):
    """Wire a base model and an index grid into a uniform family.

    kind ``a``/``b``: ``base`` is a powers representation of one operator,
    ``grid`` a circle of ``lambda`` values. ``c``: ``base`` is a
    KoopmanOperator (its cocycle is ignored) and ``grid`` a finite list of
    unitary cocycles. ``d``: a one-parameter representation with an
    interval of frequencies r, averaged over ``[0, s]``. ``e``: an abelian
    representation with a torus of characters, averaged along the convex
    chain. ``f``: Folner data ``folner`` plus a character grid matching the
    carrier (circle for powers, torus for abelian, finite list of character
    tables for finite groups).
    """
    kind = str(kind).lower()
    if kind not in _SCHEMES:
        raise ContractViolation(f"unknown family kind {kind!r}")
    need = {"a": ("powers", "circle"), "b": ("powers", "circle"), "d": ("one_parameter", "interval"),
            "e": ("abelian", "torus")}
    if kind in need:
        rk, gm = need[kind]
        if not isinstance(base, SemigroupRep) or base.kind != rk:
            raise ContractViolation(f"kind {kind} needs a {rk} representation")
        if grid.model != gm:
            raise ContractViolation(f"kind {kind} needs a {gm} index grid")
        if kind == "e" and grid.params[1] != base.n_generators:
            raise ContractViolation("character torus dimension must match the number of generators")
        if kind == "d" and not np.all(np.isfinite(grid.values)):
            raise ContractViolation("frequency set must be bounded")
    elif kind == "c":
        if not isinstance(base, KoopmanOperator):
            raise ContractViolation("kind c needs a Koopman operator")
        if grid.model != "finite":
            raise ContractViolation("kind c indexes a finite list of cocycles")
        bound = 1.0
    else:
        if folner is None:
            raise ContractViolation("kind f needs a Folner sequence")
        if not isinstance(base, SemigroupRep):
            raise ContractViolation("kind f needs a representation")
        expected = {"powers": "circle", "abelian": "torus", "finite_group": "finite"}.get(base.kind)
        if expected is None:
            raise ContractViolation("one-parameter Folner families are kind d")
        if grid.model != expected:
            raise ContractViolation(f"{base.kind} characters need a {expected} index grid")
    if bound is None:
        bound = base.bound
    return UniformFamily(kind, base, grid, float(bound), folner, **options)


# --------------------------------------------------------------------------- defects


@dataclass
class DefectResult:
    value: float
    bound: Optional[float] = None
    support: Optional[list] = None
    weights: Optional[np.ndarray] = None
    n_terms: Optional[int] = None

    @property
    def within_bound(self):
        return self.bound is None or self.value <= self.bound * (1 + BOUND_SLACK) + BOUND_SLACK


def _sup_norm(vals, ctx=None):
    if isinstance(vals, list):
        return max(float(np.max(norm(v))) for v in vals)
    v = np.asarray(vals)
    axes = 1 if v.ndim == 2 else (1,)
    return float(np.max(np.linalg.norm(v, axis=axes)))


def _probe_norm(x):
    return float(np.max(norm(x)))


def approximation_defect(family, alpha, eps, probes):
    """How far the shared-support convex combination is from ``A_alpha``.

    Convex schemes are finite convex combinations by construction, so the
    defect is 0 and the shared support with its weights is returned. For
    Abel means the truncation ``N`` is the first with ``r^N < eps/2``; the
    normalized partial sum is compared with the exact resolvent
    ``(1 - r)(I - r lambda S)^-1 x`` at every sampled index.
    """
    rec = convex_record(family, alpha)
    if rec is not None:
        support, weights = rec
        return DefectResult(0.0, 0.0, support, weights, len(support))
    if family.scheme != "abel":
        raise ContractViolation("approximation defects are defined for Cesaro, Abel, Folner and chain schemes")
    r = _abel_r(alpha)
    N = max(1, math.floor(math.log(eps / 2) / math.log(r)) + 1)
    while r ** N >= eps / 2:
        N += 1
    weights = (1 - r) * r ** np.arange(N) / (1 - r ** N)
    X = np.asarray(probes, dtype=complex)
    X = X.reshape(X.shape[0], -1)
    S = family.base.effective_generators()[0]
    d = S.shape[0]
    worst = 0.0
    for lam in np.asarray(family.grid.values, dtype=complex):
        T = lam * S
        exact = (1 - r) * np.linalg.solve(np.eye(d) - r * T, X)
        partial = (1 - r) / (1 - r ** N) * power_sum(r * T, N, X)
        worst = max(worst, float(np.max(np.linalg.norm(exact - partial, axis=0))))
    xn = float(np.max(np.linalg.norm(X, axis=0)))
    return DefectResult(worst, 2 * r ** N * family.bound * xn, list(range(N)), weights, N)


def invariance_bound(family, alpha, g, x):
    """The explicit bound on ``sup_i ||A_alpha x - A_alpha S_{i,g} x||`` for each kind."""
    M, xn = family.bound, _probe_norm(x)
    s = family.scheme
    if s == "cesaro":
        return 2 * int(g) * M * xn / _positive_int(alpha)
    if s == "abel":
        r = _abel_r(alpha)
        k = int(g)
        # truncated tails of both means add at most tail_eps each
        return 2 * (1 - r ** k) * M * xn + 2 * family.tail_eps * max(1.0, M)
    if s == "time":
        s_ = float(alpha)
        return 2 * min(float(g), s_) / s_ * M * xn + 2 * family.quad_tol
    if s == "chain":
        k = family.base.n_generators
        gen = [i for i, v in enumerate(g) if v][0]
        n = 1
        for j in range(int(alpha)):
            which, nj = chain_factor(j, k)
            if which == gen:
                n = max(n, nj)
        return 2 * M * M * xn / n
    F = family.folner[int(alpha)]
    h = g if not isinstance(F, BoxSet) else tuple(g)
    return F.symmetric_difference_size(h) / F.size * M * xn


def uniform_invariance_defect(family, g, x, alpha, grid=None):
    """``sup_i ||A_alpha x - A_alpha S_{i,g} x||`` with the matching explicit bound."""
    grid = grid or family.grid
    if family.kind in ("a", "b") and family.base.is_dense:
        k = int(g)
        if k < 0:
            raise ContractViolation("g must be a natural number")
        Sk_x = matrix_power(family.base.effective_generators()[0], k) @ np.asarray(x, complex)
        lam_k = np.asarray(grid.values, dtype=complex) ** k
        A_x = family.evaluate(alpha, x, grid)
        A_Sx = family.evaluate(alpha, Sk_x, grid)
        diff = A_x - lam_k.reshape((-1,) + (1,) * (A_x.ndim - 1)) * A_Sx
        value = _sup_norm(diff)
    else:
        worst = 0.0
        for v in grid.values:
            rep = family.member(v)
            ax = family.net(rep, alpha, x)
            ax_s = family.net(rep, alpha, apply(rep, g, x))
            worst = max(worst, float(np.max(norm(ax - ax_s))))
        value = worst
    return DefectResult(value, invariance_bound(family, alpha, g, x))


def lemma25_defect(family, alpha, beta, x, grid=None):
    """``sup_i ||A_alpha x - A_alpha A_beta x||`` over sampled indices."""
    grid = grid or family.grid
    if family.kind in ("a", "b") and family.base.is_dense:
        x = np.asarray(x, dtype=complex)
        A_x = family.evaluate(alpha, x, grid)
        B_x = family.evaluate(beta, x, grid)
        T = family._batched_generators(grid)
        # per-index A_alpha applied to per-index A_beta x
        AB = np.stack([family._dense_scheme(T[i:i + 1], alpha, B_x[i])[0] for i in range(len(grid))])
        return _sup_norm(A_x - AB)
    worst = 0.0
    for v in grid.values:
        rep = family.member(v)
        ax = family.net(rep, alpha, x)
        abx = family.net(rep, alpha, family.net(rep, beta, x))
        worst = max(worst, float(np.max(norm(ax - abx))))
    return worst


def convex_record(family, alpha):
    """Shared support and weights of ``A_alpha`` for convex schemes, else None."""
    if family.scheme == "cesaro":
        n = _positive_int(alpha)
        return list(range(n)), np.full(n, 1.0 / n)
    if family.scheme == "folner":
        els = list(family.folner[int(alpha)].elements())
        return els, np.full(len(els), 1.0 / len(els))
    if family.scheme == "chain":
        trace = convex_chain(family.member(family.grid.values[0]), int(alpha),
                             np.zeros(family.base.dim))
        w = trace.weights()
        keys = sorted(w)
        return keys, np.array([w[k] for k in keys])
    return None


def lemma25_bound(family, alpha, beta, x):
    """Invariance bounds propagated through the recorded convex weights of ``A_beta``.

    ``A_alpha (x - A_beta x) = sum_g w_g A_alpha (x - S_g x)``, so the defect
    is at most the weighted sum of per-element invariance bounds. Returns
    None for schemes without a finite weight record (Abel, time).
    """
    rec = convex_record(family, beta)
    if rec is None:
        return None
    total = 0.0
    for g, w in zip(*rec):
        if family.scheme != "chain":
            total += w * invariance_bound(family, alpha, g, x)
            continue
        # S^g is a product of generator powers; telescope one generator step at a time
        k = len(g)
        total += w * family.bound * sum(n * invariance_bound(family, alpha, _unit(k, i), x)
                                        for i, n in enumerate(g))
    return total


def _unit(k, i):
    return tuple(int(j == i) for j in range(k))


# --------------------------------------------------------------------------- profiles


def zero_targets(values, x):
    """``P_i x = 0`` at every index."""
    x = np.asarray(x, dtype=complex)
    return np.zeros((len(values),) + x.shape, dtype=complex)


def identity_at_one(values, x):
    """``P_lambda x = x`` at ``lambda = 1`` and 0 elsewhere (a constant base operator)."""
    x = np.asarray(x, dtype=complex)
    at_one = np.abs(np.asarray(values, dtype=complex) - 1) < 1e-12
    return at_one.reshape((-1,) + (1,) * x.ndim) * x[None]


def sup_target_defect(family, alpha, x, targets, grid=None):
    """``max_i ||A_alpha^{S_i} x - P_i x||``; ``targets(values, x)`` returns all ``P_i x``."""
    grid = grid or family.grid
    vals = family.evaluate(alpha, x, grid)
    want = targets(grid.values, x)
    if isinstance(vals, list):
        return max(float(np.max(norm(v - w))) for v, w in zip(vals, want))
    return _sup_norm(vals - want)


def uniform_convergence_profile(family, x, alphas, targets=zero_targets, name="uniform_profile",
                                mapper=map):
    """Table of ``alpha -> sup_i ||A_alpha x - P_i x||`` at two grid resolutions.

    A row is grid-stable when the coarse and refined sups differ by less
    than 10% of the larger one. ``metadata["grid_stable"]`` flags the
    profile; the decay verdict is only attached when every row is stable. ``mapper`` may be an executor's order-preserving ``map``.
    """
    fine_grid = family.grid.refine()
    report = ExperimentReport(name, ["alpha", "sup_defect", "sup_defect_refined", "stable"],
                              plot=("alpha", "sup_defect", "sup_defect_refined"))
    pairs = list(mapper(lambda a: (sup_target_defect(family, a, x, targets),
                                   sup_target_defect(family, a, x, targets, fine_grid)), alphas))
    sups = []
    for a, (coarse, fine) in zip(alphas, pairs):
        stable = abs(coarse - fine) <= STABILITY * max(coarse, fine, 1e-300) or max(coarse, fine) < 1e-12
        report.add_row(a, coarse, fine, bool(stable))
        sups.append(max(coarse, fine))
    report.metadata.update(kind=family.kind, grid_size=len(family.grid), refined_size=len(fine_grid))
    all_stable = all(r[3] for r in report.rows)
    # an unstable profile is flagged; callers withhold verdicts for it
    report.metadata["grid_stable"] = all_stable
    if all_stable:
        mono = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(sups, sups[1:]))
        report.metadata["monotone_decay"] = mono
    report.metadata["sups"] = sups
    return report
