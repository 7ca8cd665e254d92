"""Ergodic nets: Cesaro, Abel, continuous time averages, convex chains, Folner averages.

Every net is built as an explicit finite convex combination of representation
operators (or a quadrature of one), so the convex weights are known by
construction. Summation order inside one evaluation is fixed, which makes the
results independent of how callers schedule work.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import (
    ContractViolation, QuadratureError, check_nonneg_int, check_positive, check_vector)
from .operators import (
    BoxSet, ContinuousInterval, FolnerSequence, GroupSet, IntervalSet, SemigroupRep, apply,
    matrix_exponential, matrix_power)
from .spaces import SampledFunction, norm

#: Above this many terms dense power sums switch to binary splitting.
DIRECT_LIMIT = 2 ** 10
_BLOCK = 256


# --------------------------------------------------------------------------- summation kernels


def pairwise_sum(arr):
    """Sum along axis 0 by recursive halving (fixed order, O(log n) error growth)."""
    n = arr.shape[0]
    if n <= 8:
        out = arr[0].copy()
        for k in range(1, n):
            out += arr[k]
        return out
    half = n // 2
    return pairwise_sum(arr[:half]) + pairwise_sum(arr[half:])


def power_sum(T, N, x):
    """``sum_{n<N} T^n x`` for dense ``T`` with optional batch dimensions.

    ``x`` is a vector (d,) or a column block (d, m); the result has shape
    ``T.shape[:-2] + x.shape``. Up to :data:`DIRECT_LIMIT` terms the orbit is
    summed pairwise; beyond it ``Q_N = sum_{n<N} T^n`` is built by binary
    splitting, ``Q_{2m} = Q_m + T^m Q_m`` and ``Q_{m+1} = Q_m + T^m``.
    """
    N = check_nonneg_int(N, "N")
    T = np.asarray(T, dtype=complex)
    d = T.shape[-1]
    X = np.asarray(x, dtype=complex).reshape(d, -1)
    batch = T.shape[:-2]
    out_shape = batch + np.shape(x)
    if N == 0:
        return np.zeros(out_shape, dtype=complex)
    if N <= DIRECT_LIMIT:
        v = np.broadcast_to(X, batch + X.shape).copy()
        orbit = np.empty((N,) + v.shape, dtype=complex)
        orbit[0] = v
        for n in range(1, N):
            v = T @ v
            orbit[n] = v
        return pairwise_sum(orbit).reshape(out_shape)
    eye = np.broadcast_to(np.eye(d, dtype=complex), T.shape)
    P = eye.copy()
    Q = np.zeros_like(P)
    for bit in bin(N)[2:]:
        Q = Q + P @ Q
        P = P @ P
        if bit == "1":
            Q = Q + P
            P = P @ T
    return (Q @ X).reshape(out_shape)


def interval_average_dense(T, start, length, x):
    """``(1/L) sum_{n=a}^{a+L-1} T^n x`` for dense (possibly batched) ``T``."""
    total = power_sum(T, length, x)
    if start:
        d = T.shape[-1]
        shifted = matrix_power(T, start) @ total.reshape(T.shape[:-2] + (d, -1))
        total = shifted.reshape(total.shape)
    return total / length


def _weighted_orbit_sum(orbit, start, weights, character):
    """``sum_k weights[k] chi^(start+k) v_k`` over an orbit iterator, blockwise pairwise."""
    acc = None
    block = []
    lam = complex(character)
    for k, vals in enumerate(orbit):
        w = weights[k] * (lam ** (start + k) if lam != 1 else 1.0)
        block.append(w * vals)
        if len(block) == _BLOCK:
            part = pairwise_sum(np.asarray(block))
            acc = part if acc is None else acc + part
            block = []
    if block:
        part = pairwise_sum(np.asarray(block))
        acc = part if acc is None else acc + part
    return acc


def _koopman_average(rep, f, start, count, weights):
    op = rep.operators[0]
    lam = 1.0 if rep.character is None else rep.character
    vals = _weighted_orbit_sum(op.orbit(f, count, start), start, weights, lam)
    formula = None
    if f.formula is not None:
        g = f.formula
        formula = lambda p: _weighted_orbit_sum(op.orbit_at(p, g, count, start), start, weights, lam)  # noqa: E731
    return SampledFunction(f.grid, vals, formula)


def _require_powers(rep, what):
    if rep.kind != "powers":
        raise ContractViolation(f"{what} needs a powers-of-one-operator representation, got {rep.kind}")


def _interval_average(rep, start, length, x):
    if rep.is_dense:
        (T,) = rep.effective_generators()
        return interval_average_dense(T, start, length, check_vector(x, T.shape[0]))
    return _koopman_average(rep, x, start, length, np.full(length, 1.0 / length))


# --------------------------------------------------------------------------- the nets


def cesaro(rep, N, x):
    """Cesaro mean ``(1/N) sum_{n<N} S^n x`` (character included when modulated)."""
    _require_powers(rep, "cesaro")
    if check_nonneg_int(N, "N") < 1:
        raise ContractViolation("N must be at least 1")
    return _interval_average(rep, 0, N, x)


@dataclass
class AbelResult:
    value: object
    n_terms: int
    tail_bound: float


def abel_terms(r, tail_eps, bound, x_norm):
    """Smallest N0 with ``bound * x_norm * r**N0 <= tail_eps``."""
    if x_norm == 0:
        return 0
    ratio = tail_eps / (bound * x_norm)
    if ratio >= 1:
        return 0
    return int(math.ceil(math.log(ratio) / math.log(r)))


def abel(rep, r, tail_eps, x, ctx=None):
    """Abel mean ``(1-r) sum_n r^n S^n x`` truncated by its geometric tail.

    The truncation index N0 is the first with ``M ||x|| r^N0 <= tail_eps``;
    the neglected tail ``(1-r) sum_{n>=N0} r^n S^n x`` is then bounded by
    ``M ||x|| r^N0``, which is returned as ``tail_bound``.
    """
    _require_powers(rep, "abel")
    if not 0 < r < 1:
        raise ContractViolation(f"r must lie in (0, 1), got {r}")
    if not tail_eps > 0:
        raise ContractViolation(f"tail_eps must be positive, got {tail_eps}")
    xn = float(np.max(norm(x, ctx) if not isinstance(x, SampledFunction) else norm(x)))
    n0 = abel_terms(r, tail_eps, rep.bound, xn)
    tail = rep.bound * xn * r ** n0
    if rep.is_dense:
        (T,) = rep.effective_generators()
        value = (1 - r) * power_sum(r * T, n0, check_vector(x, T.shape[0]))
    elif n0 == 0:
        value = x * 0.0
    else:
        weights = (1 - r) * r ** np.arange(n0)
        value = _koopman_average(rep, x, 0, n0, weights)
    return AbelResult(value, n0, tail)


@dataclass
class TimeAverageResult:
    value: np.ndarray
    error_estimate: float
    n_intervals: int


def _simpson_average(E, n_int, v0):
    """Composite Simpson mean of ``E^j v0`` over ``j = 0..n_int`` (n_int even)."""
    w = np.ones(n_int + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * n_int
    orbit = np.empty((n_int + 1,) + v0.shape, dtype=complex)
    v = v0
    orbit[0] = v
    for j in range(1, n_int + 1):
        v = E @ v
        orbit[j] = v
    return pairwise_sum(w.reshape((-1,) + (1,) * v0.ndim) * orbit)


def _quadrature_average(A, start, s, h, x, tol, max_halvings=14):
    if h > s:
        raise ContractViolation(f"step h={h} exceeds the averaging length s={s}")
    v0 = x if start == 0 else matrix_exponential(A, start) @ x
    n_int = max(2, int(math.ceil(s / h)))
    n_int += n_int % 2
    coarse = _simpson_average(matrix_exponential(A, s / n_int), n_int, v0)
    for _ in range(max_halvings):
        n_int *= 2
        fine = _simpson_average(matrix_exponential(A, s / n_int), n_int, v0)
        err = float(np.max(np.abs(fine - coarse))) / 15.0
        if err <= tol:
            return TimeAverageResult(fine, err, n_int)
        coarse = fine
    raise QuadratureError(
        f"Simpson step halving stalled at error estimate {err:.3e} > tol {tol:.1e} "
        f"after {n_int} intervals on [{start}, {start + s}]")


def time_average(rep, s, h, x, tol=1e-10):
    """``(1/s) int_0^s S(t) x dt`` by composite Simpson with Richardson error control."""
    if rep.kind != "one_parameter":
        raise ContractViolation("time_average needs a one-parameter representation")
    s = check_positive(s, "s")
    h = check_positive(h, "h")
    (A,) = rep.effective_generators()
    return _quadrature_average(A, 0.0, s, h, check_vector(x, A.shape[0]), tol)


@dataclass
class ChainTrace:
    """Values ``A_j x`` along one cofinal chain of the convex-hull net.

    ``factors[j] = (generator, N_j)`` records ``W_j = (1/N_j) sum_{n<N_j} S_gen^n``
    (``generator`` is None for an identity step), so ``A_j`` is the product
    of the first ``j`` factors and its convex weights are their product measure.
    """

    values: list
    factors: list
    n_generators: int

    def weights(self, j=None):
        """Expanded convex weights of ``A_j`` keyed by exponent tuple in N^k."""
        j = len(self.factors) if j is None else j
        w = {(0,) * self.n_generators: 1.0}
        for gen, n in self.factors[:j]:
            if gen is None:
                continue
            new = {}
            for key, val in w.items():
                for e in range(n):
                    k2 = list(key)
                    k2[gen] += e
                    k2 = tuple(k2)
                    new[k2] = new.get(k2, 0.0) + val / n
            w = new
        return w


def chain_factor(j, k, step_rule="doubling"):
    if step_rule == "identity":
        return None, 1
    if step_rule != "doubling":
        raise ContractViolation(f"unknown step rule {step_rule!r}")
    return j % k, 2 ** (math.ceil(j / k) + 1)


def _chain_generators(rep):
    if rep.kind not in ("powers", "abelian") or not rep.is_dense:
        raise ContractViolation("convex_chain needs a dense abelian (or powers) representation")
    return rep.effective_generators()


def convex_chain(rep, length, x, step_rule="doubling"):
    """Materialize ``A_0 = I, A_{j+1} = W_j A_j`` and return ``A_j x`` for ``j <= length``.

    With k generators, ``W_j`` averages ``S_{(j mod k)}^n`` over ``n < N_j``
    with ``N_j = 2^(ceil(j/k) + 1)``.
    """
    gens = _chain_generators(rep)
    k = len(gens)
    v = check_vector(x, gens[0].shape[0])
    values, factors = [v.copy()], []
    for j in range(check_nonneg_int(length, "length")):
        gen, n = chain_factor(j, k, step_rule)
        if gen is not None:
            v = interval_average_dense(gens[gen], 0, n, v)
        factors.append((gen, n))
        values.append(v)
    return ChainTrace(values, factors, k)


def folner_average(rep, F, x, character=None):
    """``(1/|F|) sum_{g in F} chi(g) S_g x`` (quadrature for continuous intervals)."""
    rep = rep.modulated(character)
    if isinstance(F, IntervalSet):
        _require_powers(rep, "an interval Folner set")
        return _interval_average(rep, F.start, F.length, x)
    if isinstance(F, BoxSet):
        if rep.kind != "abelian" or len(F.lengths) != len(rep.operators):
            raise ContractViolation("box Folner sets need an abelian representation of matching rank")
        v = check_vector(x, rep.dim)
        for T, a, n in zip(rep.effective_generators(), F.corner, F.lengths):
            v = interval_average_dense(T, a, n, v)
        return v
    if isinstance(F, GroupSet):
        if rep.kind != "finite_group":
            raise ContractViolation("group Folner sets need a finite group representation")
        mats = rep.effective_generators()
        v = check_vector(x, rep.dim)
        terms = np.asarray([mats[g] @ v for g in F.elements()])
        return pairwise_sum(terms) / F.size
    if isinstance(F, ContinuousInterval):
        if rep.kind != "one_parameter":
            raise ContractViolation("continuous intervals need a one-parameter representation")
        (A,) = rep.effective_generators()
        h = F.length / 64
        return _quadrature_average(A, F.start, F.length, h, check_vector(x, A.shape[0]), 1e-11).value
    raise ContractViolation(f"unsupported Folner set {F!r}")


# --------------------------------------------------------------------------- schemes


@dataclass(frozen=True)
class Cesaro:
    N: int

    def __post_init__(self):
        if check_nonneg_int(self.N, "N") < 1:
            raise ContractViolation("N must be at least 1")


@dataclass(frozen=True)
class Abel:
    r: float
    tail_eps: float = 1e-12

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ContractViolation(f"r must lie in (0, 1), got {self.r}")
        check_positive(self.tail_eps, "tail_eps")


@dataclass(frozen=True)
class TimeAverage:
    s: float
    h: float
    tol: float = 1e-10

    def __post_init__(self):
        check_positive(self.s, "s")
        check_positive(self.h, "h")


@dataclass(frozen=True)
class ConvexChain:
    length: int
    step_rule: str = "doubling"

    def __post_init__(self):
        check_nonneg_int(self.length, "length")
        chain_factor(0, 1, self.step_rule)


@dataclass(frozen=True)
class Folner:
    sequence: FolnerSequence
    index: int
    character: object = None

    def __post_init__(self):
        self.sequence[self.index]


NetScheme = (Cesaro, Abel, TimeAverage, ConvexChain, Folner)


def net_apply(scheme, rep, x):
    """Apply the net operator ``A_alpha`` described by ``scheme`` to ``x``.

    On abelian representations ``Cesaro(N)`` is the box average over
    ``[0, N)^k`` and ``Abel(r)`` the product of per-generator Abel means.
    """
    if isinstance(scheme, Cesaro):
        if rep.kind == "abelian":
            return folner_average(rep, BoxSet((0,) * rep.n_generators, (scheme.N,) * rep.n_generators), x)
        return cesaro(rep, scheme.N, x)
    if isinstance(scheme, Abel):
        if rep.kind == "abelian":
            v = check_vector(x, rep.dim)
            for T in rep.effective_generators():
                single = SemigroupRep("powers", (T,), rep.bound)
                v = abel(single, scheme.r, scheme.tail_eps, v).value
            return v
        return abel(rep, scheme.r, scheme.tail_eps, x).value
    if isinstance(scheme, TimeAverage):
        return time_average(rep, scheme.s, scheme.h, x, scheme.tol).value
    if isinstance(scheme, ConvexChain):
        return convex_chain(rep, scheme.length, x, scheme.step_rule).values[-1]
    if isinstance(scheme, Folner):
        return folner_average(rep, scheme.sequence[scheme.index], x, scheme.character)
    raise ContractViolation(f"unknown net scheme {scheme!r}")


def _space_norm(v, ctx):
    if isinstance(v, SampledFunction):
        return norm(v)
    return norm(v, ctx)


def invariance_defect(scheme, rep, g, x, side="right", ctx=None):
    """``||A x - A S_g x||`` (right) or ``||A x - S_g A x||`` (left)."""
    Ax = net_apply(scheme, rep, x)
    if side == "right":
        other = net_apply(scheme, rep, apply(rep, g, x))
    elif side == "left":
        other = apply(rep, g, Ax)
    else:
        raise ContractViolation(f"side must be 'right' or 'left', got {side!r}")
    return _space_norm(Ax - other, ctx)


@dataclass
class NetEvaluation:
    scheme: object
    x: object
    output: object
    defect_right: Optional[float] = None
    defect_left: Optional[float] = None
    info: dict = field(default_factory=dict)


def evaluate_net(scheme, rep, x, g=None, ctx=None):
    """Evaluate ``A x`` and, when ``g`` is given, both invariance defects."""
    out = net_apply(scheme, rep, x)
    ev = NetEvaluation(scheme, x, out)
    if g is not None:
        ev.defect_right = invariance_defect(scheme, rep, g, x, "right", ctx)
        ev.defect_left = invariance_defect(scheme, rep, g, x, "left", ctx)
    return ev


def generator_elements(rep):
    """The semigroup elements used as generators in defect diagnostics."""
    if rep.kind == "powers":
        return [1]
    if rep.kind == "abelian":
        k = rep.n_generators
        return [tuple(int(i == j) for i in range(k)) for j in range(k)]
    if rep.kind == "one_parameter":
        return [1.0]
    return list(range(len(rep.operators)))


def defect_bound(scheme, rep, g, x_norm):
    """Explicit bound on the right invariance defect ``||A x - A S_g x||``.

    Counting-measure averages give ``|F delta gF| / |F| * M ||x||``; Abel means
    give ``2 (1 - r^k) M ||x||`` plus both truncation tails; time averages
    over [0, s] give ``2 min(t, s) / s * M ||x||``; the convex chain gives
    ``2 M^2 ||x|| / N`` with N the largest factor length of the generator.
    """
    M = rep.bound
    if isinstance(scheme, Cesaro):
        k = sum(g) if isinstance(g, tuple) else int(g)
        return 2 * k * M * x_norm / scheme.N
    if isinstance(scheme, Abel):
        k = int(g)
        return 2 * (1 - scheme.r ** k) * M * x_norm + 2 * scheme.tail_eps
    if isinstance(scheme, TimeAverage):
        t = float(g)
        return 2 * min(t, scheme.s) / scheme.s * M * x_norm + 2 * scheme.tol
    if isinstance(scheme, ConvexChain):
        gen = g.index(1) if isinstance(g, tuple) else 0
        n = 1
        for j in range(scheme.length):
            which, nj = chain_factor(j, rep.n_generators, scheme.step_rule)
            if which == gen:
                n = max(n, nj)
        return 2 * M * M * x_norm / n
    if isinstance(scheme, Folner):
        F = scheme.sequence[scheme.index]
        if isinstance(F, ContinuousInterval):
            return F.symmetric_difference_size(g) / F.size * M * x_norm + 2e-11
        return F.symmetric_difference_size(g) / F.size * M * x_norm
    raise ContractViolation(f"unknown net scheme {scheme!r}")
