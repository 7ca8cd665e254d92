"""Runnable experiments on modulated ergodic averages.

* A skew product ``(x, y) -> (x + alpha, y + x)`` on the 2-torus, where the
  sup over all unimodular ``lambda`` of modulated Cesaro and Abel means of
  a trigonometric polynomial is bracketed rigorously.
* The scalar identity operator, whose modulated Cesaro means converge for
  every ``lambda`` but not uniformly in ``lambda``.
* The map ``x -> x^2`` on [0, 1], whose Koopman operator is not mean
  ergodic on C[0, 1].
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import ContractViolation
from .mean_ergodic import MeanErgodicReport, SubspaceBasis, null_space, separation_check
from .nets import cesaro, power_sum
from .operators import DynamicsMap, KoopmanOperator, SemigroupRep
from .reports import ExperimentReport, loglog_slope
from .spaces import SampleGrid, SampledFunction, TrigPolynomial, certified_sup_norm, samples_for_certificate

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
OVERSAMPLE = 16.0


# --------------------------------------------------------------------------- skew product


@dataclass(frozen=True)
class SkewProductModel:
    """``f = sum_k c_k e_{k, l0}`` with ``e_{k,l}(x, y) = exp(2 pi i (k x + l y))``.

    Because every frequency carries the same non-zero ``l0``, f has no
    component along eigenfunctions of the Koopman operator, so every
    modulated mean ergodic projection annihilates it.
    """

    alpha: float = GOLDEN
    l0: int = 1
    coefs: tuple = ((0, 1.0),)
    n_max: int = 2 ** 12

    def __post_init__(self):
        if int(self.l0) != self.l0 or self.l0 == 0:
            raise ContractViolation("l0 must be a non-zero integer")
        if not self.coefs:
            raise ContractViolation("at least one coefficient is required")
        if self.n_max < 1:
            raise ContractViolation("n_max must be positive")

    @property
    def ks(self):
        return np.array([k for k, _ in self.coefs], dtype=np.int64)

    @property
    def cs(self):
        return np.array([c for _, c in self.coefs], dtype=complex)

    @property
    def kmin(self):
        return int(self.ks.min())

    @property
    def kmax(self):
        return int(self.ks.max())

    def coefficient_range(self, N):
        """Largest ``|k|`` frequency touched by N iterates."""
        return max(abs(self.kmin), abs(self.kmax)) + N * abs(self.l0)

    def f(self, points):
        """Evaluate f at torus points of shape (n, 2)."""
        p = np.asarray(points, dtype=float)
        phase = np.multiply.outer(p[:, 0], self.ks) + self.l0 * p[:, 1:2]
        return np.exp(2j * np.pi * phase) @ self.cs

    def sup_f(self):
        """``||f||_inf`` via the certified bracket (exact for one coefficient)."""
        lo, hi = _merged_sup(self, np.ones(1))
        return lo, hi

    def koopman(self):
        return KoopmanOperator(DynamicsMap.skew(self.alpha))


def phase_recurrence(alpha, k, l, n):
    """``S^n e_{k,l} = exp(2 pi i alpha (n k + l n(n-1)/2)) e_{k + n l, l}``.

    Returns the unimodular factor and the new first frequency.
    """
    phase = alpha * (n * k + l * n * (n - 1) / 2)
    return np.exp(2j * np.pi * phase), k + n * l


def validate_phase_recurrence(alphas=(GOLDEN, math.sqrt(2) - 1), kmax=4, lmax=2, nmax=20,
                              n_points=32, seed=0, tol=1e-10):
    """Compare the closed form with n-fold composition of the skew map.

    Returns the largest deviation; raises when it exceeds ``tol``.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n_points, 2))
    worst = 0.0
    for a in alphas:
        phi = DynamicsMap.skew(a)
        orbit = [pts]
        for _ in range(nmax):
            orbit.append(phi(orbit[-1]))
        for k in range(-kmax, kmax + 1):
            for l in range(-lmax, lmax + 1):
                for n in range(nmax + 1):
                    q = orbit[n]
                    direct = np.exp(2j * np.pi * (k * q[:, 0] + l * q[:, 1]))
                    fac, k2 = phase_recurrence(a, k, l, n)
                    closed = fac * np.exp(2j * np.pi * (k2 * pts[:, 0] + l * pts[:, 1]))
                    worst = max(worst, float(np.max(np.abs(direct - closed))))
    if worst > tol:
        raise ContractViolation(f"phase recurrence deviates from composition by {worst:.2e}")
    return worst


def _merged_coefficients(model, weights):
    """Coefficients of ``F(x, t) = sum_k c_k e^{2 pi i k x} sum_n w_n e^{2 pi i alpha(nk + l0 n(n-1)/2)} e^{2 pi i n t}``.

    ``t = theta + l0 x`` absorbs the modulation ``lambda = e^{2 pi i theta}``;
    as theta ranges over the circle so does t for every fixed x, so the sup
    over (lambda, x, y) equals the sup of |F| over the 2-torus.
    """
    n = np.arange(len(weights), dtype=float)
    ks = model.ks
    C = np.zeros((model.kmax - model.kmin + 1, len(weights)), dtype=complex)
    quad = model.l0 * n * (n - 1) / 2
    for k, c in zip(ks, model.cs):
        # reduce the phase mod 1 before exponentiating to keep full precision
        ph = np.mod(model.alpha * (n * k + quad), 1.0)
        C[k - model.kmin] += c * weights * np.exp(2j * np.pi * ph)
    return C


def _merged_sup(model, weights):
    C = _merged_coefficients(model, weights)
    poly = TrigPolynomial(C, (model.kmin, 0))
    deg = poly.half_span
    m = tuple(samples_for_certificate(d, OVERSAMPLE) for d in deg)
    m = tuple(max(mi, s) for mi, s in zip(m, C.shape))
    return certified_sup_norm(poly, deg, m)


def ww_cesaro_sup(model, N):
    """Certified ``(lower, upper)`` for ``sup_lambda ||(1/N) sum_{n<N} lambda^n S^n f||_inf``."""
    if int(N) != N or N < 1:
        raise ContractViolation("N must be a positive integer")
    if N > model.n_max:
        raise ContractViolation(f"N = {N} exceeds the model's n_max = {model.n_max}")
    return _merged_sup(model, np.full(int(N), 1.0 / N))


@dataclass
class AbelSup:
    lower: float
    upper: float
    n_terms: int
    tail: float


def ww_abel_sup(model, r, tail_eps=1e-10):
    """Certified bracket for ``sup_lambda ||(1-r) sum_n r^n lambda^n S^n f||_inf``.

    The series is truncated at the first ``N0`` with ``r^N0 ||c||_1 <= tail_eps``;
    the neglected tail is at most ``r^N0 ||c||_1`` in sup-norm and widens the
    bracket on both sides.
    """
    if not 0 < r < 1:
        raise ContractViolation(f"r must lie in (0, 1), got {r}")
    c1 = float(np.sum(np.abs(model.cs)))
    if c1 == 0:
        return AbelSup(0.0, 0.0, 0, 0.0)
    n0 = max(1, math.ceil(math.log(tail_eps / c1) / math.log(r)))
    tail = c1 * r ** n0
    w = (1 - r) * r ** np.arange(n0)
    lo, hi = _merged_sup(model, w)
    return AbelSup(max(lo - tail, 0.0), hi + tail, n0, tail)


def gridded_ww_sup(model, weights, n_lambda, n_points=256, seed=0):
    """Direct-summation cross-check: max over a lambda grid and random torus points.

    Uses the orbit of the skew map (no merging of variables), so it is an
    independent route to the same quantity. Returns the max and the
    maximizing lambda angle.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n_points, 2))
    op = model.koopman()
    orbit = np.array(list(op.orbit_at(pts, model.f, len(weights))))  # (N, P)
    theta = np.arange(n_lambda) / n_lambda
    lam_pow = np.exp(2j * np.pi * np.outer(theta, np.arange(len(weights))))
    vals = (lam_pow * weights) @ orbit
    idx = np.unravel_index(np.argmax(np.abs(vals)), vals.shape)
    return float(np.abs(vals[idx])), float(theta[idx[0]])


def ww_sweep(model, Ns, name="ww_cesaro"):
    """Cesaro bracket per N, with local and global log-log slopes of the upper bound."""
    report = ExperimentReport(name, ["N", "sup_lower", "sup_upper", "slope_estimate"],
                              plot=("N", "sup_lower", "sup_upper"))
    prev = None
    ups = []
    for N in Ns:
        lo, hi = ww_cesaro_sup(model, N)
        slope = None if prev is None else math.log(hi / prev[1]) / math.log(N / prev[0])
        report.add_row(int(N), lo, hi, slope)
        prev = (N, hi)
        ups.append(hi)
    if len(Ns) > 1:
        report.metadata["slope"] = loglog_slope(Ns, ups)
    return report


def abel_sweep(model, js, name="ww_abel"):
    report = ExperimentReport(name, ["r", "sup_lower", "sup_upper", "cesaro_upper"],
                              plot=("r", "sup_upper", "cesaro_upper"))
    for j in js:
        r = 1 - 2.0 ** -j
        res = ww_abel_sup(model, r)
        ces = ww_cesaro_sup(model, 2 ** j)[1] if 2 ** j <= model.n_max else None
        report.add_row(r, res.lower, res.upper, ces)
    return report


# --------------------------------------------------------------------------- non-uniform example


def dirichlet_modulus(N, theta):
    """``|sin(N theta/2) / (N sin(theta/2))|``, the modulus of ``(1/N) sum_{n<N} e^{i n theta}``."""
    theta = np.asarray(theta, dtype=float)
    den = N * np.sin(theta / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.abs(np.sin(N * theta / 2) / den)
    return np.where(np.abs(den) < 1e-300, 1.0, val)


@dataclass
class ModulatedIdentitySup:
    N: int
    m: int
    sup: float
    theta_at_sup: float
    at_pi_over_N: float
    closed_form_at_pi_over_N: float
    closed_form_grid_sup: float = field(default=float("nan"))


def modulated_identity_means(N, lambdas):
    """``(1/N) sum_{n<N} lambda^n`` for each lambda, via batched power sums of 1x1 operators."""
    lam = np.asarray(lambdas, dtype=complex).reshape(-1, 1, 1)
    out = []
    for lo in range(0, lam.shape[0], 4096):
        out.append(power_sum(lam[lo:lo + 4096], N, np.ones(1))[:, 0] / N)
    return np.concatenate(out)


def example23_sup(N, m):
    """Sup over an m-point lambda grid, 1 excluded, of ``|(1/N) sum_{n<N} lambda^n|``.

    The target projection is 0 for lambda != 1 and the identity at 1, so
    the excluded point carries no defect. Also evaluates the mean at
    ``theta = pi/N`` against the closed form ``1/(N sin(pi/(2N)))``.
    """
    if int(N) != N or N < 1:
        raise ContractViolation("N must be a positive integer")
    if m < 8 * N:
        raise ContractViolation(f"grid of {m} points cannot resolve the main lobe; need m >= 8N = {8 * N}")
    theta = 2 * np.pi * np.arange(1, m) / m
    vals = np.abs(modulated_identity_means(N, np.exp(1j * theta)))
    i = int(np.argmax(vals)) if vals.size else 0
    sup = float(vals[i]) if vals.size else 0.0
    at = float(abs(modulated_identity_means(N, [np.exp(1j * np.pi / N)])[0]))
    closed = float(dirichlet_modulus(N, np.pi / N))
    grid_closed = float(dirichlet_modulus(N, theta).max()) if theta.size else 0.0
    return ModulatedIdentitySup(int(N), int(m), sup, float(theta[i]) if theta.size else 0.0,
                           at, closed, grid_closed)


# --------------------------------------------------------------------------- the x^2 map


def square_map_rep():
    return SemigroupRep.powers(KoopmanOperator(DynamicsMap.square()))


def square_map_grid(m=10_000, accumulate=40):
    """Equispaced points of [0, 1] plus ``1 - 2^-j`` for ``j = 1..accumulate``."""
    return SampleGrid.interval(m, accumulate_at_one=accumulate)


def square_map_cauchy_defect(f, grid, N1, N2):
    """``max_grid |A_{N2} f - A_{N1} f|`` with ``(A_N f)(x) = (1/N) sum_{n<N} f(x^(2^n))``.

    ``f`` is a closed-form callable; iterates are taken by exact repeated
    squaring of the grid points.
    """
    if not 1 <= N1 < N2:
        raise ContractViolation("need 1 <= N1 < N2")
    rep = square_map_rep()
    fun = SampledFunction.from_formula(grid, f)
    a1 = cesaro(rep, N1, fun)
    a2 = cesaro(rep, N2, fun)
    return float(np.max(np.abs(a2.values - a1.values)))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite signed combination of point masses."""

    points: tuple
    weights: tuple

    def pair(self, f):
        return complex(np.dot(np.asarray(self.weights), f(np.asarray(self.points, dtype=float))))


@dataclass(frozen=True, eq=False)
class SquareMapModel:
    """Grid-mode model of the Koopman operator of ``x -> x^2`` on C[0, 1].

    Fixed functions are searched among polynomials of degree at most
    ``degree`` by requiring ``p(x^2) = p(x)`` at every grid point. Fixed
    points of the dual are represented by point masses at grid points fixed
    by the map. Both are exact for this map: the fixed functions are the
    constants and the invariant measures are spanned by the two Diracs.
    """

    grid: SampleGrid
    degree: int = 4

    def fix_space(self, tol=1e-8):
        x = np.asarray(self.grid.points, dtype=float)
        powers = np.arange(self.degree + 1)
        B = (x[:, None] ** 2) ** powers - x[:, None] ** powers
        return null_space(B, tol)

    def fixed_points(self):
        x = np.asarray(self.grid.points, dtype=float)
        return tuple(float(p) for p in x[x * x == x])

    def dual_fix_space(self, tol=1e-8):
        n = len(self.fixed_points())
        return SubspaceBasis(np.eye(n, dtype=complex), tol)

    def pairing(self, dual, fix):
        pts = np.asarray(self.fixed_points())
        powers = np.arange(self.degree + 1)
        V = pts[:, None] ** powers
        return (dual.vectors.conj().T @ V) @ fix.vectors

    def dual_vector(self, dual, coeffs):
        w = dual.vectors @ np.asarray(coeffs)
        k = int(np.argmax(np.abs(w) > 1e-12))
        w = w / (w[k] / abs(w[k])) / np.max(np.abs(w))
        return DiscreteMeasure(self.fixed_points(), tuple(complex(v).real if abs(complex(v).imag) < 1e-15 else complex(v) for v in w))

    def fixed_function(self, fix, b=0):
        coef = fix.vectors[:, b]
        return lambda p: np.polyval(coef[::-1], np.asarray(p, dtype=float))

    def battery(self, x=None, tol=1e-8, f=lambda p: p, n1=2 ** 5, n2=2 ** 10, interior=0.9):
        """Diagnostic-mode report: separation, sup-norm Cauchy defect and pointwise limits.

        Conditions that need the full dual space or exact ranges are reported
        as not evaluated (None).
        """
        fix, dual = self.fix_space(tol), self.dual_fix_space(tol)
        sep = separation_check(self, tol)
        cauchy = square_map_cauchy_defect(f, self.grid, n1, n2)
        conditions = {
            "zero_element": None,
            "orbit_meets_fix": None,
            "separation": bool(sep),
            "decomposition": None,
            "weak_cluster_point": None,
            "weak_convergence_weak_nets": None,
            "weak_convergence_strong_nets": None,
            "strong_convergence": cauchy <= 1e-3,
        }
        defects = {"cauchy_defect": cauchy,
                   "witness_pairing": abs(sep.witness.pair(self.fixed_function(fix))) if sep.witness else 0.0}
        rep = MeanErgodicReport(len(self.grid), fix, dual, SubspaceBasis(np.zeros((0, 0)), tol), None,
                                conditions, defects, float("nan"), mode="diagnostic")
        pts = np.asarray(self.grid.points)
        inner = pts[pts <= interior]
        sub = SampleGrid("interval", inner, (len(inner),))
        # below 1 every orbit falls into 0, so the pointwise limit is f(0)
        limit = complex(np.asarray(f(np.zeros(1)), dtype=complex)[0])
        mean = cesaro(square_map_rep(), n2, SampledFunction.from_formula(sub, f))
        gap = float(np.max(np.abs(mean.values - limit)))
        rep.per_vector = {"points": "x <= %g" % interior, "limit": limit, "distance_to_limit": gap,
                          "pointwise_limit_exists": gap <= 0.05}
        rep.witness = sep.witness
        return rep
