"""Fixed spaces, mean ergodic projections and the equivalence battery.

For a bounded representation on ``C^d`` the following are computed exactly
(up to a rank tolerance): Fix(S), Fix(S'), the span of the ranges of ``I - S_g``,
the oblique projection onto Fix(S) along that span, and a battery that checks
the equivalent characterizations of mean ergodicity side by side. Dual vectors
are paired with vectors through ``<y, x> = y^H x``.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import subspace_angles

from ._validation import (
    ContractViolation, InconsistentVerdictError, NotMeanErgodicError, check_vector)
from .nets import Abel, Cesaro, ConvexChain, net_apply
from .operators import SemigroupRep

RANK_TOL = 1e-8
ANGLE_TOL = 1e-6
NET_TOL = 1e-3
NOISE_FLOOR = 1e-8


@dataclass
class SubspaceBasis:
    """Orthonormal columns spanning a subspace; ``tol`` is the rank tolerance used."""

    vectors: np.ndarray
    tol: float

    @property
    def dim(self):
        return self.vectors.shape[1]

    def projector(self):
        """Orthogonal projector onto the span."""
        return self.vectors @ self.vectors.conj().T

    def distance(self, x):
        x = np.asarray(x)
        return float(np.linalg.norm(x - self.projector() @ x))


def _threshold(s, tol):
    return tol * max(s[0] if s.size else 0.0, 1.0)


def null_space(M, tol=RANK_TOL):
    """Orthonormal basis of ker M via singular-value thresholding.

    Singular values at or below ``tol * max(s_max, 1)`` count as zero; the
    floor of 1 keeps near-identity generators from turning rounding noise
    into rank.
    """
    M = np.atleast_2d(M)
    n = M.shape[1]
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > _threshold(s, tol)))
    return SubspaceBasis(vh[rank:].conj().T.copy(), tol) if rank < n else SubspaceBasis(np.zeros((n, 0), complex), tol)


def column_space(M, tol=RANK_TOL):
    M = np.atleast_2d(M)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > _threshold(s, tol)))
    return SubspaceBasis(u[:, :rank].copy(), tol)


def _deviations(rep):
    """Matrices whose joint kernel is Fix(S): ``S_g - I`` per generator, or ``A``
    for a one-parameter semigroup ``exp(tA)``."""
    if isinstance(rep, SemigroupRep):
        gens = rep.effective_generators()
        if rep.kind == "one_parameter":
            return [gens[0]]
    else:
        gens = list(np.atleast_3d(np.asarray(rep, dtype=complex))) if np.ndim(rep) == 3 else [np.asarray(rep, dtype=complex)]
    eye = np.eye(gens[0].shape[0])
    return [g - eye for g in gens]


def fix_space(rep, tol=RANK_TOL):
    """Joint fixed vectors of all generators."""
    return null_space(np.vstack(_deviations(rep)), tol)


def dual_fix_space(rep, tol=RANK_TOL):
    """Joint fixed vectors of the adjoints ``S_g^H``."""
    return null_space(np.vstack([D.conj().T for D in _deviations(rep)]), tol)


def range_space(rep, tol=RANK_TOL):
    """Span of ``(I - S_g) e_j`` over generators g and coordinate vectors."""
    return column_space(np.hstack(_deviations(rep)), tol)


@dataclass
class SeparationResult:
    separates: bool
    pairing: np.ndarray
    witness: Optional[np.ndarray] = None

    def __bool__(self):
        return self.separates


def separation_from_bases(fix, dual, pairing, tol=RANK_TOL):
    """Does Fix(S) separate Fix(S')?

    ``pairing[a, b] = <dual_a, fix_b>``. Separation holds iff the pairing has
    rank ``dim Fix(S')``; otherwise a dual fixed vector orthogonal to Fix(S)
    is returned as witness, as coefficients over the dual basis.
    """
    G = np.asarray(pairing, dtype=complex).reshape(dual, fix)
    if dual == 0:
        return SeparationResult(True, G)
    if fix == 0:
        c = np.zeros(dual, complex)
        c[0] = 1.0
        return SeparationResult(False, G, c)
    null = null_space(G.conj().T, tol)
    if null.dim == 0:
        return SeparationResult(True, G)
    return SeparationResult(False, G, null.vectors[:, 0])


def separation_check(rep, tol=RANK_TOL):
    """Separation test for a dense representation or a grid model.

    Grid models expose ``fix_space``, ``dual_fix_space`` and ``pairing``;
    their witness is reported as weights over the dual basis functionals.
    """
    if hasattr(rep, "pairing"):
        fix, dual = rep.fix_space(tol), rep.dual_fix_space(tol)
        G = rep.pairing(dual, fix)
        res = separation_from_bases(fix.dim, dual.dim, G, tol)
        if res.witness is not None:
            res.witness = rep.dual_vector(dual, res.witness)
        return res
    fix, dual = fix_space(rep, tol), dual_fix_space(rep, tol)
    G = dual.vectors.conj().T @ fix.vectors
    res = separation_from_bases(fix.dim, dual.dim, G, tol)
    if res.witness is not None:
        res.witness = dual.vectors @ res.witness
    return res


@dataclass
class DecompositionCheck:
    holds: bool
    fix_dim: int
    range_dim: int
    dim: int
    min_angle: float


def decomposition_check(rep, tol=RANK_TOL, angle_tol=ANGLE_TOL):
    """``C^d = Fix(S) (+) lin rg(I - S)`` with a principal-angle margin."""
    fix, rng = fix_space(rep, tol), range_space(rep, tol)
    d = fix.vectors.shape[0]
    if fix.dim and rng.dim:
        angle = float(np.min(subspace_angles(fix.vectors, rng.vectors)))
    else:
        angle = np.pi / 2
    ok = fix.dim + rng.dim == d and angle > angle_tol
    return DecompositionCheck(ok, fix.dim, rng.dim, d, angle)


def mean_ergodic_projection(rep, tol=RANK_TOL, angle_tol=ANGLE_TOL):
    """Projection onto Fix(S) along lin rg(I - S).

    Raises NotMeanErgodicError when the direct-sum decomposition fails.
    """
    dec = decomposition_check(rep, tol, angle_tol)
    if not dec.holds:
        raise NotMeanErgodicError(
            f"not mean ergodic: dim Fix + dim range = {dec.fix_dim + dec.range_dim} "
            f"(d = {dec.dim}), minimal principal angle {dec.min_angle:.2e}",
            diagnostics=dec.__dict__)
    fix, rng = fix_space(rep, tol), range_space(rep, tol)
    if fix.dim == 0:
        return np.zeros((dec.dim, dec.dim), complex)
    B = np.hstack([fix.vectors, rng.vectors])
    coords = np.linalg.solve(B, np.eye(dec.dim))
    return fix.vectors @ coords[: fix.dim]


@dataclass
class ZeroElementReport:
    right: float
    left: float
    idempotence: float
    passed: bool
    structural: bool = False


def zero_element_check(P, rep, tol=1e-9, structural=False):
    """Max over generators of ``||P S_g - P||`` and ``||S_g P - P||``, plus ``||P^2 - P||``.

    ``structural`` records that P came from a net limit with recorded convex
    weights, which certifies membership in the closed convex hull.
    """
    P = np.asarray(P, dtype=complex)
    gens = rep.effective_generators() if isinstance(rep, SemigroupRep) else list(np.asarray(rep).reshape(-1, *P.shape))
    if isinstance(rep, SemigroupRep) and rep.kind == "one_parameter":
        from .operators import matrix_exponential
        gens = [matrix_exponential(gens[0], t) for t in (0.5, 1.0, 2.0)]
    right = max(np.linalg.norm(P @ S - P, 2) for S in gens)
    left = max(np.linalg.norm(S @ P - P, 2) for S in gens)
    idem = float(np.linalg.norm(P @ P - P, 2))
    passed = right <= tol and left <= tol and idem <= tol
    return ZeroElementReport(float(right), float(left), idem, passed, structural)


def orbit_subspace(rep, x, tol=RANK_TOL, max_rounds=None):
    """Orthonormal basis of ``Y_x = lin S x`` by Krylov-style closure."""
    gens = rep.effective_generators() if isinstance(rep, SemigroupRep) else [np.asarray(rep, complex)]
    x = check_vector(x, gens[0].shape[0])
    d = gens[0].shape[0]
    basis = column_space(x.reshape(d, 1), tol)
    frontier = [x]
    for _ in range(max_rounds or d + 1):
        new = [S @ v for S in gens for v in frontier]
        span = column_space(np.column_stack([basis.vectors] + new), tol) if new else basis
        if span.dim == basis.dim:
            return span
        basis = span
        frontier = list(span.vectors.T)
    return basis


def restrict(rep, basis):
    """The representation restricted to an invariant subspace, in basis coordinates."""
    Q = basis.vectors
    gens = [Q.conj().T @ S @ Q for S in rep.operators]
    kind = rep.kind
    return SemigroupRep(kind, tuple(gens), rep.bound, rep.character, rep.table, rep.t_range)


# --------------------------------------------------------------------------- battery

CONDITIONS = (
    "zero_element",
    "orbit_meets_fix",
    "separation",
    "decomposition",
    "weak_cluster_point",
    "weak_convergence_weak_nets",
    "weak_convergence_strong_nets",
    "strong_convergence",
)


def default_schedules(rep):
    """Index schedules for the Cesaro, Abel and convex-chain nets."""
    k = rep.n_generators
    return [
        [Cesaro(2 ** j) for j in (4, 8, 12, 16, 20)],
        [Abel(1 - 2.0 ** -j, 1e-14) for j in (4, 8, 12, 16, 20)],
        [ConvexChain(k * j) for j in (4, 8, 12, 16, 19)],
    ]


@dataclass
class MeanErgodicReport:
    dim: int
    fix_basis: SubspaceBasis
    dual_fix_basis: SubspaceBasis
    range_basis: SubspaceBasis
    projection: Optional[np.ndarray]
    conditions: dict
    defects: dict
    min_angle: float
    per_vector: Optional[dict] = None
    mode: str = "exact"

    @property
    def consistent(self):
        flags = [v for v in self.conditions.values() if v is not None]
        return all(flags) or not any(flags)

    @property
    def mean_ergodic(self):
        return bool(self.conditions["decomposition"])

    def to_dict(self):
        out = {
            "mode": self.mode,
            "dim": self.dim,
            "fix_dim": self.fix_basis.dim,
            "dual_fix_dim": self.dual_fix_basis.dim,
            "range_dim": self.range_basis.dim,
            "min_angle": self.min_angle,
            "conditions": dict(self.conditions),
            "defects": {k: float(v) for k, v in self.defects.items()},
            "consistent": self.consistent,
        }
        if self.projection is not None:
            out["projection"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.projection]
        if self.per_vector is not None:
            out["per_vector"] = self.per_vector
        return out


def _net_conditions(rep, probes, P, fix, schedules, net_tol):
    """Evaluate conditions (2) and (5)-(8) from net trajectories on the probes."""
    scale = max(1.0, float(np.max(np.linalg.norm(probes, axis=0))))
    cluster, weak_w, weak_s, strong, meets = [], [], [], [], []
    worst = 0.0
    target = None if P is None else P @ probes
    for schedule in schedules:
        values = [net_apply(s, rep, probes) for s in schedule]
        dists = [max(fix.distance(v[:, j]) for j in range(v.shape[1])) for v in values]
        cluster.append(min(dists) <= net_tol * scale)
        last = values[-1]
        cauchy = float(np.max(np.abs(values[-1] - values[-2])))
        if target is None:
            err_inf = err_2 = np.inf
            trend = False
        else:
            errs = [float(np.max(np.linalg.norm(v - target, axis=0))) for v in values]
            err_inf = float(np.max(np.abs(last - target)))
            err_2 = errs[-1]
            # errors already at rounding level carry no trend information
            trend = errs[-1] <= max(errs[0], NOISE_FLOOR * scale)
        worst = max(worst, err_2)
        weak_w.append(err_inf <= net_tol * scale and cauchy <= net_tol * scale)
        # strong nets are weak nets too; the extra requirement is asymptotic invariance
        inv = float(np.max(np.abs(last - _shifted(rep, schedule[-1], probes))))
        weak_s.append(err_inf <= net_tol * scale and inv <= net_tol * scale)
        strong.append(err_2 <= net_tol * scale and trend)
        meets.append(dists[-1] <= net_tol * scale)
    return {
        "orbit_meets_fix": all(meets),
        "weak_cluster_point": all(cluster),
        "weak_convergence_weak_nets": all(weak_w),
        "weak_convergence_strong_nets": all(weak_s),
        "strong_convergence": all(strong),
    }, worst


def _shifted(rep, scheme, probes):
    """``A S_g x`` for the first generator g (right asymptotic invariance probe)."""
    S = rep.effective_generators()[0]
    if rep.kind == "one_parameter":
        from .operators import matrix_exponential
        S = matrix_exponential(S, 1.0)
    return net_apply(scheme, rep, S @ probes)


def equivalence_battery(rep, x=None, schedules=None, tol=RANK_TOL, net_tol=NET_TOL,
                        angle_tol=ANGLE_TOL, strict=True):
    """Evaluate the eight equivalent conditions for mean ergodicity.

    In exact mode (dense representations) the conditions must agree; when
    they do not and ``strict`` is set an InconsistentVerdictError is raised,
    since that can only come from a numerical or implementation fault. With
    ``x`` the same battery runs on the orbit subspace ``Y_x`` and is attached
    as ``per_vector``.

    Grid models (objects with a ``battery`` method) are delegated to.
    """
    if hasattr(rep, "battery"):
        return rep.battery(x=x, tol=tol)
    if not isinstance(rep, SemigroupRep) or not rep.is_dense:
        raise ContractViolation("exact mode needs a dense SemigroupRep")
    fix, dual, rng = fix_space(rep, tol), dual_fix_space(rep, tol), range_space(rep, tol)
    dec = decomposition_check(rep, tol, angle_tol)
    P = mean_ergodic_projection(rep, tol, angle_tol) if dec.holds else None
    sep = separation_check(rep, tol)
    d = rep.dim
    if rep.kind == "one_parameter" or rep.kind == "finite_group":
        raise ContractViolation("the battery runs on powers or abelian representations")
    schedules = schedules or default_schedules(rep)
    probes = np.eye(d, dtype=complex)
    net_flags, worst = _net_conditions(rep, probes, P, fix, schedules, net_tol)
    defects = {"net_error": worst, "min_angle": dec.min_angle}
    if P is not None:
        z = zero_element_check(P, rep, tol=max(1e-9, 1e3 * tol * rep.bound))
        defects.update(zero_right=z.right, zero_left=z.left, zero_idempotence=z.idempotence)
        zero_ok = z.passed
    else:
        zero_ok = False
    conditions = {
        "zero_element": zero_ok,
        "orbit_meets_fix": net_flags["orbit_meets_fix"],
        "separation": bool(sep),
        "decomposition": dec.holds,
        "weak_cluster_point": net_flags["weak_cluster_point"],
        "weak_convergence_weak_nets": net_flags["weak_convergence_weak_nets"],
        "weak_convergence_strong_nets": net_flags["weak_convergence_strong_nets"],
        "strong_convergence": net_flags["strong_convergence"],
    }
    report = MeanErgodicReport(d, fix, dual, rng, P, conditions, defects, dec.min_angle)
    if x is not None:
        report.per_vector = _per_vector(rep, x, tol, net_tol, angle_tol, schedules)
    if strict and not report.consistent:
        raise InconsistentVerdictError(
            f"conditions disagree in exact mode: {conditions}", report)
    if strict and report.per_vector is not None and not report.per_vector["consistent"]:
        raise InconsistentVerdictError("per-vector conditions disagree", report)
    return report


def _per_vector(rep, x, tol, net_tol, angle_tol, schedules):
    x = check_vector(x, rep.dim)
    Y = orbit_subspace(rep, x, tol)
    sub = restrict(rep, Y)
    xc = Y.vectors.conj().T @ x
    fix = fix_space(sub, tol)
    dec = decomposition_check(sub, tol, angle_tol)
    P = mean_ergodic_projection(sub, tol, angle_tol) if dec.holds else None
    sep = separation_check(sub, tol)
    flags, worst = _net_conditions(sub, xc.reshape(-1, 1), P, fix, schedules, net_tol)
    cond = {"decomposition": dec.holds, "separation": bool(sep), **flags}
    limit = None if P is None else Y.vectors @ (P @ xc)
    return {
        "orbit_dim": Y.dim,
        "conditions": cond,
        "consistent": all(cond.values()) or not any(cond.values()),
        "limit": None if limit is None else [[float(z.real), float(z.imag)] for z in limit],
        "net_error": worst,
    }


def eigen_projection(S, tol=1e-8):
    """Spectral projection for eigenvalue 1 of a diagonalizable ``S`` (oracle)."""
    w, V = np.linalg.eig(np.asarray(S, dtype=complex))
    Vinv = np.linalg.inv(V)
    sel = np.abs(w - 1.0) <= tol
    return V[:, sel] @ Vinv[sel, :]
