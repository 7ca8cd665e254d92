"""Named representations and random instance generators."""
import numpy as np
from scipy.stats import unitary_group

from ._validation import ContractViolation
from .operators import SemigroupRep

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def swap():
    return SemigroupRep.powers(SWAP)


def identity(d=2):
    return SemigroupRep.powers(np.eye(d))


def rotation(angle):
    """Planar rotation by ``angle`` radians."""
    c, s = np.cos(angle), np.sin(angle)
    return SemigroupRep.powers(np.array([[c, -s], [s, c]]))


def markov_on_functions(P):
    """Powers of a column-stochastic ``P`` acting on functions, i.e. through ``P^T``."""
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or not np.allclose(P.sum(axis=0), 1.0):
        raise ContractViolation("expected a column-stochastic matrix")
    return SemigroupRep.powers(P.T, ctx=None)


def swap_group():
    """The two-element group {I, swap}."""
    return SemigroupRep.finite_group([np.eye(2), SWAP])


def random_contraction(d, rng, p=2):
    """Complex matrix scaled to unit induced p-norm."""
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return X / np.linalg.norm(X, ord=p)


def semisimple_contraction(d, rng, n_peripheral=None, n_fixed=None, radius=0.9,
                           min_angle=0.3):
    """``Q (U (+) C) Q^H``: a unitary block with semisimple spectrum on the circle
    (including some eigenvalues 1) and a strict contraction ``C``.

    Non-trivial unimodular eigenvalues keep their angle at least ``min_angle``
    from 0 and ``||C||_2 <= radius`` so that Cesaro errors decay like 1/N
    from the start of the schedule.
    """
    if d < 1:
        raise ContractViolation("d must be positive")
    n_per = int(rng.integers(1, d + 1)) if n_peripheral is None else n_peripheral
    n_fix = int(rng.integers(1, n_per + 1)) if n_fixed is None else n_fixed
    angles = rng.uniform(min_angle, 2 * np.pi - min_angle, size=n_per - n_fix)
    U = np.diag(np.concatenate([np.ones(n_fix), np.exp(1j * angles)]))
    m = d - n_per
    blocks = [U]
    if m:
        C = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        C *= radius / np.linalg.norm(C, 2)
        blocks.append(C)
    B = np.zeros((d, d), complex)
    i = 0
    for b in blocks:
        B[i:i + b.shape[0], i:i + b.shape[0]] = b
        i += b.shape[0]
    Q = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
    return Q @ B @ Q.conj().T


def commuting_generators(d, k, rng, cond_limit=10.0, min_angle=0.3, radius=0.9):
    """``k`` commuting diagonalizable matrices ``V D_i V^-1`` sharing a
    well-conditioned eigenbasis ``V``.

    Each diagonal entry is 1, a unimodular number at least ``min_angle``
    away from 1, or has modulus at most ``radius``.
    """
    while True:
        V = np.eye(d) + 0.3 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(d)
        if np.linalg.cond(V) <= cond_limit:
            break
    Vinv = np.linalg.inv(V)
    gens = []
    for _ in range(k):
        choice = rng.integers(0, 3, size=d)
        ang = rng.uniform(min_angle, 2 * np.pi - min_angle, size=d)
        small = rng.uniform(0, radius, size=d) * np.exp(2j * np.pi * rng.uniform(size=d))
        diag = np.where(choice == 0, 1.0, np.where(choice == 1, np.exp(1j * ang), small))
        gens.append(V @ np.diag(diag) @ Vinv)
    return np.stack(gens)


def random_rep(rng, max_dim=8, max_generators=3):
    """A random bounded powers or abelian representation for batteries."""
    d = int(rng.integers(1, max_dim + 1))
    k = int(rng.integers(1, max_generators + 1))
    if k == 1:
        return SemigroupRep.powers(semisimple_contraction(d, rng))
    return SemigroupRep.abelian(commuting_generators(d, k, rng))
