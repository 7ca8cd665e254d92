import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergonet.models import (
    commuting_generators, identity, random_contraction, random_rep, semisimple_contraction,
    swap_group)


@given(st.integers(1, 16), st.sampled_from([1, 2, np.inf]), st.integers(0, 2 ** 31 - 1))
def test_random_contraction_has_unit_norm(d, p, seed):
    S = random_contraction(d, np.random.default_rng(seed), p)
    assert np.linalg.norm(S, p) == pytest.approx(1.0)


@given(st.integers(1, 8), st.integers(0, 2 ** 31 - 1))
def test_semisimple_contraction_spectrum(d, seed):
    S = semisimple_contraction(d, np.random.default_rng(seed))
    assert np.linalg.norm(S, 2) <= 1 + 1e-12
    w = np.linalg.eigvals(S)
    assert np.sum(np.abs(w - 1) < 1e-8) >= 1
    off = w[np.abs(np.abs(w) - 1) < 1e-8]
    ang = np.abs(np.angle(off))
    assert np.all((ang < 1e-8) | (ang >= 0.3 - 1e-9))


def test_commuting_generators_commute_and_are_bounded():
    rng = np.random.default_rng(2)
    gens = commuting_generators(6, 3, rng)
    for a in gens:
        for b in gens:
            np.testing.assert_allclose(a @ b, b @ a, atol=1e-12)
    assert all(np.max(np.abs(np.linalg.eigvals(g))) <= 1 + 1e-12 for g in gens)


def test_random_rep_reproducible():
    a = random_rep(np.random.default_rng(9))
    b = random_rep(np.random.default_rng(9))
    assert a.kind == b.kind
    for x, y in zip(a.operators, b.operators):
        np.testing.assert_array_equal(x, y)


def test_named_models():
    assert identity(3).dim == 3
    assert len(swap_group().operators) == 2
