import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergonet._validation import ContractViolation, QuadratureError
from ergonet.models import SWAP, random_contraction, swap, swap_group
from ergonet.nets import (
    Abel, Cesaro, ConvexChain, Folner, TimeAverage, abel, cesaro, convex_chain, defect_bound,
    evaluate_net, folner_average, generator_elements, invariance_defect, net_apply,
    pairwise_sum, power_sum, time_average)
from ergonet.operators import (
    ContinuousInterval, DynamicsMap, FolnerSequence, KoopmanOperator, SemigroupRep, apply)
from ergonet.spaces import NormContext, SampledFunction, SampleGrid


def naive_orbit_sum(T, N, x):
    """Oracle: sum T^n x by repeated multiplication in a plain loop."""
    total = np.zeros_like(x, dtype=complex)
    v = x.astype(complex)
    for _ in range(N):
        total += v
        v = T @ v
    return total


def test_pairwise_sum_is_exact_on_integers():
    arr = np.arange(1000.0).reshape(1000, 1)
    assert pairwise_sum(arr)[0] == 999 * 1000 / 2


@pytest.mark.parametrize("N", [1, 7, 1024, 1025, 3001])
def test_power_sum_paths_agree_with_naive_loop(N):
    rng = np.random.default_rng(N)
    T = random_contraction(4, rng)
    x = rng.normal(size=4)
    np.testing.assert_allclose(power_sum(T, N, x), naive_orbit_sum(T, N, x), atol=1e-10)


def test_power_sum_batch_and_block_shapes():
    rng = np.random.default_rng(1)
    T = np.stack([random_contraction(3, rng) for _ in range(5)])
    X = rng.normal(size=(3, 2))
    out = power_sum(T, 2000, X)
    assert out.shape == (5, 3, 2)
    np.testing.assert_allclose(out[2][:, 1], naive_orbit_sum(T[2], 2000, X[:, 1]), atol=1e-10)
    assert power_sum(T, 0, X).shape == (5, 3, 2)


def test_swap_cesaro_and_abel_values():
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(cesaro(swap(), 1000, x), [0.5, 0.5])
    np.testing.assert_allclose(cesaro(swap(), 3, x), [2 / 3, 1 / 3])
    r = 0.9
    res = abel(swap(), r, 1e-14, x)
    # closed form of (1 - r) sum r^n S^n e_1 for the swap
    np.testing.assert_allclose(res.value, [1 / (1 + r), r / (1 + r)], atol=1e-13)
    assert res.tail_bound <= 1e-14
    assert res.n_terms == math.ceil(math.log(1e-14) / math.log(r))
    with pytest.raises(ContractViolation):
        cesaro(swap(), 0, x)
    with pytest.raises(ContractViolation):
        abel(swap(), 1.0, 1e-12, x)
    with pytest.raises(ContractViolation):
        cesaro(SemigroupRep.abelian([SWAP, SWAP]), 3, x)


def test_modulated_cesaro_includes_character():
    rep = swap().modulated(-1)
    x = np.array([1.0, 1.0])
    # S x = x so lambda^n S^n x = (-1)^n x averages to 0 for even N
    np.testing.assert_allclose(cesaro(rep, 10, x), [0, 0], atol=1e-15)


def test_time_average_closed_form():
    rep = SemigroupRep.one_parameter(np.array([[2j * np.pi]]), t_range=(0, 1))
    res = time_average(rep, 0.5, 0.05, np.array([1.0]))
    # (1/s) int_0^s e^{2 pi i t} dt at s = 1/2 equals 2i/pi
    assert res.value[0] == pytest.approx(2j / np.pi, abs=1e-10)
    assert res.error_estimate <= 1e-10
    with pytest.raises(ContractViolation):
        time_average(rep, 0.5, 1.0, np.array([1.0]))
    with pytest.raises(QuadratureError):
        time_average(rep, 0.5, 0.25, np.array([1.0]), tol=1e-300)
    with pytest.raises(ContractViolation):
        time_average(swap(), 1.0, 0.1, np.array([1.0, 0.0]))


def test_convex_chain_weights_reproduce_values():
    rng = np.random.default_rng(3)
    gens = [np.diag(np.exp(1j * rng.uniform(0, 6, 3))) for _ in range(2)]
    rep = SemigroupRep.abelian(gens)
    x = rng.normal(size=3)
    trace = convex_chain(rep, 4, x)
    assert [f[1] for f in trace.factors] == [2, 4, 4, 8]
    w = trace.weights()
    assert sum(w.values()) == pytest.approx(1.0)
    direct = sum(wt * apply(rep, g, x) for g, wt in w.items())
    np.testing.assert_allclose(trace.values[-1], direct, atol=1e-12)
    ident = convex_chain(rep, 3, x, step_rule="identity")
    np.testing.assert_allclose(ident.values[-1], x)
    with pytest.raises(ContractViolation):
        ConvexChain(2, "tripling")


def test_folner_averages():
    x = np.array([1.0, 0.0])
    seq = FolnerSequence.whole_group(swap_group())
    np.testing.assert_allclose(folner_average(swap_group(), seq[0], x), [0.5, 0.5])
    F = FolnerSequence.intervals([4, 8], start=3)
    np.testing.assert_allclose(net_apply(Folner(F, 0), swap(), x), [0.5, 0.5])
    A = np.array([[0.0, -1.0], [1.0, 0.0]]) * 2 * np.pi
    one = SemigroupRep.one_parameter(A, t_range=(0, 2))
    v = folner_average(one, ContinuousInterval(0.0, 1.0), x)
    np.testing.assert_allclose(v, [0, 0], atol=1e-10)
    with pytest.raises(ContractViolation):
        folner_average(swap(), seq[0], x)


def test_abelian_cesaro_is_box_average():
    rep = SemigroupRep.abelian([SWAP, -np.eye(2)])
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(net_apply(Cesaro(4), rep, x), [0, 0], atol=1e-15)
    np.testing.assert_allclose(net_apply(Cesaro(3), rep, x), [2 / 9, 1 / 9])
    v = net_apply(Abel(0.5), rep, x)
    expect = (1 - 0.5) / (1 + 0.5)  # Abel mean of (-1)^n
    np.testing.assert_allclose(v, expect * np.array([1 / 1.5, 0.5 / 1.5]), atol=1e-12)


def test_koopman_cesaro_on_rotation_grid():
    g = SampleGrid.circle(8)
    f = SampledFunction(g, np.cos(2 * np.pi * g.points))
    rep = SemigroupRep.powers(KoopmanOperator(DynamicsMap.rotation(1 / 8)))
    avg = cesaro(rep, 8, f)
    np.testing.assert_allclose(avg.values, 0, atol=1e-15)
    ab = abel(rep, 0.5, 1e-12, f)
    assert ab.n_terms > 0


@given(st.integers(1, 8), st.sampled_from([1, 2, np.inf]), st.integers(0, 2 ** 31 - 1))
def test_invariance_defect_within_explicit_bound(d, p, seed):
    rng = np.random.default_rng(seed)
    rep = SemigroupRep.powers(random_contraction(d, rng, p), ctx=NormContext.pnorm(p))
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    ctx = NormContext.pnorm(p)
    xn = float(np.linalg.norm(x, p))
    for scheme in (Cesaro(37), Abel(0.93, 1e-13), ConvexChain(5)):
        for g in (1, 3):
            if isinstance(scheme, ConvexChain) and g != 1:
                continue
            dv = invariance_defect(scheme, rep, g, x, ctx=ctx)
            assert dv <= defect_bound(scheme, rep, g, xn) * (1 + 1e-9) + 1e-12


def test_time_average_defect_bound():
    A = np.array([[0.0, -3.0], [3.0, -0.2]])
    rep = SemigroupRep.one_parameter(A, t_range=(0, 6))
    x = np.array([1.0, 2.0])
    sch = TimeAverage(4.0, 0.05)
    dv = invariance_defect(sch, rep, 1.0, x)
    assert dv <= defect_bound(sch, rep, 1.0, np.linalg.norm(x))


def test_evaluate_net_and_left_defect():
    ev = evaluate_net(Cesaro(10), swap(), np.array([1.0, 0.0]), g=1)
    assert ev.defect_right == pytest.approx(0.0, abs=1e-15)
    assert ev.defect_left == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ContractViolation):
        invariance_defect(Cesaro(10), swap(), 1, np.ones(2), side="up")


def test_generator_elements():
    assert generator_elements(swap()) == [1]
    assert generator_elements(SemigroupRep.abelian([SWAP, SWAP])) == [(1, 0), (0, 1)]
    assert generator_elements(swap_group()) == [0, 1]
