import math

import numpy as np
import pytest

from ergonet._validation import ContractViolation
from ergonet.experiments import (
    GOLDEN, DiscreteMeasure, SkewProductModel, SquareMapModel, abel_sweep, dirichlet_modulus,
    example23_sup, gridded_ww_sup, modulated_identity_means, phase_recurrence,
    square_map_cauchy_defect, square_map_grid, validate_phase_recurrence, ww_abel_sup,
    ww_cesaro_sup, ww_sweep)
from ergonet.mean_ergodic import equivalence_battery, separation_check
from ergonet.spaces import SampleGrid


def weyl_sup_direct(alpha, N, n_t=20000):
    """Oracle: max over a fine t grid of |(1/N) sum_n e^{2 pi i (alpha n(n-1)/2 + n t)}|."""
    n = np.arange(N)
    a = np.exp(2j * np.pi * alpha * n * (n - 1) / 2) / N
    t = np.arange(n_t) / n_t
    best = 0.0
    for lo in range(0, n_t, 2000):
        vals = np.exp(2j * np.pi * np.outer(t[lo:lo + 2000], n)) @ a
        best = max(best, float(np.max(np.abs(vals))))
    return best


def test_phase_recurrence_matches_composition():
    assert validate_phase_recurrence() < 1e-10
    fac, k = phase_recurrence(0.5, 1, 1, 2)
    assert k == 3 and fac == pytest.approx(np.exp(2j * np.pi * 0.5 * 3))


def test_skew_model_contract():
    with pytest.raises(ContractViolation):
        SkewProductModel(l0=0)
    with pytest.raises(ContractViolation):
        SkewProductModel(coefs=())
    m = SkewProductModel()
    lo, hi = m.sup_f()
    assert lo == pytest.approx(1.0) and hi >= 1.0
    assert abs(m.f(np.array([[0.1, 0.3]]))[0]) == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        ww_cesaro_sup(m, 2 ** 13)
    with pytest.raises(ContractViolation):
        ww_cesaro_sup(m, 0)


@pytest.mark.parametrize("N", [2, 16, 64])
def test_cesaro_bracket_contains_direct_weyl_sum(N):
    lo, hi = ww_cesaro_sup(SkewProductModel(), N)
    direct = weyl_sup_direct(GOLDEN, N)
    assert lo <= direct * (1 + 1e-9) + 1e-12
    assert direct <= hi
    assert hi / lo < 1.3


def test_gridded_cross_check_stays_below_upper():
    m = SkewProductModel(coefs=((0, 1.0), (2, 0.5)))
    N = 32
    lo, hi = ww_cesaro_sup(m, N)
    val, _ = gridded_ww_sup(m, np.full(N, 1 / N), n_lambda=256, n_points=128)
    assert val <= hi
    assert val >= 0.8 * lo


def test_abel_bracket_and_sweeps():
    m = SkewProductModel()
    res = ww_abel_sup(m, 0.9)
    assert res.tail <= 1e-10 and 0 < res.lower <= res.upper
    assert res.n_terms == math.ceil(math.log(1e-10) / math.log(0.9))
    with pytest.raises(ContractViolation):
        ww_abel_sup(m, 1.0)
    sweep = ww_sweep(m, [16, 32, 64, 128])
    assert -0.9 < sweep.metadata["slope"] < -0.2
    ab = abel_sweep(m, [4, 5])
    ups = [row[2] for row in ab.rows]
    assert ups[1] < ups[0]


def test_dirichlet_closed_form():
    assert dirichlet_modulus(10, 0.0) == 1.0
    theta = np.array([0.3, 1.1])
    direct = np.abs(np.exp(1j * np.outer(theta, np.arange(10))).sum(axis=1)) / 10
    np.testing.assert_allclose(dirichlet_modulus(10, theta), direct)
    np.testing.assert_allclose(np.abs(modulated_identity_means(10, np.exp(1j * theta))), direct, atol=1e-14)


def test_modulated_identity_sup_profile():
    res = example23_sup(100, 800)
    assert res.sup >= 0.5
    assert res.at_pi_over_N == pytest.approx(1 / (100 * math.sin(math.pi / 200)), abs=1e-12)
    assert res.sup == pytest.approx(res.closed_form_grid_sup, abs=1e-12)
    with pytest.raises(ContractViolation):
        example23_sup(100, 799)


def square_defect_python(points, N1, N2):
    """Oracle: plain-Python Cesaro means of f(x) = x under x -> x^2."""
    def mean(x, N):
        total, v = 0.0, x
        for _ in range(N):
            total += v
            v = v * v
        return total / N
    return max(abs(mean(p, N2) - mean(p, N1)) for p in points)


def test_square_map_cauchy_defect_matches_python_loop():
    grid = square_map_grid(200, accumulate=20)
    fast = square_map_cauchy_defect(lambda p: p, grid, 4, 64)
    slow = square_defect_python(list(map(float, grid.points)), 4, 64)
    assert fast == pytest.approx(slow, abs=1e-13)
    assert slow > 0.5
    with pytest.raises(ContractViolation):
        square_map_cauchy_defect(lambda p: p, grid, 8, 8)


def test_square_map_model_structure():
    model = SquareMapModel(square_map_grid(500, 20))
    assert model.fixed_points() == (0.0, 1.0)
    assert model.fix_space().dim == 1
    sep = separation_check(model)
    assert not sep
    assert isinstance(sep.witness, DiscreteMeasure)
    assert sep.witness.weights == pytest.approx((1.0, -1.0))
    assert abs(sep.witness.pair(lambda p: np.ones_like(p))) <= 1e-12
    report = equivalence_battery(model)
    assert report.mode == "diagnostic" and report.conditions["decomposition"] is None
    assert report.consistent
    assert report.per_vector["pointwise_limit_exists"]


def test_square_map_grid_contains_accumulation():
    g = square_map_grid(11, 5)
    assert 1 - 2 ** -5 in set(g.points)
    assert isinstance(g, SampleGrid)
