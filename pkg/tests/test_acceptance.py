"""Acceptance criteria 1-10 at their stated tolerances and runtime limits.

Every test prints exactly one ``PASS``/``FAIL`` line (visible under plain
``pytest``) and then asserts. Run this file alone with

    pytest tests/test_acceptance.py -v

or directly with ``python tests/test_acceptance.py``.
"""
import io
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from ergonet.cli import run
from ergonet.experiments import (
    SkewProductModel, SquareMapModel, example23_sup, square_map_cauchy_defect, square_map_grid,
    ww_abel_sup, ww_cesaro_sup)
from ergonet.mean_ergodic import (
    eigen_projection, equivalence_battery, fix_space, mean_ergodic_projection, separation_check)
from ergonet.models import (
    commuting_generators, random_contraction, random_rep, semisimple_contraction, swap, swap_group)
from ergonet.nets import Cesaro, cesaro, net_apply
from ergonet.operators import FolnerSequence, SemigroupRep, matrix_power
from ergonet.reports import loglog_slope
from ergonet.spaces import NormContext
from ergonet.uniform import (
    IndexGrid, approximation_defect, build_family, lemma25_defect, uniform_invariance_defect)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
#: Oracle value 0.963 on the default grid; threshold frozen well below it.
CAUCHY_THRESHOLD = 0.2


@pytest.fixture
def emit(capsys):
    def _emit(number, title, passed, detail, elapsed, limit=None):
        timing = f"{elapsed:.1f}s" + (f" (limit {limit:g}s)" if limit else "")
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}; {timing}")
    return _emit


def _finish(emit, number, title, checks, detail, start, limit=None):
    elapsed = time.perf_counter() - start
    in_time = limit is None or elapsed < limit
    ok = all(checks) and in_time
    emit(number, title, ok, detail, elapsed, limit)
    assert all(checks), detail
    assert in_time, f"took {elapsed:.1f}s, limit {limit}s"


def test_criterion_01_telescoping_identity(emit):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 17))
        x = rng.normal(size=d) + 1j * rng.normal(size=d)
        for p in (1, 2, np.inf):
            S = random_contraction(d, rng, p)
            rep = SemigroupRep.powers(S, bound=1.0)
            ctx = NormContext.pnorm(p)
            v = x / np.linalg.norm(x, p)
            Sv = S @ v
            for N in (10, 1000):
                lhs = cesaro(rep, N, v) - cesaro(rep, N, Sv)
                rhs = (v - matrix_power(S, N) @ v) / N
                worst = max(worst, float(np.linalg.norm(lhs - rhs, ctx.p)))
    _finish(emit, 1, "telescoping exactness", [worst <= 1e-12],
            f"max residual {worst:.2e} <= 1e-12 over 200 matrices x 3 norms", start, 10)


def test_criterion_02_projection_net_agreement(emit):
    start = time.perf_counter()
    Ns = [2 ** k for k in range(4, 21)]
    worst_err, worst_oracle, slopes = 0.0, 0.0, []
    for seed in np.random.SeedSequence(2).spawn(100):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 9))
        S = semisimple_contraction(d, rng)
        rep = SemigroupRep.powers(S)
        P = mean_ergodic_projection(rep)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(P - eigen_projection(S)))))
        errs = [float(np.linalg.norm(net_apply(Cesaro(N), rep, np.eye(d)) - P, 2)) for N in Ns]
        worst_err = max(worst_err, errs[-1])
        # S equal to the identity has no rate: A_N = P exactly and only rounding remains
        if fix_space(rep).dim < d:
            slopes.append(loglog_slope(Ns, errs))
    lo, hi = min(slopes), max(slopes)
    checks = [worst_err <= 1e-3, worst_oracle <= 1e-8, -1.15 <= lo and hi <= -0.85]
    _finish(emit, 2, "projection vs Cesaro net",
            checks, f"||A_N - P|| at 2^20 <= {worst_err:.2e}, oracle gap {worst_oracle:.1e}, "
                    f"slopes in [{lo:.3f}, {hi:.3f}] over {len(slopes)} instances", start, 60)


def test_criterion_03_equivalence_battery(emit):
    start = time.perf_counter()
    inconsistent, not_all_true = 0, 0
    for seed in np.random.SeedSequence(3).spawn(100):
        rng = np.random.default_rng(seed)
        rep = random_rep(rng)
        report = equivalence_battery(rep, x=rng.normal(size=rep.dim), strict=False)
        flags = list(report.conditions.values()) + list(report.per_vector["conditions"].values())
        inconsistent += not (report.consistent and report.per_vector["consistent"])
        not_all_true += not all(flags)
    _finish(emit, 3, "equivalence battery", [inconsistent == 0, not_all_true == 0],
            f"{inconsistent} inconsistent, {not_all_true} with a false flag, out of 100", start, 60)


def test_criterion_04_square_map_witness(emit):
    start = time.perf_counter()
    grid = square_map_grid()
    model = SquareMapModel(grid)
    sep = separation_check(model)
    pairing = abs(sep.witness.pair(lambda p: np.ones_like(p))) if sep.witness else float("nan")
    defect = square_map_cauchy_defect(lambda p: p, grid, 2 ** 5, 2 ** 10)
    checks = [not sep.separates, pairing <= 1e-12, defect >= CAUCHY_THRESHOLD]
    _finish(emit, 4, "x^2 map is not mean ergodic", checks,
            f"separates={sep.separates}, |<d0 - d1, 1>| = {pairing:.1e}, "
            f"Cauchy defect {defect:.4f} >= {CAUCHY_THRESHOLD}", start, 30)


def test_criterion_05_modulated_identity(emit):
    start = time.perf_counter()
    rows = [example23_sup(N, 8 * N) for N in (10 ** 2, 10 ** 3, 10 ** 4)]
    sups = [r.sup for r in rows]
    gaps = [abs(r.at_pi_over_N - 1 / (r.N * math.sin(math.pi / (2 * r.N)))) for r in rows]
    _finish(emit, 5, "modulated identity is not uniform", [min(sups) >= 0.5, max(gaps) <= 1e-6],
            f"sups {', '.join(f'{s:.4f}' for s in sups)}; closed-form gap {max(gaps):.1e}", start, 10)


def test_criterion_06_skew_cesaro_rate(emit):
    start = time.perf_counter()
    model = SkewProductModel()
    Ns = [2 ** k for k in range(6, 13)]
    uppers = [ww_cesaro_sup(model, N)[1] for N in Ns]
    slope = loglog_slope(Ns, uppers)
    _finish(emit, 6, "skew-product Cesaro decay", [-0.6 <= slope <= -0.4, uppers[-1] < 0.05],
            f"slope {slope:.3f} in [-0.6, -0.4], sup_upper(2^12) = {uppers[-1]:.4f} < 0.05", start, 120)


def test_criterion_07_skew_abel(emit):
    start = time.perf_counter()
    model = SkewProductModel()
    js = range(4, 11)
    abel_up = [ww_abel_sup(model, 1 - 2.0 ** -j).upper for j in js]
    ces_up = [ww_cesaro_sup(model, 2 ** j)[1] for j in js]
    ratios = [a / c for a, c in zip(abel_up, ces_up)]
    mono = all(b < a for a, b in zip(abel_up, abel_up[1:]))
    within = all(1 / 3 <= q <= 3 for q in ratios)
    _finish(emit, 7, "skew-product Abel vs Cesaro", [mono, within],
            f"monotone={mono}, Abel/Cesaro ratios in [{min(ratios):.3f}, {max(ratios):.3f}]", start, 120)


def _kind_a(rng):
    d = int(rng.integers(1, 6))
    fam = build_family("a", SemigroupRep.powers(random_contraction(d, rng)), IndexGrid.circle(int(rng.integers(8, 65))))
    x = rng.normal(size=d)
    N, g = int(rng.integers(1, 500)), int(rng.integers(1, 6))
    return [uniform_invariance_defect(fam, g, x, N)]


def _kind_b(rng):
    d = int(rng.integers(1, 6))
    fam = build_family("b", SemigroupRep.powers(random_contraction(d, rng)), IndexGrid.circle(int(rng.integers(8, 65))))
    r, eps = float(rng.uniform(0.5, 0.98)), float(10 ** rng.uniform(-6, -1))
    return [approximation_defect(fam, r, eps, rng.normal(size=(d, 2)))]


def _kind_e(rng):
    d, k = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    base = SemigroupRep.abelian(commuting_generators(d, k, rng))
    fam = build_family("e", base, IndexGrid.torus(int(rng.integers(2, 5)), k))
    x = rng.normal(size=d)
    length = int(rng.integers(k, 3 * k + 1))
    return [uniform_invariance_defect(fam, tuple(int(i == j) for i in range(k)), x, length) for j in range(k)]


def _kind_f(rng):
    which = int(rng.integers(0, 3))
    if which == 0:
        d = int(rng.integers(1, 6))
        base = SemigroupRep.powers(random_contraction(d, rng))
        seq = FolnerSequence.intervals(sorted(set(int(v) for v in rng.integers(1, 300, size=3))), int(rng.integers(0, 5)))
        fam = build_family("f", base, IndexGrid.circle(int(rng.integers(8, 33))), folner=seq)
        h = int(rng.integers(1, 8))
    elif which == 1:
        d, k = int(rng.integers(1, 5)), 2
        base = SemigroupRep.abelian(commuting_generators(d, k, rng))
        seq = FolnerSequence.boxes([2, 4, 8, 16], k)
        fam = build_family("f", base, IndexGrid.torus(4, k), folner=seq)
        h = (int(rng.integers(0, 4)), int(rng.integers(0, 4)))
    else:
        d, base = 2, swap_group()
        chars = [np.ones(2), np.array([1.0, -1.0])]
        fam = build_family("f", base, IndexGrid.finite(chars), folner=FolnerSequence.whole_group(base))
        h = int(rng.integers(0, 2))
    alpha = int(rng.integers(0, len(fam.folner)))
    return [uniform_invariance_defect(fam, h, rng.normal(size=d), alpha)]


def test_criterion_08_uniform_family_bounds(emit):
    start = time.perf_counter()
    summary, checks = [], []
    for kind, make in (("a", _kind_a), ("b", _kind_b), ("e", _kind_e), ("f", _kind_f)):
        rng = np.random.default_rng(800 + ord(kind))
        results = [res for _ in range(50) for res in make(rng)]
        bad = sum(not r.within_bound for r in results)
        worst = max(r.value / r.bound if r.bound else 0.0 for r in results)
        checks.append(bad == 0)
        summary.append(f"{kind}: {bad} violations, max ratio {worst:.3f}")
    _finish(emit, 8, "uniform family bounds", checks, "; ".join(summary), start, 60)


def test_criterion_09_fixed_net_averaging_decay(emit):
    start = time.perf_counter()
    fam = build_family("a", swap(), IndexGrid.circle(64))
    x = np.array([1.0, 0.0])
    vals = [lemma25_defect(fam, n, 2, x) for n in (10 ** 2, 10 ** 3, 10 ** 4)]
    mono = vals[0] > vals[1] > vals[2]
    _finish(emit, 9, "averaging against a fixed net", [vals[-1] < 1e-3, mono],
            f"defects {', '.join(f'{v:.2e}' for v in vals)}", start)


def test_criterion_10_determinism(emit, tmp_path):
    start = time.perf_counter()
    mismatched = []
    configs = sorted(CONFIGS.glob("*.json"))
    for path in configs:
        sub = json.loads(path.read_text())["subcommand"]
        outs = []
        for jobs in (1, 8):
            out = tmp_path / f"{path.stem}-{jobs}"
            run(sub, str(path), out=str(out), jobs=jobs, use_cache=False, stream=io.StringIO())
            outs.append((out / "report.csv").read_bytes())
        if outs[0] != outs[1]:
            mismatched.append(path.stem)
    _finish(emit, 10, "determinism across --jobs", [not mismatched],
            f"{len(configs) - len(mismatched)}/{len(configs)} configs byte-identical", start)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
