"""Command-line batch runner.

    ergonet <subcommand> --config path [--out dir] [--jobs n] [--no-cache]

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 when the
configuration is missing or invalid.
"""
import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .experiments import (
    SkewProductModel, SquareMapModel, square_map_grid, ww_abel_sup, ww_cesaro_sup)
from .mean_ergodic import (
    ANGLE_TOL, NET_TOL, RANK_TOL, decomposition_check, dual_fix_space, equivalence_battery,
    fix_space, mean_ergodic_projection, range_space, separation_check)
from .models import SWAP, markov_on_functions, random_rep, rotation
from .nets import (
    Abel, Cesaro, ConvexChain, Folner, TimeAverage, defect_bound, evaluate_net, generator_elements)
from .operators import (
    BoxSet, ContinuousInterval, FolnerSequence, GroupSet, IntervalSet, SemigroupRep)
from .reports import ExperimentReport, loglog_slope
from .uniform import IndexGrid, build_family, identity_at_one, uniform_convergence_profile, zero_targets

log = logging.getLogger("ergonet")

SUBCOMMANDS = ("analyze", "net", "uniform", "ww", "equivalence")
CACHE_ENV = "ERGONET_CACHE_DIR"


class ConfigError(Exception):
    """Invalid configuration; the message is anchored at ``path:line``."""


# --------------------------------------------------------------------------- config


def _schema():
    text = resources.files("ergonet").joinpath("schema/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _line_of(text, path):
    """1-based line of the innermost key on ``path`` (best effort, for messages)."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            hit = text.find(f'"{part}"', pos)
            if hit >= 0:
                pos = hit
    return text.count("\n", 0, pos) + 1


def load_config(path):
    """Parse and validate a JSON config; raises ConfigError with a line anchor."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config ({exc.strerror})") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}:{_line_of(text, list(err.absolute_path))}: {where}: {err.message}")
    try:
        _semantic_checks(cfg)
    except ConfigError as exc:
        key, msg = exc.args
        raise ConfigError(f"{path}:{_line_of(text, [key])}: {key}: {msg}") from None
    return cfg


def _semantic_checks(cfg):
    sub = cfg["subcommand"]
    needs = {"analyze": ("model",), "net": ("model", "scheme", "alphas"),
             "uniform": ("model", "family", "grid", "alphas"), "ww": ("ww",), "equivalence": ()}
    for key in needs[sub]:
        if key not in cfg:
            raise ConfigError("subcommand", f"'{sub}' needs a '{key}' section")
    model = cfg.get("model")
    if model:
        mats = [model["matrix"]] if "matrix" in model else model.get("matrices", [])
        for m in mats:
            if any(len(row) != len(m) for row in m):
                raise ConfigError("matrix", "matrices must be square")
        if model["name"] == "matrix" and not mats:
            raise ConfigError("model", "model 'matrix' needs 'matrix' or 'matrices'")
    rng = cfg.get("checks", {}).get("slope_range")
    if rng and rng[0] > rng[1]:
        raise ConfigError("slope_range", "lower end exceeds upper end")


def dump_config(cfg):
    """Canonical serialization; also the input to the config hash."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(cfg):
    return hashlib.sha256(f"{__version__}\n{dump_config(cfg)}".encode()).hexdigest()


# --------------------------------------------------------------------------- cache


def cache_root():
    return os.environ.get(CACHE_ENV) or os.path.join(os.path.expanduser("~"), ".cache", "ergonet")


def cache_lookup(key, root=None):
    """Prior report for ``key`` or None; corrupt entries are ignored with a warning."""
    path = os.path.join(root or cache_root(), key, "report.json")
    if not os.path.exists(path):
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            report = ExperimentReport.from_dict(json.load(fh))
        with open(os.path.join(os.path.dirname(path), "report.csv"), encoding="utf-8") as fh:
            report.metadata["_csv"] = fh.read()
        return report
    except (OSError, ValueError, KeyError, TypeError) as exc:
        log.warning("ignoring corrupt cache entry %s (%s)", path, exc)
        return None


def cache_store(key, report, root=None):
    """Write the entry into a temporary directory, then rename it into place."""
    root = root or cache_root()
    os.makedirs(root, exist_ok=True)
    final = os.path.join(root, key)
    tmp = tempfile.mkdtemp(prefix=f".{key[:12]}-", dir=root)
    try:
        report.write(tmp)
        if os.path.isdir(final):
            shutil.rmtree(final)
        os.replace(tmp, final)
    except OSError as exc:
        log.warning("could not store cache entry %s (%s)", final, exc)
        shutil.rmtree(tmp, ignore_errors=True)


# --------------------------------------------------------------------------- builders


def build_model(entry):
    name = entry["name"]
    kind = entry.get("kind", "powers")
    if name == "swap":
        return SemigroupRep.powers(SWAP)
    if name == "identity":
        return SemigroupRep.powers(np.eye(entry.get("dim", 2)))
    if name == "rotation":
        return rotation(entry.get("angle", 1.0))
    if name == "markov":
        return markov_on_functions(entry["matrix"])
    if name == "swap_group":
        return SemigroupRep.finite_group([np.eye(2), SWAP])
    if name == "square_map":
        return SquareMapModel(square_map_grid(entry.get("grid_size", 10_000), entry.get("accumulate", 40)))
    mats = [np.asarray(m, dtype=float) for m in ([entry["matrix"]] if "matrix" in entry else entry["matrices"])]
    if kind == "powers":
        return SemigroupRep.powers(mats[0])
    if kind == "one_parameter":
        return SemigroupRep.one_parameter(mats[0])
    if kind == "abelian":
        return SemigroupRep.abelian(mats)
    return SemigroupRep.finite_group(mats)


def _tol(cfg, key, default):
    return cfg.get("tolerances", {}).get(key, default)


def _x(cfg, dim):
    if "x" in cfg:
        x = np.asarray(cfg["x"], dtype=float)
        if x.shape != (dim,):
            raise ConfigError("x", f"expected {dim} entries, got {x.size}")
        return x
    x = np.zeros(dim)
    x[0] = 1.0
    return x


def build_scheme(entry, rep, alpha, cfg):
    t = entry["type"]
    if t == "cesaro":
        return Cesaro(int(alpha))
    if t == "abel":
        if not 0 < alpha < 1:
            raise ConfigError("alphas", "Abel indices must lie in (0, 1)")
        return Abel(float(alpha), _tol(cfg, "tail", 1e-12))
    if t == "time_average":
        return TimeAverage(float(alpha), entry.get("h", float(alpha) / 64), _tol(cfg, "quadrature", 1e-10))
    if t == "convex_chain":
        return ConvexChain(int(alpha), entry.get("step_rule", "doubling"))
    if rep.kind == "powers":
        F = IntervalSet(0, int(alpha))
    elif rep.kind == "abelian":
        F = BoxSet((0,) * rep.n_generators, (int(alpha),) * rep.n_generators)
    elif rep.kind == "one_parameter":
        F = ContinuousInterval(0.0, float(alpha))
    else:
        F = GroupSet(frozenset(range(len(rep.operators))), rep.table)
    return Folner(FolnerSequence((F,)), 0)


# --------------------------------------------------------------------------- subcommands


def run_analyze(cfg, mapper):
    model = build_model(cfg["model"])
    tol, angle = _tol(cfg, "rank", RANK_TOL), _tol(cfg, "angle", ANGLE_TOL)
    rep = ExperimentReport("analyze", ["quantity", "value"])
    checks = cfg.get("checks", {})
    if isinstance(model, SquareMapModel):
        res = model.battery(tol=tol)
        rep.add_row("fix_dim", res.fix_basis.dim)
        rep.add_row("dual_fix_dim", res.dual_fix_basis.dim)
        rep.add_row("separation", bool(res.conditions["separation"]))
        rep.add_row("cauchy_defect", res.defects["cauchy_defect"])
        rep.add_row("witness_pairing", res.defects["witness_pairing"])
        rep.add_row("pointwise_limit_exists", bool(res.per_vector["pointwise_limit_exists"]))
        mean_ergodic = bool(res.conditions["separation"]) and bool(res.conditions["strong_convergence"])
        rep.metadata["witness"] = {"points": list(res.witness.points), "weights": list(res.witness.weights)}
        if "min_cauchy_defect" in checks:
            v = res.defects["cauchy_defect"]
            rep.add_verdict("cauchy_defect", v >= checks["min_cauchy_defect"],
                            f"sup-norm Cauchy defect {v:.6g} vs threshold {checks['min_cauchy_defect']}")
    else:
        fix, dual, rng = fix_space(model, tol), dual_fix_space(model, tol), range_space(model, tol)
        dec = decomposition_check(model, tol, angle)
        sep = separation_check(model, tol)
        rep.add_row("fix_dim", fix.dim)
        rep.add_row("dual_fix_dim", dual.dim)
        rep.add_row("range_dim", rng.dim)
        rep.add_row("min_angle", dec.min_angle)
        rep.add_row("separation", bool(sep))
        rep.add_row("decomposition", bool(dec.holds))
        mean_ergodic = bool(dec.holds)
        if dec.holds:
            P = mean_ergodic_projection(model, tol, angle)
            rep.metadata["projection"] = [[[float(z.real), float(z.imag)] for z in row] for row in P]
    rep.add_row("mean_ergodic", mean_ergodic)
    if "expect_mean_ergodic" in checks:
        want = checks["expect_mean_ergodic"]
        rep.add_verdict("mean_ergodic", mean_ergodic == want,
                        f"mean ergodic = {mean_ergodic}, expected {want}")
    return rep


def run_net(cfg, mapper):
    model = build_model(cfg["model"])
    if not isinstance(model, SemigroupRep):
        raise ConfigError("model", "the net subcommand needs a matrix representation")
    x = _x(cfg, model.dim)
    g = generator_elements(model)[0]
    xn = float(np.linalg.norm(x))
    alphas = cfg["alphas"]
    schemes = [build_scheme(cfg["scheme"], model, a, cfg) for a in alphas]

    def one(scheme):
        ev = evaluate_net(scheme, model, x, g)
        return float(np.linalg.norm(ev.output)), ev.defect_right, ev.defect_left, defect_bound(scheme, model, g, xn)

    rep = ExperimentReport("net", ["alpha", "output_norm", "defect_right", "defect_left", "bound"],
                           plot=("alpha", "defect_right", "bound"))
    results = list(mapper(one, schemes))
    for a, (n, dr, dl, b) in zip(alphas, results):
        rep.add_row(a, n, dr, dl, b)
    ok = all(dr <= b * (1 + 1e-9) + 1e-12 for _, dr, _, b in results)
    rep.add_verdict("defect_within_bound", ok, "right invariance defects respect the explicit bound")
    if "max_defect" in cfg.get("checks", {}):
        last = results[-1][1]
        lim = cfg["checks"]["max_defect"]
        rep.add_verdict("max_defect", last <= lim, f"final right defect {last:.6g} vs {lim}")
    return rep


def run_uniform(cfg, mapper):
    fam_cfg, grid_cfg = cfg["family"], cfg["grid"]
    base = build_model(cfg["model"])
    if not isinstance(base, SemigroupRep):
        raise ConfigError("model", "uniform families need a matrix representation")
    refine = grid_cfg.get("refinement", 2)
    m = grid_cfg["size"]
    if grid_cfg["model"] == "circle":
        grid = IndexGrid.circle(m, refine)
    elif grid_cfg["model"] == "torus":
        grid = IndexGrid.torus(m, base.n_generators, refine)
    else:
        grid = IndexGrid.interval(grid_cfg.get("lo", 0.0), grid_cfg.get("hi", 1.0), m, refine)
    folner = None
    if fam_cfg["kind"] == "f":
        folner = FolnerSequence.intervals(fam_cfg.get("folner_lengths", [1]))
    family = build_family(fam_cfg["kind"], base, grid, folner=folner)
    targets = identity_at_one if fam_cfg.get("targets") == "identity_at_one" else zero_targets
    x = _x(cfg, base.dim)
    rep = uniform_convergence_profile(family, x, cfg["alphas"], targets, name="uniform", mapper=mapper)
    checks = cfg.get("checks", {})
    if checks.get("assert_uniform_convergence"):
        thr = checks.get("uniform_threshold", 0.5)
        if not rep.metadata["grid_stable"]:
            rep.metadata["uniform_convergence"] = "not evaluated: profile is grid-unstable"
        else:
            final = rep.metadata["sups"][-1]
            ok = final < thr
            rep.add_verdict("uniform_convergence", ok,
                            f"sup defect {final:.6g} < {thr:g}" if ok else f"sup defect ≥ {thr:g}")
    return rep


def run_ww(cfg, mapper):
    w = cfg["ww"]
    coefs = tuple((int(c[0]), complex(c[1], c[2] if len(c) > 2 else 0.0))
                  for c in w.get("coefficients", [[0, 1.0]]))
    Ns = sorted(w.get("cesaro_N", []))
    js = sorted(w.get("abel_j", []))
    n_max = max(Ns + [2 ** j for j in js] + [1])
    model = SkewProductModel(w.get("alpha", SkewProductModel.alpha), w.get("l0", 1), coefs, n_max)
    rep = ExperimentReport("ww", ["N_or_r", "sup_lower", "sup_upper", "slope_estimate"],
                           plot=("N_or_r", "sup_lower", "sup_upper"))
    ces = dict(zip(Ns, mapper(lambda N: ww_cesaro_sup(model, N), Ns)))
    prev = None
    for N in Ns:
        lo, hi = ces[N]
        slope = None if prev is None else float(np.log(hi / prev[1]) / np.log(N / prev[0]))
        rep.add_row(int(N), lo, hi, slope)
        prev = (N, hi)
    abel = dict(zip(js, mapper(lambda j: ww_abel_sup(model, 1 - 2.0 ** -j), js)))
    prev = None
    for j in js:
        a = abel[j]
        scale = 2.0 ** j
        slope = None if prev is None else float(np.log(a.upper / prev[1]) / np.log(scale / prev[0]))
        rep.add_row(1 - 2.0 ** -j, a.lower, a.upper, slope)
        prev = (scale, a.upper)
    checks = cfg.get("checks", {})
    if len(Ns) > 1:
        slope = loglog_slope(Ns, [ces[N][1] for N in Ns])
        rep.metadata["cesaro_slope"] = slope
        if "slope_range" in checks:
            lo, hi = checks["slope_range"]
            rep.add_verdict("cesaro_slope", lo <= slope <= hi, f"log-log slope {slope:.4f} in [{lo}, {hi}]")
    if Ns and "max_final_upper" in checks:
        v = ces[Ns[-1]][1]
        rep.add_verdict("final_upper", v < checks["max_final_upper"],
                        f"sup_upper({Ns[-1]}) = {v:.6g} < {checks['max_final_upper']}")
    if js:
        ups = [abel[j].upper for j in js]
        rep.add_verdict("abel_monotone", all(b < a for a, b in zip(ups, ups[1:])),
                        "Abel upper bounds decrease with r")
    if js and "abel_cesaro_factor" in checks:
        fac = checks["abel_cesaro_factor"]
        ratios = []
        for j in js:
            c = ces.get(2 ** j) or ww_cesaro_sup(model, 2 ** j)
            ratios.append(max(abel[j].upper / c[1], c[1] / abel[j].upper))
        rep.add_verdict("abel_vs_cesaro", max(ratios) <= fac,
                        f"largest Abel/Cesaro ratio {max(ratios):.4f} within factor {fac}")
    return rep


def _battery_row(args):
    i, child, max_dim, max_gen, tol, net_tol = args
    rng = np.random.default_rng(child)
    rep = random_rep(rng, max_dim, max_gen)
    x = rng.normal(size=rep.dim)
    res = equivalence_battery(rep, x, tol=tol, net_tol=net_tol, strict=False)
    flags = list(res.conditions.values()) + list(res.per_vector["conditions"].values())
    consistent = res.consistent and res.per_vector["consistent"]
    return (i, rep.dim, rep.n_generators, res.fix_basis.dim, bool(all(flags)), bool(consistent),
            float(res.defects["net_error"]))


def run_equivalence(cfg, mapper):
    batch = cfg.get("batch", {})
    n = batch.get("instances", 20)
    seeds = np.random.SeedSequence(cfg.get("seed", 0)).spawn(n)
    tol, net_tol = _tol(cfg, "rank", RANK_TOL), _tol(cfg, "net", NET_TOL)
    args = [(i, s, batch.get("max_dim", 8), batch.get("max_generators", 3), tol, net_tol)
            for i, s in enumerate(seeds)]
    rep = ExperimentReport("equivalence",
                           ["instance", "dim", "generators", "fix_dim", "all_true", "consistent", "net_error"])
    for row in mapper(_battery_row, args):
        rep.add_row(*row)
    bad = sum(not r[5] for r in rep.rows)
    false = sum(not r[4] for r in rep.rows)
    rep.add_verdict("consistency", bad == 0, f"{bad} inconsistent instances out of {n}")
    rep.add_verdict("all_conditions_hold", false == 0, f"{false} instances with a failing condition")
    return rep


RUNNERS = {"analyze": run_analyze, "net": run_net, "uniform": run_uniform, "ww": run_ww,
           "equivalence": run_equivalence}


# --------------------------------------------------------------------------- driver


def execute(cfg, jobs=1):
    """Run a validated config and return its report (no caching, no files)."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return RUNNERS[cfg["subcommand"]](cfg, pool.map)
    return RUNNERS[cfg["subcommand"]](cfg, map)


def run(subcommand, config_path, out=None, jobs=1, use_cache=True, stream=None):
    stream = stream or sys.stdout
    try:
        cfg = load_config(config_path)
        if cfg["subcommand"] != subcommand:
            with open(config_path, encoding="utf-8") as fh:
                line = _line_of(fh.read(), ["subcommand"])
            raise ConfigError(f"{config_path}:{line}: subcommand: config is for "
                              f"'{cfg['subcommand']}', not '{subcommand}'")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    key = config_hash(cfg)
    out = out or cfg.get("output") or os.path.join("ergonet-out", subcommand)
    report = cache_lookup(key) if use_cache else None
    cached = report is not None
    if not cached:
        try:
            report = execute(cfg, jobs)
        except ConfigError as exc:
            field, msg = exc.args if len(exc.args) == 2 else ("config", str(exc))
            print(f"error: {config_path}: {field}: {msg}", file=sys.stderr)
            return 2
        report.metadata.update(config_hash=key, version=__version__, subcommand=subcommand)
        if use_cache:
            cache_store(key, report)
    csv_text = report.metadata.pop("_csv", None)
    report.metadata["cached"] = cached
    report.metadata["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    paths = report.write(out)
    if csv_text is not None:
        with open(paths["report.csv"], "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    print(f"{subcommand}: {len(report.rows)} rows -> {out}" + (" (cached)" if cached else ""), file=stream)
    for name, v in sorted(report.verdicts.items()):
        print(f"{'PASS' if v['passed'] else 'FAIL'} {name}: {v['detail']}", file=stream)
    return 0 if report.passed else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ergonet", description="Ergodic-net experiments.")
    parser.add_argument("--version", action="version", version=f"ergonet {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--no-cache", action="store_true")
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    return run(args.subcommand, args.config, args.out, args.jobs, not args.no_cache)


if __name__ == "__main__":
    sys.exit(main())
