import io
import json
import os
from pathlib import Path

import pytest

from ergonet.cli import (
    ConfigError, cache_lookup, cache_store, config_hash, dump_config, execute, load_config, main, run)
from ergonet.reports import ExperimentReport

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FAST = ["analyze_swap", "analyze_markov", "net_swap_cesaro", "net_rotation_abel",
        "uniform_contraction", "ww_skew"]


def _run(name, out, **kw):
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    buf = io.StringIO()
    code = run(cfg["subcommand"], str(CONFIGS / f"{name}.json"), out=str(out), stream=buf, **kw)
    return code, buf.getvalue()


@pytest.mark.parametrize("name", FAST)
def test_fast_configs_pass_and_write_outputs(name, tmp_path):
    code, text = _run(name, tmp_path / name)
    assert code == 0, text
    for f in ("report.csv", "report.json", "plot.csv"):
        if f == "plot.csv" and name.startswith("analyze"):
            continue
        assert (tmp_path / name / f).exists()
    assert "FAIL" not in text


def test_modulated_identity_config_reports_non_uniformity(tmp_path):
    code, text = _run("uniform_modulated_identity", tmp_path / "ex")
    assert code == 1
    assert "FAIL" in text


def test_cache_hit_reproduces_csv(tmp_path):
    code, first = _run("ww_skew", tmp_path / "a")
    code2, second = _run("ww_skew", tmp_path / "b")
    assert code == code2 == 0
    assert "(cached)" not in first and "(cached)" in second
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()


def test_corrupt_cache_entry_is_ignored(tmp_path):
    cfg = load_config(CONFIGS / "analyze_swap.json")
    _run("analyze_swap", tmp_path / "a")
    entry = Path(os.environ["ERGONET_CACHE_DIR"]) / config_hash(cfg) / "report.json"
    entry.write_text("{not json")
    code, text = _run("analyze_swap", tmp_path / "b")
    assert code == 0 and "(cached)" not in text


@pytest.mark.parametrize("body, fragment", [
    ('{"version": 1,\n "subcommand": "analyze",\n "model": {"name": "swap"},\n "tolerances": {"rank": -1}\n}',
     ":4: tolerances/rank"),
    ('{"version": 1,\n "subcommand": "analyze",\n "bogus": 3}', "Additional properties"),
    ('{"version": 2, "subcommand": "analyze"}', "version"),
    ('{"version": 1,\n "subcommand": "analyze"\n', ":3:"),
    ('{"version": 1, "subcommand": "net", "model": {"name": "swap"}}', "needs a 'scheme'"),
    ('{"version": 1, "subcommand": "analyze",\n "model": {"name": "matrix", "matrix": [[1, 0]]}}',
     "square"),
])
def test_invalid_configs_exit_2(tmp_path, capsys, body, fragment):
    path = tmp_path / "bad.json"
    path.write_text(body)
    sub = json.loads(body)["subcommand"] if body.rstrip().endswith("}") else "analyze"
    assert run(sub, str(path), out=str(tmp_path / "o")) == 2
    err = capsys.readouterr().err
    assert fragment in err and str(path) in err


def test_subcommand_mismatch_and_missing_file(tmp_path, capsys):
    assert run("ww", str(CONFIGS / "analyze_swap.json"), out=str(tmp_path)) == 2
    assert "not 'ww'" in capsys.readouterr().err
    assert run("ww", str(tmp_path / "missing.json")) == 2


def test_config_hash_is_canonical(tmp_path):
    a = load_config(CONFIGS / "analyze_swap.json")
    b = dict(reversed(list(a.items())))
    assert config_hash(a) == config_hash(b)
    with pytest.raises(ConfigError):
        (tmp_path / "x.json").write_text("[]")
        load_config(tmp_path / "x.json")


def test_jobs_do_not_change_results():
    cfg = load_config(CONFIGS / "equivalence_random.json")
    cfg["batch"]["instances"] = 6
    assert execute(cfg, 1).to_csv() == execute(cfg, 4).to_csv()


def test_main_entry_point(tmp_path, capsys):
    code = main(["analyze", "--config", str(CONFIGS / "analyze_swap.json"),
                 "--out", str(tmp_path), "--no-cache"])
    assert code == 0
    assert main(["analyze", "--config", str(CONFIGS / "analyze_swap.json"), "--jobs", "0"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "ergonet" in capsys.readouterr().out


def test_changed_tolerance_misses_cache(tmp_path):
    _run("net_swap_cesaro", tmp_path / "a")
    cfg = json.loads((CONFIGS / "net_swap_cesaro.json").read_text())
    cfg.setdefault("tolerances", {})["net"] = 0.5
    path = tmp_path / "changed.json"
    path.write_text(json.dumps(cfg))
    buf = io.StringIO()
    assert run("net", str(path), out=str(tmp_path / "b"), stream=buf) == 0
    assert "(cached)" not in buf.getvalue()


def test_interrupted_store_leaves_no_entry(tmp_path, monkeypatch):
    report = ExperimentReport("x", ["a"])
    report.add_row(1)

    def crash(self, out_dir, prefix="report"):
        os.makedirs(out_dir, exist_ok=True)
        (Path(out_dir) / "report.json").write_text("{")
        raise OSError("disk full")

    monkeypatch.setattr(ExperimentReport, "write", crash)
    cache_store("k" * 64, report, root=str(tmp_path))
    assert cache_lookup("k" * 64, root=str(tmp_path)) is None
    assert os.listdir(tmp_path) == []


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path, tmp_path):
    cfg = load_config(path)
    again = tmp_path / path.name
    again.write_text(dump_config(cfg))
    assert load_config(again) == cfg
    assert config_hash(load_config(again)) == config_hash(cfg)


def test_seeded_equivalence_is_byte_identical(tmp_path):
    cfg = json.loads((CONFIGS / "equivalence_random.json").read_text())
    cfg["batch"]["instances"] = 5
    path = tmp_path / "eq.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for k in range(2):
        assert run("equivalence", str(path), out=str(tmp_path / str(k)), use_cache=False,
                   stream=io.StringIO()) == 0
        outs.append((tmp_path / str(k) / "report.csv").read_bytes())
    assert outs[0] == outs[1]
