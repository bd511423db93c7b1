import json
import shutil
import subprocess

import pytest
from hypothesis import given, strategies as st

from andersonlab.cli import (
    HEADER_TAG, ConfigError, SCHEMAS, format_float, format_value, main,
    read_pairs, resolve, PARSERS,
)


def run(tmp_path, name, *args):
    out = tmp_path / name
    status = main(["run", *args, "--out", str(out)])
    return status, out.read_text() if out.exists() else None


def records(text):
    return [json.loads(l) for l in text.splitlines() if l and not l.startswith("#")]


@given(st.floats(allow_nan=False))
def test_float_roundtrip(x):
    assert float(format_float(x)) == x


@given(st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50)))
def test_site_roundtrip(a):
    assert PARSERS["site"](format_value("site", a)) == a


def test_read_pairs_plain_and_comments():
    assert read_pairs("# c\nL = 8\n\ntrials=3  # x\n") == {"L": "8", "trials": "3"}
    with pytest.raises(ConfigError):
        read_pairs("nonsense\n")


def test_resolve_rules():
    cfg = resolve("wegner", {"L": "8", "seed": "3"}, seed=5)
    assert cfg.seed == 5 and cfg.params["L"] == 8
    with pytest.raises(ConfigError, match="missing required key: L"):
        resolve("wegner", {})
    with pytest.raises(ConfigError):
        resolve("wegner", {"L": "8", "bogus": "1"})
    with pytest.raises(ConfigError):
        resolve("nope", {})
    with pytest.raises(ConfigError):
        resolve("wegner", {"L": "8"}, seed=2 ** 64)
    assert set(SCHEMAS) >= {"duc-scan", "theta", "tri-audit", "pyramid-audit", "green", "lifshitz",
                            "base-case", "good-cube", "wegner", "eigdecay", "probes"}


def test_header_omits_out_and_threads():
    cfg = resolve("wegner", {"L": "4"}, out="x.jsonl", threads=4)
    text = "\n".join(cfg.header_lines())
    assert "x.jsonl" not in text and "threads" not in text
    assert all(l.startswith(HEADER_TAG) or l.startswith("#") for l in cfg.header_lines())


def test_determinism_and_threads(tmp_path):
    s1, a = run(tmp_path, "a", "wegner", "L=4", "trials=6", "--seed", "9")
    s2, b = run(tmp_path, "b", "wegner", "L=4", "trials=6", "--seed", "9", "--threads", "3")
    assert s1 == s2 == 0 and a == b
    s3, c = run(tmp_path, "c", "wegner", "L=4", "trials=6", "--seed", "10")
    assert c != a


def test_replay_jsonl_and_csv(tmp_path):
    _, a = run(tmp_path, "a.jsonl", "tri-audit", "trials=5", "--seed", "4")
    _, b = run(tmp_path, "b.jsonl", "--config", str(tmp_path / "a.jsonl"))
    assert a == b
    _, c = run(tmp_path, "c.csv", "tri-audit", "trials=5", "--seed", "4", "--format", "csv")
    _, d = run(tmp_path, "d.csv", "--config", str(tmp_path / "c.csv"))
    assert c == d and c.splitlines()[0] == a.splitlines()[0]


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["run", "wegner"]) == 1
    assert "missing required key: L" in capsys.readouterr().err
    assert main(["run", "wegner", "L=4", "zzz=1"]) == 1
    assert main(["run", "no-such"]) == 1
    assert main(["run", "wegner", "L=4", "--config", str(tmp_path / "missing")]) == 1
    with pytest.raises(SystemExit) as e:
        main(["run", "wegner", "--bogus"])
    assert e.value.code == 1


def test_vacuous_only_exits_two(tmp_path):
    status, text = run(tmp_path, "v", "eigdecay", "L=4", "window_lo=50", "window_hi=60", "trials=2")
    assert status == 2
    assert {r["verdict"] for r in records(text)} == {"vacuous"}


def test_green_origin_value(tmp_path):
    _, text = run(tmp_path, "g", "green", "cap=2")
    rows = records(text)
    origin = next(r for r in rows if (r["outcome"]["x"], r["outcome"]["y"], r["outcome"]["z"]) == (0, 0, 0))
    assert abs(origin["outcome"]["G"] - 0.252731) < 1e-6


def test_good_cube_negative_energy(tmp_path):
    status, text = run(tmp_path, "gc", "good-cube", "L=8", "trials=2", "lambda=-1")
    assert status == 0 and all(r["verdict"] == "pass" for r in records(text))


def test_report_smoke(tmp_path):
    pytest.importorskip("matplotlib")
    run(tmp_path, "w.jsonl", "wegner", "L=4", "trials=3")
    png = tmp_path / "w.png"
    assert main(["report", str(tmp_path / "w.jsonl"), "--out", str(png)]) == 0
    assert png.stat().st_size > 0


@pytest.mark.skipif(shutil.which("andersonlab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    p = subprocess.run(["andersonlab", "run", "probes", "trials=2"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.startswith("#")
