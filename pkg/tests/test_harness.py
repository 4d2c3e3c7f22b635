import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from complextubes import __version__, harness
from complextubes.cli import main
from complextubes.harness import ConfigError, emit, parse_config, run_command


def read(out):
    return json.loads((out / "report.json").read_text()), (out / "data.csv").read_text()


# ---------------------------------------------------------------- parsing


def test_parse_example_and_defaults():
    cfg = parse_config("delta = 0.03125\nseed = 7")
    assert cfg["delta"] == 0.03125 and cfg["seed"] == 7
    assert cfg["n"] == 2
    assert "n" in cfg.defaults_applied() and "delta" not in cfg.defaults_applied()
    eff = cfg.effective()
    assert set(harness.KEYS) <= set(eff)


def test_comments_blanks_fractions():
    cfg = parse_config("# header\n\ndelta = 1/64   # trailing\ntheta = pi/4\nsigma = 0.2, 0.4\n")
    assert cfg["delta"] == 1 / 64 and cfg["theta"] == math.pi / 4 and cfg["sigma"] == (0.2, 0.4)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("delta = -1", 1, "delta"),
        ("seed = 7\nseed = abc", 2, "type mismatch"),
        ("# c\nbogus = 3", 2, "unknown key"),
        ("seed 7", 1, "expected"),
        ("seed = 1.5", 1, "type mismatch"),
        ("n = 4", 1, "must be 2 or 3"),
        ("s = 2", 1, "s ="),
        ("theorem = t43", 1, "must be one of"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert f"line {line}" in str(err.value) and fragment in str(err.value)


def test_overrides_applied_last():
    cfg = parse_config("seed = 1\n", ["seed=5", "delta = 1/16"])
    assert cfg["seed"] == 5 and cfg["delta"] == 1 / 16
    with pytest.raises(ConfigError, match="--set #1"):
        parse_config("", ["seed"])


def test_axis_lines():
    cfg = parse_config("command = falconer\naxis.delta = 1/32, 1/64\naxis.sigma = 0.2,0.3;0.5\n")
    assert cfg.axes == {"delta": (1 / 32, 1 / 64), "sigma": ((0.2, 0.3), (0.5,))}
    with pytest.raises(ConfigError, match="sweep axis"):
        parse_config("axis.nope = 1,2")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("axis.delta = 2,0.5")


def _value(name):
    key = harness.KEYS[name]
    choices = {
        "n": st.sampled_from([2, 3]),
        "spacing_kind": st.sampled_from(["uniform-N", "exact-H0", "at-most-H0"]),
        "rule": st.sampled_from(["cell", "essential"]),
        "mode": st.sampled_from(["indexed", "exhaustive"]),
        "theorem": st.sampled_from(["t41", "t42"]),
        "layout": st.sampled_from(["generic", "concentrated", "mixed"]),
        "level": st.sampled_from(["top", "bottom", "3"]),
        "method": st.sampled_from(["hashed", "brute"]),
        "placement": st.sampled_from(["strict", "lattice"]),
        "command": st.sampled_from(list(harness.COMMANDS[:-1])),
        "family": st.sampled_from(["", "fam.txt", "dir/f.txt"]),
        "delta": st.floats(1e-3, 0.999),
        "theta": st.floats(1e-3, math.pi / 2),
        "s": st.floats(1.001, 1.999),
        "c1": st.floats(1e-3, 0.4),
        "epsilon": st.floats(1e-3, 0.999),
        "sigma": st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=4).map(tuple),
    }
    if name in choices:
        return choices[name]
    if key.kind is int:
        return st.integers(2, 10**6)
    return st.floats(2.0, 1e6)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_emit_parse_roundtrip(data):
    names = data.draw(st.lists(st.sampled_from(sorted(harness.KEYS)), unique=True, max_size=8))
    cfg = harness.ExperimentConfig({k: data.draw(_value(k)) for k in names})
    if data.draw(st.booleans()):
        cfg.axes["delta"] = tuple(data.draw(st.lists(st.floats(1e-3, 0.999), min_size=1, max_size=3)))
    again = parse_config(emit(cfg))
    assert again == cfg
    assert emit(again) == emit(cfg)


# ---------------------------------------------------------------- commands


def test_volume_check_example(tmp_path):
    cfg = parse_config("theta = pi/4\ndelta = 0.1\nsamples = 10000000\nseed = 42\n")
    assert run_command("volume-check", cfg, tmp_path) == 0
    rep, data = read(tmp_path)
    res = rep["result"]
    assert res["exact"] == pytest.approx(1.97392e-3, rel=1e-5)
    assert abs(res["mc"] - res["exact"]) / res["exact"] < 0.02
    assert rep["pass"] is True and rep["version"] == __version__
    assert rep["config"]["seed"] == 42 and "samples" not in rep["defaults_applied"]
    assert data.startswith("theta,delta,n,exact,mc,standard_error,relative_error\n")


def test_rich_count_on_emitted_family_is_bit_identical(tmp_path):
    gen = tmp_path / "gen"
    assert run_command("spacing-gen", parse_config("delta = 1/16\nbig_n = 2\nseed = 3\n"), gen) == 0
    fam = gen / "family.txt"
    cfg = parse_config(f"family = {fam}\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run_command("rich-count", cfg, out) == 0
    a, b = ((o / "data.csv").read_bytes() for o in outs)
    assert a == b and a.startswith(b"r,count\n") and b"\r" not in a
    assert (outs[0] / "report.json").read_bytes() == (outs[1] / "report.json").read_bytes()
    spc = tmp_path / "chk"
    assert run_command("spacing-check", cfg, spc) == 0
    assert read(spc)[0]["result"]["spacing"]["max"] == 2


def test_report_is_sorted_json_without_timings(tmp_path):
    run_command("slice-check", parse_config("samples = 2000\n"), tmp_path)
    text = (tmp_path / "report.json").read_text()
    rep = json.loads(text)
    assert text == json.dumps(rep, sort_keys=True, indent=2) + "\n"
    flat = json.dumps(rep).lower()
    assert "time" not in flat and "elapsed" not in flat
    assert rep["result"]["disagreements"] == 0


def test_angle_and_dualslab_and_dichotomy(tmp_path):
    assert run_command("angle-check", parse_config("samples = 100\nn = 3\n"), tmp_path / "a") == 0
    assert run_command("dualslab-check", parse_config("delta = 1/64\nprobes = 1000\n"), tmp_path / "d") == 0
    rep, data = read(tmp_path / "d")
    assert -2.5 <= rep["result"]["slope"] <= -1.5 and data.count("\n") == 8
    assert run_command("dichotomy-check", parse_config("count = 2\nlayout = concentrated\n"), tmp_path / "h") == 0


def test_failed_check_exits_one(tmp_path):
    cfg = parse_config("delta = 1/64\nprobes = 500\nslope_lo = 0\nslope_hi = 1\n")
    assert run_command("dualslab-check", cfg, tmp_path) == 1
    assert read(tmp_path)[0]["pass"] is False


def test_errors_exit_two_with_reason(tmp_path):
    cfg = parse_config("theorem = t42\nspacing_kind = uniform-N\ndelta = 1/8\n")
    assert run_command("bound-verify", cfg, tmp_path) == 2
    rep, _ = read(tmp_path)
    assert rep["failure"]["type"] == "PreconditionError" and rep["pass"] is False
    assert run_command("nope", cfg, tmp_path / "x") == 2
    assert run_command("slice-check", parse_config("axis.seed = 1,2\n"), tmp_path / "y") == 2


def test_falconer_command(tmp_path):
    status = run_command("falconer", parse_config("delta = 1/32\nseed = 1\nepsilon = 0.5\n"), tmp_path)
    rep, data = read(tmp_path)
    res = rep["result"]
    assert res["incidence_ok"] and res["cs_ok"] and res["target_ok"]
    assert status == (0 if res["spacing_ok"] else 1)
    assert data.startswith("r,count\n")


# ---------------------------------------------------------------- sweeps


def test_sweep_bound_verify_t42(tmp_path):
    text = "command = bound-verify\ntheorem = t42\nspacing_kind = exact-H0\naxis.delta = 1/16,1/32,1/64\n"
    assert run_command("sweep", parse_config(text), tmp_path) == 0
    rep, data = read(tmp_path)
    lines = data.splitlines()
    assert lines[0] == "delta,pass,max_ratio" and len(lines) == 4
    assert isinstance(rep["result"]["fitted_exponent"], float)
    assert sorted(p.name for p in tmp_path.iterdir() if p.is_dir()) == ["delta=0.015625", "delta=0.03125", "delta=0.0625"]


def test_sweep_order_and_workers_independent(tmp_path):
    base = "command = slice-check\nsamples = 500\naxis.band = 1e-9,1e-3\n"
    one = tmp_path / "one"
    two = tmp_path / "two"
    three = tmp_path / "three"
    run_command("sweep", parse_config(base + "axis.seed = 1,2\n"), one)
    run_command("sweep", parse_config(base + "axis.seed = 2,1\nworkers = 2\n"), two)
    run_command("sweep", parse_config("command = slice-check\nsamples = 500\naxis.seed = 2,1\naxis.band = 1e-3,1e-9\n"), three)
    d1 = (one / "data.csv").read_text()
    assert d1 == (two / "data.csv").read_text() == (three / "data.csv").read_text()
    for cell in (p.name for p in one.iterdir() if p.is_dir()):
        assert (one / cell / "data.csv").read_bytes() == (two / cell / "data.csv").read_bytes()


def test_sweep_guards(tmp_path):
    assert run_command("sweep", parse_config("axis.seed = 1,2\n"), tmp_path / "a") == 2
    assert run_command("sweep", parse_config("command = slice-check\n"), tmp_path / "b") == 2
    text = "command = slice-check\nbudget = 3\naxis.seed = 1,2\naxis.band = 0.1,0.2\n"
    assert run_command("sweep", parse_config(text), tmp_path / "c") == 2
    assert "budget" in read(tmp_path / "c")[0]["failure"]["message"]


# ---------------------------------------------------------------- CLI


def test_cli_main(tmp_path, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("samples = 1000\nseed = 3\n")
    out = tmp_path / "o"
    assert main(["slice-check", "--config", str(conf), "--set", "seed=4", "--out", str(out)]) == 0
    rep, _ = read(out)
    assert rep["config"]["seed"] == 4 and rep["config"]["samples"] == 1000
    assert main(["slice-check", "--set", "bogus=1", "--out", str(tmp_path / "e")]) == 2
    err = capsys.readouterr().err
    assert "unknown key" in err and json.loads(err)["pass"] is False
    assert main(["slice-check", "--list-keys"]) == 0
    assert "delta = 0.03125" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "complextubes", "angle-check", "--set", "samples=20", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "report.json").exists()
