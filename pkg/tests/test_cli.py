import io
import json
import textwrap

import pytest

from bdqcd.cli import main
from bdqcd.config import parse_config
from bdqcd.errors import ConfigurationError

MINIMAL = textwrap.dedent("""
    scenario:
      N: 1
      M: 0
      hypotheses: {means: [0, 1]}
      rule: {kind: simultaneous, d: 1}
      h: 4
      master_seed: 7
""")


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    sc = cfg.scenario
    assert sc.T_max is None and sc.horizon == 100_000
    assert sc.trials == 20_000 and sc.stop == "single"
    assert cfg.metric == "delay"


def test_d_equal_m_rejected():
    text = MINIMAL.replace("N: 1", "N: 3").replace("M: 0", "M: 1").replace("d: 1", "d: 1")
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert any("M < d <= N" in p for p in exc.value.problems)


def test_unknown_attack_lists_kinds():
    with pytest.raises(ConfigurationError) as exc:
        parse_config(MINIMAL + "  attack: {kind: jam}\n")
    assert any("absent, silent_h0, always_alarm, reverse" in p for p in exc.value.problems)


def test_unknown_family_and_missing_seed():
    text = MINIMAL.replace("  master_seed: 7\n", "").replace(
        "hypotheses: {means: [0, 1]}",
        "hypotheses: {densities: [{family: cauchy}, {family: gaussian, mean: 1}]}")
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    msgs = " | ".join(exc.value.problems)
    assert "cauchy" in msgs and "master_seed" in msgs


def test_syntax_error_location():
    with pytest.raises(ConfigurationError) as exc:
        parse_config("scenario:\n  N: [1\n")
    assert "line" in exc.value.problems[0] and "column" in exc.value.problems[0]


def test_gamma_calibrates_h():
    cfg = parse_config(MINIMAL.replace("h: 4", "gamma: 1e4").replace("N: 1", "N: 5")
                       .replace("M: 0", "M: 2").replace("d: 1", "d: 5"))
    assert cfg.scenario.h == pytest.approx(4.0687, abs=1e-4)


def test_calibrate_command():
    code, out = run(["calibrate", "--N", "5", "--M", "2", "--d", "5", "--gamma", "1e4"])
    assert code == 0 and out.strip() == "4.06869"
    code, out = run(["calibrate", "--rule", "multishot", "--N", "5", "--M", "2", "--d", "3",
                     "--gamma", "1e4"])
    assert out.strip() == "11.5129"
    code, _ = run(["calibrate", "--N", "5", "--M", "2", "--d", "2", "--gamma", "1e4"])
    assert code == 1


def test_theory_command():
    code, out = run(["theory", "--means", "0,1,3", "--N", "5", "--M", "2"])
    rep = json.loads(out)
    assert code == 0 and rep["I_star"] == 0.5
    assert [r["j_star"] for r in rep["per_q"]] == [0, 1]


def test_simulate_trials_zero_is_validation_error(tmp_path):
    path = write(tmp_path, MINIMAL + "  trials: 0\n")
    code, _ = run(["simulate", path])
    assert code == 1


def test_simulate_csv_byte_identical(tmp_path):
    path = write(tmp_path, MINIMAL + "  trials: 200\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", path, "--csv", str(a)])[0] == 0
    assert run(["simulate", path, "--csv", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "# bdqcd-results v1"
    assert lines[1].split(",")[0] == "fingerprint"
    fp = parse_config(MINIMAL + "  trials: 200\n").fingerprint
    assert all(l.startswith(fp + ",") for l in lines[2:])
    assert json.loads((tmp_path / "a.csv.theory.json").read_text())["I_star"] == 0.5


def test_fingerprint_ignores_spelling_and_output():
    a = parse_config(MINIMAL + "  trials: 1e3\n")
    b = parse_config(MINIMAL + "  trials: 1000\noutput: {csv: x.csv}\n")
    c = parse_config(MINIMAL + "  trials: 1001\n")
    assert a.fingerprint == b.fingerprint != c.fingerprint


def test_sweep_command(tmp_path):
    path = write(tmp_path, MINIMAL + "  trials: 100\nsweep: {axis: h, values: [3, 4]}\n")
    plot = tmp_path / "p.csv"
    code, out = run(["sweep", path, "--plot-data", str(plot)])
    rows = out.strip().splitlines()[2:]
    assert code == 0 and len(rows) == 2
    assert plot.read_text().splitlines()[0] == "x,y,ci"


def test_runtime_error_exit_code(tmp_path):
    path = write(tmp_path, MINIMAL.replace("h: 4", "h: 1e9") + "  trials: 3\n  T_max: 20\n")
    code, _ = run(["simulate", path])
    assert code == 2


def test_game_command(tmp_path):
    text = textwrap.dedent("""
        scenario:
          N: 2
          M: 1
          hypotheses: {means: [0, 2]}
          rule: {kind: simultaneous, d: 2}
          h: 3
          trials: 100
          master_seed: 3
    """)
    code, out = run(["game", write(tmp_path, text), "--gammas", "20,50"])
    rows = out.strip().splitlines()[2:]
    assert code == 0 and len(rows) == 6
    assert any(",leader_cost," in r for r in rows)
