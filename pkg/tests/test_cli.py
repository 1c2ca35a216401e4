import json
import subprocess
import sys

import numpy as np
import pytest

from fdrkit.cli import main
from fdrkit.ingest import load_zvalues, read_table, save_zvalues, t_to_z
from fdrkit.sim import PRIOR_TWO_GROUPS, simulate_two_groups


@pytest.fixture
def zfile(tmp_path):
    z, _ = simulate_two_groups(PRIOR_TWO_GROUPS, 2000, seed=7)
    path = tmp_path / "z.csv"
    save_zvalues(path, z)
    return path


def _config_line(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# fdrkit config: ")
    return json.loads(first[len("# fdrkit config: "):])


def test_fit_writes_outputs(zfile, tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["fit", "--in", str(zfile), "--out", str(out), "--null", "analytic", "--q", "0.1"]) == 0
    for name in ("fdr.csv", "null.json", "power.json", "curve.csv"):
        assert (out / name).exists()
    header, rows, _ = read_table(out / "fdr.csv")
    assert header == ["id", "z", "fdr", "Fdr_left", "Fdr_right", "selected_bh", "selected_fdr20"]
    assert len(rows) == 2000
    assert _config_line(out / "fdr.csv")["options"]["null"] == "analytic"
    null = json.loads((out / "null.json").read_text())
    assert null["null"]["method"] == "analytic" and null["theoretical"]["sigma0"] == 1.0
    assert "config" in null
    text = capsys.readouterr().out
    assert "analytic" in text and "theoretical" in text


def test_fit_is_byte_identical_on_rerun(zfile, tmp_path):
    out = tmp_path / "run"
    assert main(["fit", "--in", str(zfile), "--out", str(out)]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["fit", "--in", str(zfile), "--out", str(out)]) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_exit_codes(zfile, tmp_path, capsys):
    assert main(["fit", "--in", str(zfile), "--out", str(tmp_path), "--q", "1.5"]) == 2
    assert main(["fit", "--in", str(zfile), "--out", str(tmp_path), "--bins", "5"]) == 2
    assert main(["fit", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    assert main(["fit", "--bogus"]) == 2
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\nnope\n")
    assert main(["fit", "--in", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_transform_t(tmp_path):
    src = tmp_path / "t.csv"
    src.write_text("id,t\na,2.5\nb,-1.0\n")
    out = tmp_path / "o"
    assert main(["transform", "--in", str(src), "--out", str(out), "--kind", "t", "--df", "13"]) == 0
    z = load_zvalues(out / "z.csv")
    assert z.ids == ("a", "b")
    np.testing.assert_allclose(z.values, t_to_z([2.5, -1.0], 13), rtol=1e-15)
    assert main(["transform", "--in", str(src), "--out", str(out), "--kind", "t"]) == 2


def test_simulate_uses_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("FDRKIT_SEED", "99")
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--experiment", "fig8", "--reps", "2"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    assert ra["seed"] == 99 and ra["config"]["seed"] == 99
    assert ra["records"] == rb["records"]
    monkeypatch.setenv("FDRKIT_SEED", "x")
    assert main(args + ["--out", str(a)]) == 2


def test_onegroup(tmp_path):
    prior = tmp_path / "prior.json"
    prior.write_text(json.dumps({"components": [{"weight": 0.9, "mean": 0.0, "sd": 0.5},
                                                {"weight": 0.1, "mean": 2.5, "sd": 0.5}]}))
    out = tmp_path / "o"
    assert main(["onegroup", "--in", str(prior), "--out", str(out)]) == 0
    res = json.loads((out / "onegroup.json").read_text())
    assert res["cumulants"]["E0"] == pytest.approx(0.01808, abs=1e-4)
    assert 0.92 <= res["taylor_nulls"]["J2"]["p0_raw"] <= 0.94
    prior.write_text("{not json")
    assert main(["onegroup", "--in", str(prior), "--out", str(out)]) == 2
    prior.write_text(json.dumps({"weights": [1.0]}))
    assert main(["onegroup", "--in", str(prior), "--out", str(out)]) == 1


def test_intervals(tmp_path):
    rng = np.random.default_rng(1)
    mu = np.where(rng.random(3000) < 0.1, -3.0, 0.0)
    z = mu + rng.standard_normal(3000)
    zpath, tpath = tmp_path / "z.csv", tmp_path / "truth.csv"
    save_zvalues(zpath, z)
    tpath.write_text("mu\n" + "\n".join(str(float(m)) for m in mu) + "\n")
    out = tmp_path / "o"
    assert main(["intervals", "--in", str(zpath), "--out", str(out), "--q", "0.05", "--side", "left",
                 "--interval-mode", "by", "--truth", str(tpath)]) == 0
    summary = json.loads((out / "intervals.json").read_text())
    assert summary["mode"] == "by" and summary["R"] > 0
    header, rows, _ = read_table(out / "intervals.csv")
    assert header[-1] == "covered" and len(rows) == summary["R"]


def test_enrich(tmp_path):
    rng = np.random.default_rng(2)
    X = rng.standard_normal((40, 8))
    X[:5, 4:] += 2.0
    lines = ["id\t" + "\t".join(f"c{j}" for j in range(8))]
    lines += [f"g{i}\t" + "\t".join(str(float(v)) for v in X[i]) for i in range(40)]
    (tmp_path / "m.tsv").write_text("\n".join(lines) + "\n")
    (tmp_path / "d.tsv").write_text("".join(f"c{j}\t{'ctl' if j < 4 else 'trt'}\n" for j in range(8)))
    (tmp_path / "s.gmt").write_text("up\tshifted\tg0\tg1\tg2\tg3\tg4\nrand\tplain\tg20\tg21\tg22\n")
    out = tmp_path / "o"
    base = ["enrich", "--matrix", str(tmp_path / "m.tsv"), "--design", str(tmp_path / "d.tsv"),
            "--sets", str(tmp_path / "s.gmt"), "--out", str(out), "--seed", "5", "--B", "199"]
    assert main(base + ["--method", "restand"]) == 0
    header, rows, _ = read_table(out / "enrich.csv")
    p = {r[0]: float(r[header.index("p_value")]) for r in rows}
    assert p["up"] < 0.05
    assert main(base[:-2] + ["--B", "10"]) == 2


def test_module_entry_point(zfile, tmp_path):
    res = subprocess.run([sys.executable, "-m", "fdrkit", "fit", "--in", str(zfile), "--out",
                          str(tmp_path / "o"), "--null", "theoretical"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "fdrkit", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "fdrkit" in res.stdout
