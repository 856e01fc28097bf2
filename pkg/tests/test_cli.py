import json

import pytest

from covertree.cli import emit_plotdata, main, resolve_graph
from covertree.graph import complete_graph, save_graph


@pytest.fixture(autouse=True)
def one_worker(monkeypatch):
    monkeypatch.setenv("COVERTREE_WORKERS", "1")


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bands_on_k4(capsys):
    code, out, _ = run(["bands", "--graph", "gen:complete:4", "--grid-step", "0.05"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert len(obj["bands"]) == 1
    assert obj["bands"][0]["hi"] == pytest.approx(2 * 2**0.5, abs=0.05)


def test_bands_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for dest in (a, b):
        assert main(["bands", "--graph", "gen:wheel:4", "--grid-step", "0.05", "--out", str(dest)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_localized(tmp_path, capsys):
    rep = tmp_path / "rep.json"
    summ = tmp_path / "s.csv"
    code, _, _ = run(["verify", "--graph", "gen:localized:2", "--grid-step", "0.02",
                      "--report", str(rep), "--summary", str(summ)], capsys)
    assert code == 0
    obj = json.loads(rep.read_text())
    flagged = [p for p in obj["pairs"] if abs(p["lambda"] + 1) < 1e-8]
    assert flagged and all(p["class"] == "exceptional-adjacent" for p in flagged)
    assert summ.read_text().startswith("lambda,class")
    code, out, _ = run(["emit-plot", "--report", str(rep), "--kind", "margin-vs-lambda"], capsys)
    assert code == 0 and out.startswith("# sup-norm margin")


def test_verify_reuses_band_file(tmp_path, capsys):
    bands = tmp_path / "b.json"
    assert main(["bands", "--graph", "gen:petersen", "--grid-step", "0.05", "--out", str(bands)]) == 0
    code, out, _ = run(["verify", "--graph", "gen:petersen", "--bands", str(bands), "--rotations", "2"], capsys)
    assert code == 0
    assert json.loads(out)["bands"] == json.loads(bands.read_text())


def test_metrics_and_kernel_plot(tmp_path, capsys):
    out = tmp_path / "m.json"
    code, _, _ = run(["metrics", "--graph", "gen:tutte-coxeter", "--lambda", "0.5", "--s", "1.5,2",
                      "--out", str(out)], capsys)
    assert code == 0
    obj = json.loads(out.read_text())
    assert obj["z"] == pytest.approx((8 - 0.25) ** 0.5 / 4, abs=1e-9)
    assert [r["n"] for r in obj["kernel_mass"]] == [1, 2, 3]
    code, text, _ = run(["emit-plot", "--report", str(out), "--kind", "kernel-mass"], capsys)
    rows = [line.split() for line in text.splitlines() if not line.startswith("#")]
    assert code == 0 and [float(r[1]) for r in rows] == pytest.approx([1, 1 / 2, 1 / 3])


def test_metrics_outside_bulk_fails(capsys):
    code, out, _ = run(["metrics", "--graph", "gen:complete:4", "--lambda", "3.5"], capsys)
    assert code == 1 and json.loads(out)["class"] == "gap"


def test_cycle_command(tmp_path, capsys):
    rep = tmp_path / "c.json"
    code, _, _ = run(["cycle", "--n", "24", "--w", "3,-3", "--report", str(rep)], capsys)
    assert code == 0
    obj = json.loads(rep.read_text())
    assert obj["passed"] and len(obj["monodromy"]["bands"]) == 2


def test_ct_check(tmp_path, capsys):
    out = tmp_path / "ct.json"
    code, _, _ = run(["ct-check", "--graph", "gen:complete:4", "--lambda", "3.5", "--grid-step", "0.05",
                      "--out", str(out)], capsys)
    assert code == 0
    code, text, _ = run(["emit-plot", "--report", str(out), "--kind", "ct-decay"], capsys)
    assert code == 0 and text.splitlines()[1] == "# n S_n rhs"
    assert len(text.splitlines()) == 2 + 11


def test_ct_check_in_bulk_is_usage_error(capsys):
    code, _, err = run(["ct-check", "--graph", "gen:complete:4", "--lambda", "0", "--delta", "1"], capsys)
    assert code == 2 and "not gap" in err


def test_lift_sweep(tmp_path, capsys):
    base = tmp_path / "k4.json"
    save_graph(complete_graph(4, [0.3, -0.7, 0.1, 0.55]), str(base))
    csv_out, js = tmp_path / "sweep.csv", tmp_path / "sweep.json"
    code, _, _ = run(["lift-sweep", "--base", str(base), "--n", "10,30", "--seed", "7", "--grid-step", "0.02",
                      "--rotations", "2", "--out", str(csv_out), "--json", str(js)], capsys)
    assert code == 0
    lines = csv_out.read_text().splitlines()
    assert lines[0].split(",")[:4] == ["N", "n", "connected", "ell_G"]
    assert len(lines) == 3
    code, text, _ = run(["emit-plot", "--report", str(js), "--kind", "supnorm-vs-ell"], capsys)
    assert code == 0 and len(text.splitlines()) == 4



@pytest.mark.parametrize(
    "argv",
    [
        ["bands", "--graph", "gen:nonsense:3"],
        ["bands", "--graph", "/does/not/exist.json"],
        ["bands", "--graph", "gen:complete:4", "--grid-step", "-1"],
        ["bands", "--graph", "gen:complete:4", "--workers", "0"],
        ["emit-plot", "--report", "/does/not/exist.json", "--kind", "ct-decay"],
        ["no-such-command"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_bad_worker_env(monkeypatch, capsys):
    monkeypatch.setenv("COVERTREE_WORKERS", "many")
    assert main(["bands", "--graph", "gen:complete:4"]) == 2
    assert "COVERTREE_WORKERS" in capsys.readouterr().err


def test_malformed_graph_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": [{"id": 0, "w": 0}, {"id": 1, "w": 0}], "edges": [[0, 0]]}))
    code, _, err = run(["bands", "--graph", str(bad)], capsys)
    assert code == 2 and "self-loop" in err


def test_unknown_plot_kind(tmp_path, capsys):
    rep = tmp_path / "r.json"
    rep.write_text("{}")
    assert main(["emit-plot", "--report", str(rep), "--kind", "histogram"]) == 2
    assert main(["emit-plot", "--report", str(rep), "--kind", "ct-decay"]) == 2


def test_emit_plotdata_column_order():
    text = emit_plotdata({"kernel_mass": [{"n": 1, "mass": 1.0, "bound": 5.0}]}, "kernel-mass")
    assert text.splitlines() == ["# kernel mass against 32 z^-4 / n", "# n mass bound", "1 1 5"]


def test_resolve_graph_generators():
    assert resolve_graph("gen:petersen").n == 10
    assert resolve_graph("gen:tutte-coxeter").n == 30
    assert resolve_graph("gen:localized:3").n == 14
