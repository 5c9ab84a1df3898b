import json
import math

import numpy as np
import pytest

from delone.cli import main
from delone.generators import PointSetWindow


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def last_json(stdout: str) -> dict:
    return json.loads(stdout.strip().splitlines()[-1])


def test_gen_lattice_point_count(tmp_path, capsys):
    out = str(tmp_path / "lat.pts")
    code, stdout, _ = run(capsys, "gen", "lattice", "--d", "2", "--W", "10",
                          "--out", out)
    assert code == 0
    summary = last_json(stdout)
    assert summary["n_points"] == 317
    assert summary["delone_ok"] is True
    assert PointSetWindow.load(out).n_points == 317


def test_gen_unknown_kind_fails_with_json_error(tmp_path, capsys):
    code, _, err = run(capsys, "density", str(tmp_path / "missing.json"),
                       "--F", "AREA", "--alpha-min", "1", "--alpha-max", "2")
    assert code == 1
    payload = json.loads(err.strip())
    assert "error" in payload and "message" in payload


def test_tri_and_density_roundtrip(tmp_path, capsys):
    pts = str(tmp_path / "w.pts")
    code, stdout, _ = run(capsys, "gen", "lattice", "--W", "12", "--jitter",
                          "--seed", "3", "--out", pts)
    assert code == 0
    tri = str(tmp_path / "w.tri.json")
    code, stdout, _ = run(capsys, "tri", pts, "--out", tri)
    assert code == 0
    cells = last_json(stdout)["cells"]
    assert cells > 100

    csv_path = str(tmp_path / "dens.csv")
    code, stdout, _ = run(
        capsys, "density", tri, "--F", "AREA", "--alpha-min", "4",
        "--alpha-max", "9", "--ratio", "1.2", "--window-radius", "12",
        "--q-bound", "0.8", "--out", csv_path,
    )
    assert code == 0
    lines = open(csv_path).read().splitlines()
    assert lines[0].startswith("alpha,cells_vertexrule")
    assert len(lines) > 3
    manifest = json.loads(open(csv_path + ".manifest.json").read())
    assert manifest["schema"] == 1 and manifest["command"] == "density"


def test_density_rerun_byte_identical(tmp_path, capsys):
    pts = str(tmp_path / "w.pts")
    run(capsys, "gen", "lattice", "--W", "10", "--jitter", "--seed", "5",
        "--out", pts)
    tri = str(tmp_path / "w.tri.json")
    run(capsys, "tri", pts, "--out", tri)
    outs = []
    for name in ("a.csv", "b.csv"):
        path = str(tmp_path / name)
        code, _, _ = run(capsys, "density", tri, "--F", "F5", "--alpha-min",
                         "3", "--alpha-max", "7", "--window-radius", "10",
                         "--q-bound", "0.8", "--out", path)
        assert code == 0
        outs.append(open(path, "rb").read())
    assert outs[0] == outs[1]


def test_legalize_flow(tmp_path, capsys):
    from delone.delaunay import delaunay_2d
    from delone.triangulation import is_locally_delaunay, reverse_flip

    rng = np.random.default_rng(12)
    cx = delaunay_2d(rng.uniform(size=(18, 2)) * 5).copy()
    flipped = 0
    for facet in list(cx.interior_facets()):
        if flipped >= 4:
            break
        try:
            if is_locally_delaunay(cx, facet):
                reverse_flip(cx, facet)
                flipped += 1
        except Exception:
            continue
    src = tmp_path / "scrambled.json"
    src.write_text(cx.to_json())
    out = str(tmp_path / "legal.json")
    code, stdout, _ = run(capsys, "tri", "--legalize", str(src), "--out", out)
    assert code == 0
    assert last_json(stdout)["flips"] >= flipped
    log = json.loads(open(out + ".fliplog.json").read())
    for entry in log["flips"]:
        assert entry["after"] <= entry["before"] + 1e-9


def test_flipcheck_cli(tmp_path, capsys):
    out = str(tmp_path / "fc.json")
    code, stdout, _ = run(capsys, "flipcheck", "--F", "F5", "--trials", "40",
                          "--seed", "1", "--out", out)
    assert code == 0
    assert last_json(stdout)["violations"] == 0
    report = json.loads(open(out).read())
    assert report["trials"] == 40 and report["passed"] is True


def test_flipcheck_threads_env(tmp_path, capsys, monkeypatch):
    results = []
    for workers in ("1", "2"):
        monkeypatch.setenv("DELONE_THREADS", workers)
        out = str(tmp_path / f"fc{workers}.json")
        code, stdout, _ = run(capsys, "flipcheck", "--F", "F1:c1=1",
                              "--trials", "30", "--seed", "2", "--out", out)
        assert code == 0
        assert last_json(stdout)["passed"] is True
        results.append(json.loads(open(out).read()))
    assert results[0] == results[1]  # worker count must not change the trials


def test_gcheck_cli(tmp_path, capsys):
    out = str(tmp_path / "gc.json")
    code, stdout, _ = run(capsys, "gcheck", "--F", "FE", "--trials", "8",
                          "--n", "5..7", "--seed", "3", "--out", out)
    assert code == 0
    assert last_json(stdout)["violations"] == 0


def test_strips_cli(tmp_path, capsys):
    out = str(tmp_path / "strips.csv")
    code, stdout, _ = run(
        capsys, "strips", "--F", "F1:c1=1", "--blocks", "4",
        "--a", "1", "--phi", repr(math.pi / 6),
        "--c", "1.6", "--psi", repr(math.pi / 5), "--out", out,
    )
    assert code == 0
    summary = last_json(stdout)
    assert summary["verdict"] == "PASS"
    assert len(open(out).read().splitlines()) == 5


def test_cube3d_cli(tmp_path, capsys):
    out = str(tmp_path / "cube.csv")
    code, stdout, _ = run(capsys, "cube3d", "--window", "4", "--out", out)
    assert code == 0
    summary = last_json(stdout)
    assert summary["all_seven"] is True
    assert summary["tent_volume_max_error"] < 1e-9
    # CSV cells must be plain round-trip decimals
    lines = open(out).read().splitlines()
    assert len(lines) == summary["interior_cubes"] + 1
    for line in lines[1:]:
        cells = line.split(",")
        assert len(cells) == 8
        assert repr(float(cells[4])) == cells[4]
        assert float(cells[4]) == pytest.approx(float(cells[6]), abs=1e-9)


def test_counts_cli(tmp_path, capsys):
    pts = str(tmp_path / "w.pts")
    run(capsys, "gen", "lattice", "--W", "14", "--jitter", "--seed", "9",
        "--out", pts)
    out = str(tmp_path / "counts.json")
    code, stdout, _ = run(capsys, "counts", pts, "--out", out)
    assert code == 0
    assert last_json(stdout)["ok"] is True


def test_compare_cli(tmp_path, capsys):
    pts = str(tmp_path / "w.pts")
    run(capsys, "gen", "lattice", "--W", "16", "--jitter", "--seed", "4",
        "--out", pts)
    out = str(tmp_path / "cmp.csv")
    code, stdout, _ = run(capsys, "compare", pts, "--F", "F5",
                          "--reverse-flips", "8", "--seed", "4",
                          "--alpha-min", "5", "--alpha-max", "11",
                          "--out", out)
    assert code == 0
    assert last_json(stdout)["passed"] is True


def test_oracle_cli(tmp_path, capsys):
    rng = np.random.default_rng(7)
    w = PointSetWindow(dim=2, points=rng.uniform(size=(6, 2)) * 2,
                       r=0.01, R=2.0, window_radius=2.0)
    pts = str(tmp_path / "small.pts")
    w.save(pts)
    out = str(tmp_path / "oracle.json")
    code, stdout, _ = run(capsys, "oracle", pts, "--F", "F5", "--out", out)
    assert code == 0
    assert last_json(stdout)["argmin_is_delaunay"] is True
    report = json.loads(open(out).read())
    assert report["n_triangulations"] >= 1
