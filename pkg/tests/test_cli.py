import csv
import json
from pathlib import Path

import numpy as np
import pytest

from stccal.cli import main
from stccal.data import make_latent_blobs
from stccal.dataio import save_dataset

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ("fit", "evaluate", "dim-sweep", "grid", "noise-sweep", "graph-export")


def key_tree(obj):
    """Nested key structure of a JSON document (values replaced by type names)."""
    if isinstance(obj, dict):
        return {k: key_tree(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [key_tree(obj[0])] if obj else []
    return type(obj).__name__ if obj is not None else "null"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ds = make_latent_blobs(n_samples=36, dims=(5, 4, 6), n_classes=3, separation=5.0, seed=0)
    manifest = save_dataset(ds, root / "data")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"repeats": 2, "max_iter": 25, "pca_dim": 4}))
    return root, manifest, cfg


def _run(workspace, command, out, *extra):
    root, manifest, cfg = workspace
    code = main([command, "--manifest", str(manifest), "--config", str(cfg),
                 "--out-dir", str(root / out), "--seed", "3", *extra])
    return code, root / out


SWEEP_ARGS = {
    "dim-sweep": ("--dims", "2,3"),
    "grid": ("--lams", "1e-4,1e-2", "--orders", "1,2"),
    "noise-sweep": ("--fractions", "0,0.1"),
    "graph-export": ("--view", "1"),
}


@pytest.mark.parametrize("command", COMMANDS)
def test_summary_keys_match_golden(workspace, command):
    code, out = _run(workspace, command, f"golden_{command}", *SWEEP_ARGS.get(command, ()))
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    golden = json.loads((GOLDEN / f"{command}_summary_keys.json").read_text())
    assert key_tree(summary) == golden


def test_fit_twice_is_byte_identical(workspace):
    _, a = _run(workspace, "fit", "fit_a")
    _, b = _run(workspace, "fit", "fit_b")
    for name in ("summary.json", "trace.csv", "projection_view0.csv", "projection_view2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "timing.json").read_text())["fit_seconds"] > 0


def test_grid_shape(workspace):
    _, out = _run(workspace, "grid", "grid", *SWEEP_ARGS["grid"])
    rows = list(csv.reader((out / "grid.csv").open()))
    assert rows[0] == ["lam\\order", "1", "2"]
    assert [r[0] for r in rows[1:]] == ["0.0001", "0.01"]
    assert all(len(r) == 3 for r in rows)
    long_rows = list(csv.reader((out / "grid_long.csv").open()))
    assert len(long_rows) == 5


def test_noise_zero_row_matches_evaluate(workspace):
    _, ev = _run(workspace, "evaluate", "eval")
    _, ns = _run(workspace, "noise-sweep", "noise", *SWEEP_ARGS["noise-sweep"])
    report = json.loads((ev / "summary.json").read_text())["report"]
    rows = json.loads((ns / "summary.json").read_text())["rows"]
    assert rows[0]["fraction"] == 0.0
    assert rows[0]["report"] == report


def test_parallel_sweep_matches_serial(workspace):
    _, s = _run(workspace, "grid", "grid_serial", *SWEEP_ARGS["grid"])
    _, p = _run(workspace, "grid", "grid_par", *SWEEP_ARGS["grid"], "--jobs", "2")
    assert (s / "summary.json").read_bytes() == (p / "summary.json").read_bytes()


def test_graph_export_matrix(workspace):
    _, out = _run(workspace, "graph-export", "graph", "--view", "0")
    w = np.loadtxt(out / "graph_view0_order2.csv", delimiter=",")
    assert w.shape == (36, 36)
    np.testing.assert_allclose(w, w.T, atol=1e-14)


def test_dim_sweep_skips_oversized_r(workspace):
    _, out = _run(workspace, "dim-sweep", "dims", "--dims", "2,9")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["skipped"] == [9] and [r["r"] for r in summary["rows"]] == [2]


def test_failures_exit_nonzero_with_one_line(workspace, capsys):
    root, manifest, _ = workspace
    bad = root / "bad.json"
    bad.write_text(json.dumps({"nope": 1, "r": "x"}))
    code = main(["fit", "--manifest", str(manifest), "--config", str(bad), "--out-dir", str(root / "x")])
    err = capsys.readouterr().err
    assert code == 1 and err.count("\n") == 1 and "nope" in err and "'r'" in err
    code = main(["fit", "--manifest", str(root / "missing.json"), "--out-dir", str(root / "x")])
    assert code == 1
    code = main(["noise-sweep", "--manifest", str(manifest), "--out-dir", str(root / "x"),
                 "--fractions", "0.5,2"])
    assert code == 1


def test_inputs_not_mutated(workspace):
    root, manifest, cfg = workspace
    before = {p.name: p.read_bytes() for p in manifest.parent.iterdir()}
    _run(workspace, "fit", "fit_c")
    after = {p.name: p.read_bytes() for p in manifest.parent.iterdir()}
    assert before == after
