import json

import numpy as np
import pytest

from stccal.data import make_latent_blobs
from stccal.dataio import (CONFIG_KEYS, dump_json, load_dataset, load_run_config, parse_run_config,
                           read_matrix, save_dataset)
from stccal.errors import ConfigError, DataError, DatasetError
from stccal.evaluation import EvalConfig
from stccal.solver import ProblemConfig

DS = make_latent_blobs(n_samples=12, dims=(3, 2, 4), n_classes=3, seed=0)


def test_round_trip(tmp_path):
    manifest = save_dataset(DS, tmp_path)
    back = load_dataset(manifest)
    assert back.n_views == 3 and back.n_samples == 12
    for a, b in zip(DS.views, back.views):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(DS.labels, back.labels)


def test_missing_label_file_names_path(tmp_path):
    manifest = save_dataset(DS, tmp_path)
    (tmp_path / "labels.txt").unlink()
    with pytest.raises(DataError, match="labels.txt"):
        load_dataset(manifest)


def test_ragged_and_non_numeric_rows_report_line(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n3,4\n5\n")
    with pytest.raises(DataError, match="line 3"):
        read_matrix(p)
    p.write_text("1,2\n3,x\n")
    with pytest.raises(DataError, match=r"m.csv: line 2: non-numeric"):
        read_matrix(p)
    p.write_text("a,b\n1,2\n")
    np.testing.assert_array_equal(read_matrix(p, header=True), [[1.0, 2.0]])


def test_label_errors(tmp_path):
    manifest = save_dataset(DS, tmp_path)
    (tmp_path / "labels.txt").write_text("0\n1\nfoo\n")
    with pytest.raises(DataError, match="line 3"):
        load_dataset(manifest)
    (tmp_path / "labels.txt").write_text("0\n1\n")
    with pytest.raises(DatasetError, match="2 labels"):
        load_dataset(manifest)


def test_manifest_schema(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"views": ["a.csv"], "labels": "y.txt", "colour": 1}))
    with pytest.raises(ConfigError, match="colour"):
        load_dataset(p)
    p.write_text(json.dumps({"views": [], "labels": "y.txt"}))
    with pytest.raises(ConfigError):
        load_dataset(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="line 1"):
        load_dataset(p)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "absent.json")


def test_semicolon_delimiter(tmp_path):
    manifest = save_dataset(DS, tmp_path, delimiter=";")
    assert ";" in (tmp_path / "view0.csv").read_text()
    back = load_dataset(manifest)
    np.testing.assert_array_equal(back.views[1], DS.views[1])


def test_run_config_parsing(tmp_path):
    cfg, ecfg = parse_run_config({"r": 3, "lam": [0.1, 0.2], "repeats": 4, "method": "pca_knn"})
    assert cfg.r == 3 and cfg.lam == (0.1, 0.2) and ecfg.repeats == 4 and ecfg.method == "pca_knn"
    with pytest.raises(ConfigError) as err:
        parse_run_config({"bogus": 1, "r": "two", "laplacian_on": 1, "tol": True})
    msg = str(err.value)
    for part in ("unknown key 'bogus'", "'r'", "'laplacian_on'", "'tol'"):
        assert part in msg
    with pytest.raises(ConfigError):
        parse_run_config({"repeats": 0})
    with pytest.raises(ConfigError):
        parse_run_config({"gamma": 2.0})
    assert load_run_config(None) == (ProblemConfig(), EvalConfig())
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"max_iter": 7}))
    assert load_run_config(p)[0].max_iter == 7
    assert set(CONFIG_KEYS) == {f for f in ProblemConfig.__dataclass_fields__} | {
        f for f in EvalConfig.__dataclass_fields__}


def test_dump_json_is_canonical():
    assert dump_json({"b": 1, "a": [1.5, 2]}) == '{\n  "a": [\n    1.5,\n    2\n  ],\n  "b": 1\n}\n'
