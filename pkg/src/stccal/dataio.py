"""
Dataset manifests, delimited matrix files and run-configuration files.

A manifest is a JSON object::

    {"views": ["view0.csv", "view1.csv"], "labels": "labels.txt",
     "delimiter": ",", "header": false, "names": ["img", "txt"]}

View files store one sample per row and one feature per column; the label
file holds one integer per line. Relative paths resolve against the
manifest's directory.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .data import MultiViewDataset
from .errors import ConfigError, DataError, DatasetError, ParameterError
from .evaluation import EvalConfig
from .solver import ProblemConfig

_MANIFEST_KEYS = {"views", "labels", "delimiter", "header", "names"}


@dataclass(frozen=True)
class Manifest:
    views: tuple
    labels: Path
    delimiter: str = ","
    header: bool = False
    names: tuple = ()

    @classmethod
    def from_dict(cls, raw: dict, base: Path) -> "Manifest":
        if not isinstance(raw, dict):
            raise ConfigError("manifest must be a JSON object")
        unknown = sorted(set(raw) - _MANIFEST_KEYS)
        if unknown:
            raise ConfigError(f"unknown manifest keys: {', '.join(unknown)}")
        for key in ("views", "labels"):
            if key not in raw:
                raise ConfigError(f"manifest is missing '{key}'")
        views = raw["views"]
        if not isinstance(views, list) or not views or not all(isinstance(v, str) for v in views):
            raise ConfigError("manifest 'views' must be a nonempty list of paths")
        if not isinstance(raw["labels"], str):
            raise ConfigError("manifest 'labels' must be a path")
        delim = raw.get("delimiter", ",")
        if not isinstance(delim, str) or len(delim) != 1:
            raise ConfigError(f"manifest 'delimiter' must be a single character, got {delim!r}")
        header = raw.get("header", False)
        if not isinstance(header, bool):
            raise ConfigError("manifest 'header' must be true or false")
        names = raw.get("names", [])
        if not isinstance(names, list) or (names and len(names) != len(views)):
            raise ConfigError("manifest 'names' must list one name per view")
        resolve = lambda s: (base / s) if not Path(s).is_absolute() else Path(s)  # noqa: E731
        return cls(tuple(resolve(v) for v in views), resolve(raw["labels"]), delim, header,
                   tuple(str(n) for n in names))


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    return Manifest.from_dict(raw, path.parent)


def read_matrix(path, delimiter: str = ",", header: bool = False) -> np.ndarray:
    """Rows-as-samples numeric file to an ``(n_rows, n_cols)`` array."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if header and lineno == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                bad = next(c for c in rec if not _is_float(c))
                raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(f"{path}: line {lineno}: ragged row with {len(vals)} cells, expected {width}")
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"label file not found: {path}")
    labels = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                labels.append(int(s))
            except ValueError:
                raise DataError(f"{path}: line {lineno}: label {s!r} is not an integer") from None
            if labels[-1] < 0:
                raise DataError(f"{path}: line {lineno}: negative label {labels[-1]}")
    return np.array(labels, dtype=np.int64)


def load_dataset(manifest_path) -> MultiViewDataset:
    """Read every view and the labels listed in a manifest."""
    man = read_manifest(manifest_path)
    labels = read_labels(man.labels)
    views = []
    for path in man.views:
        mat = read_matrix(path, man.delimiter, man.header)
        if mat.shape[0] != labels.size:
            raise DatasetError(f"{path}: {mat.shape[0]} rows but {man.labels} has {labels.size} labels")
        views.append(mat.T)
    return MultiViewDataset(tuple(views), labels, man.names)


def write_matrix(path, mat, delimiter: str = ",", header=None) -> None:
    """Write rows of ``mat`` with shortest round-trip float formatting."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in mat:
            w.writerow([repr(float(v)) for v in row])


def save_dataset(dataset: MultiViewDataset, directory, delimiter: str = ",") -> Path:
    """Write views, labels and a manifest into ``directory``; returns the manifest path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for p, x in enumerate(dataset.views):
        name = f"view{p}.csv"
        write_matrix(out / name, x.T, delimiter)
        names.append(name)
    (out / "labels.txt").write_text("".join(f"{int(y)}\n" for y in dataset.labels))
    manifest = {"views": names, "labels": "labels.txt", "delimiter": delimiter,
                "header": False, "names": list(dataset.names)}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


_PROBLEM_FIELDS = {f.name: f for f in fields(ProblemConfig)}
_EVAL_FIELDS = {f.name: f for f in fields(EvalConfig)}

# accepted JSON types per key (bool is excluded from numbers explicitly)
_TYPES = {
    "r": (int,), "lam": (int, float, list), "graph_method": (str,), "graph_k": (int,),
    "graph_sigma": (int, float, type(None)), "order": (int,), "order_weights": (list, type(None)),
    "t": (int, float), "gamma": (int, float), "max_iter": (int,), "tol": (int, float),
    "seed": (int,), "init": (str,), "sparsity_on": (bool,), "laplacian_on": (bool,),
    "orthogonality_on": (bool,), "line_search_on": (str,), "ssn_max_iter": (int,),
    "repeats": (int,), "test_ratio": (int, float), "knn_k": (int,), "pca_dim": (int,),
    "method": (str,),
}
CONFIG_KEYS = tuple(sorted(_TYPES))


def _type_ok(key, value) -> bool:
    allowed = _TYPES[key]
    if isinstance(value, bool):
        return bool in allowed
    if isinstance(value, list):
        return list in allowed and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    return isinstance(value, allowed)


def parse_run_config(raw: dict) -> tuple[ProblemConfig, EvalConfig]:
    """
    Validate a flat key/value mapping into problem and evaluation configs.

    All unknown keys and type errors are reported together before any value
    checks run.
    """
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    problems = [f"unknown key '{k}'" for k in sorted(raw) if k not in _TYPES]
    problems += [f"key '{k}' has invalid type {type(v).__name__}"
                 for k, v in sorted(raw.items()) if k in _TYPES and not _type_ok(k, v)]
    if problems:
        raise ConfigError("invalid run config: " + "; ".join(problems))
    pvals = {k: v for k, v in raw.items() if k in _PROBLEM_FIELDS}
    evals = {k: v for k, v in raw.items() if k in _EVAL_FIELDS}
    try:
        return ProblemConfig(**pvals), EvalConfig(**evals)
    except ParameterError as exc:
        raise ConfigError(f"invalid run config: {exc}") from exc


def load_run_config(path) -> tuple[ProblemConfig, EvalConfig]:
    if path is None:
        return ProblemConfig(), EvalConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    return parse_run_config(raw)


def dump_json(obj) -> str:
    """Canonical JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
