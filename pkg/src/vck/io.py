"""CSV / JSON formats for kernels, sets, weights, plans and samples.

Matrices and plans are written with 17 significant digits and weights in
shortest round-trip form, so every artifact re-reads bit-identically.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
from pathlib import Path

import numpy as np

from .core import DiscreteSpace, PlanMeasure, ValidationError, make_space
from .sampling import MDSample

FLOAT_FMT = "%.17g"


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_matrix(path, header: bool = False) -> np.ndarray:
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1 if header else 0)
    except ValueError as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from exc
    return a


def write_matrix(path, a: np.ndarray) -> None:
    a = np.asarray(a)
    fmt = "%d" if a.dtype == bool or np.issubdtype(a.dtype, np.integer) else FLOAT_FMT
    np.savetxt(path, a.astype(int) if a.dtype == bool else a, fmt=fmt, delimiter=",")


def read_weights(path) -> DiscreteSpace:
    # decimal strings keep the exact rational value of what was written
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    return make_space([ln for ln in lines if ln])


def _writer(target):
    """Open ``target`` for writing unless it already is a text stream."""
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w")


def write_weights(path, weights) -> None:
    # shortest round-trip form, so "0.1" stays the rational 1/10 on re-read
    with _writer(path) as fh:
        fh.write("".join(repr(float(w)) + "\n" for w in weights))


def read_plan(path, shape: tuple[int, int] | None = None) -> PlanMeasure:
    text = Path(path).read_text().strip()
    if not text:
        if shape is None:
            raise ValidationError(f"empty plan file {path} and no shape given")
        return PlanMeasure([], [], [], shape)
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"cannot parse plan {path}: {exc}") from exc
    if a.shape[1] != 3:
        raise ValidationError("plan rows must be i,j,mass")
    rows, cols, mass = a[:, 0], a[:, 1], a[:, 2]
    if np.any(rows != np.round(rows)) or np.any(cols != np.round(cols)):
        raise ValidationError("plan indices must be integers")
    rows, cols = rows.astype(np.int64), cols.astype(np.int64)
    if shape is None:
        shape = (int(rows.max()) + 1, int(cols.max()) + 1)
    return PlanMeasure(rows, cols, mass, shape, signed=bool(np.any(mass < 0)))


def write_plan(path, plan: PlanMeasure) -> None:
    with _writer(path) as fh:
        for i, j, w in zip(plan.rows, plan.cols, plan.mass):
            fh.write(f"{i},{j},{FLOAT_FMT % w}\n")


def write_md(path, s: MDSample) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps({"k": s.k, "trials": s.trials, "seed": s.seed,
                                    "matrices": s.matrices.tolist()}))
        return
    t, i, j = np.meshgrid(np.arange(s.trials), np.arange(s.k), np.arange(s.k), indexing="ij")
    with open(path, "w") as fh:
        for a, b, c, v in zip(t.ravel(), i.ravel(), j.ravel(), s.matrices.ravel()):
            fh.write(f"{a},{b},{c},{FLOAT_FMT % v}\n")


def read_md(path, seed: int | None = None) -> MDSample:
    path = Path(path)
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        return MDSample(d["k"], d["trials"], np.array(d["matrices"]), d.get("seed"))
    a = np.loadtxt(path, delimiter=",", ndmin=2)
    t, i, j = (a[:, c].astype(np.int64) for c in range(3))
    trials, k = int(t.max()) + 1, int(max(i.max(), j.max())) + 1
    mats = np.zeros((trials, k, k))
    mats[t, i, j] = a[:, 3]
    return MDSample(k, trials, mats, seed)
