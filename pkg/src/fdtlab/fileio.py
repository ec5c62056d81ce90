"""Matrix/vector file handling and deterministic number formatting.

Matrices travel as headerless row-major CSV or as JSON arrays-of-arrays;
vectors as one-column CSV or a JSON array. All emitted floats use 17
significant digits with a '.' decimal separator so outputs round-trip and
are byte-reproducible.
"""

import json
from pathlib import Path

import numpy as np

from .errors import InputValidationError


def fmt(x) -> str:
    return format(float(x), ".17g")


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputValidationError(f"no such file: {path}")
    try:
        if path.suffix.lower() == ".json":
            data = np.asarray(json.loads(path.read_text()), dtype=float)
        else:
            data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputValidationError(f"could not parse matrix from {path}: {exc}") from exc
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.ndim != 2:
        raise InputValidationError(f"{path} does not contain a 2-d matrix")
    return data


def load_vector(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputValidationError(f"no such file: {path}")
    try:
        if path.suffix.lower() == ".json":
            data = np.asarray(json.loads(path.read_text()), dtype=float)
        else:
            data = np.loadtxt(path, delimiter=",", comments="#")
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputValidationError(f"could not parse vector from {path}: {exc}") from exc
    data = np.asarray(data, dtype=float)
    if data.ndim == 2 and 1 in data.shape:
        data = data.ravel()
    if data.ndim == 0:
        data = data.reshape(1)
    if data.ndim != 1:
        raise InputValidationError(f"{path} does not contain a 1-d vector")
    return data


def save_matrix_csv(path, matrix) -> None:
    rows = [",".join(fmt(x) for x in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(rows) + "\n")


def matrix_to_lists(matrix) -> list:
    return [[float(x) for x in row] for row in np.atleast_2d(matrix)]


def strict_keys(doc: dict, allowed, context: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise InputValidationError(f"unknown fields in {context}: {sorted(unknown)}")
