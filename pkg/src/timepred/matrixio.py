"""On-disk formats for series matrices and their label sidecars.

Matrices travel either as CSV (optional header row, one time step per data
row, 64-bit reals) or as a compact binary format: the 4-byte magic "TPD1",
T and d as little-endian uint32, then T*d little-endian float64 values in
row-major order -- exactly 12 + 8*T*d bytes.  Loaders reject NaN/Inf.

Labels ride in a JSON sidecar next to the matrix with the true change
indices, family, seed, and affected dimensions.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .cpd_core import as_matrix
from .errors import FormatError

MATRIX_MAGIC = b"TPD1"


def sidecar_path(matrix_path) -> Path:
    """Conventional location of the label sidecar for a matrix file."""
    p = Path(matrix_path)
    return p.with_name(p.name + ".labels.json")


def save_matrix_binary(path, series) -> None:
    X = as_matrix(series)
    T, d = X.shape
    if T >= 2**32 or d >= 2**32:
        raise FormatError(f"matrix shape {X.shape} exceeds the uint32 header range")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", T, d))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def save_matrix_csv(path, series, header: bool = True) -> None:
    X = as_matrix(series)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(",".join(f"dim_{j}" for j in range(X.shape[1])) + "\n")
        # 17 significant digits round-trip float64 exactly.
        np.savetxt(fh, X, fmt="%.17g", delimiter=",")


def save_matrix(path, series, fmt: str = "binary") -> None:
    if fmt == "binary":
        save_matrix_binary(path, series)
    elif fmt == "csv":
        save_matrix_csv(path, series)
    else:
        raise FormatError(f"unknown matrix format {fmt!r}, expected 'binary' or 'csv'")


def _load_binary(blob: bytes, path) -> np.ndarray:
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated binary matrix header")
    T, d = struct.unpack("<II", blob[4:12])
    if T < 1 or d < 1:
        raise FormatError(f"{path}: invalid matrix shape ({T}, {d})")
    expected = 12 + 8 * T * d
    if len(blob) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for shape ({T}, {d}), got {len(blob)}"
        )
    X = np.frombuffer(blob, dtype="<f8", offset=12).reshape(T, d).copy()
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path}: matrix contains NaN or Inf entries")
    return X


def _load_csv(text: str, path) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty CSV matrix")
    skip = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        skip = 1  # header row
    try:
        X = np.loadtxt(io.StringIO("\n".join(lines[skip:])), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed CSV matrix ({exc})") from exc
    if X.size == 0:
        raise FormatError(f"{path}: CSV matrix has no data rows")
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path}: matrix contains NaN or Inf entries")
    return np.ascontiguousarray(X, dtype=np.float64)


def load_matrix(path) -> np.ndarray:
    """Load a matrix file, sniffing binary by its magic and falling back to CSV."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] == MATRIX_MAGIC:
        return _load_binary(blob, path)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: neither a TPD1 binary matrix nor decodable CSV") from exc
    return _load_csv(text, path)


def save_labels(path, true_cps, family: str, seed: int, affected_dims,
                params: dict | None = None) -> None:
    """Write the JSON label sidecar; extra generation parameters ride along."""
    doc = {
        "true_cps": [int(t) for t in true_cps],
        "family": family,
        "seed": int(seed),
        "affected_dims": [int(j) for j in affected_dims],
        "version": __version__,
        "params": params or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_labels(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed label sidecar ({exc})") from exc
    for key in ("true_cps", "family", "seed", "affected_dims"):
        if key not in doc:
            raise FormatError(f"{path}: label sidecar is missing the {key!r} field")
    if any(int(t) <= 0 for t in doc["true_cps"]):
        raise FormatError(f"{path}: change indices must be positive, got {doc['true_cps']}")
    return doc
