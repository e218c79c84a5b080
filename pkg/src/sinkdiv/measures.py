"""Discrete measures: validated weight/position arrays plus CSV/JSON I/O.

A measure is a weighted point cloud. Construction goes through
:func:`from_arrays`, which drops zero-weight atoms, renormalizes the total
mass to one, and rejects malformed input, so every ``DiscreteMeasure`` in the
rest of the package can assume strictly positive weights and finite
coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeasure, FormatError, InvalidInput, IoError

__all__ = [
    "DiscreteMeasure",
    "from_arrays",
    "load_csv",
    "save_csv",
    "load_json",
    "save_json",
    "sample_uniform_interval",
    "sample_unit_square",
]


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finite positive measure of unit mass on ``n`` points in ``R^d``.

    Attributes:
        weights: shape ``(n,)``, strictly positive, sums to 1 within 1e-12.
        positions: shape ``(n, d)`` float64 coordinates.
    """

    weights: np.ndarray
    positions: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)


def from_arrays(weights, positions) -> DiscreteMeasure:
    """Build a measure from raw arrays.

    Zero-weight atoms are dropped and the remaining weights renormalized to
    total mass one. Raises ``InvalidInput`` for negative, NaN or infinite
    entries or mismatched lengths, and ``DegenerateMeasure`` if no atom
    survives filtering.
    """
    w = np.asarray(weights, dtype=np.float64)
    x = np.asarray(positions, dtype=np.float64)
    if w.ndim != 1:
        raise InvalidInput(f"weights must be one-dimensional, got shape {w.shape}")
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidInput(f"positions must be (n, d), got shape {x.shape}")
    if w.shape[0] != x.shape[0]:
        raise InvalidInput(
            f"{w.shape[0]} weights but {x.shape[0]} positions"
        )
    if not np.all(np.isfinite(w)):
        raise InvalidInput("weights contain NaN or infinite entries")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("positions contain NaN or infinite entries")
    if np.any(w < 0):
        raise InvalidInput("weights must be nonnegative")
    keep = w > 0
    if not np.any(keep):
        raise DegenerateMeasure("measure has no atoms with positive weight")
    w = w[keep]
    x = x[keep]
    total = w.sum()
    # Normalize to unit mass, but leave already-normalized weights bit-exact
    # so that save -> load is the identity.
    if abs(total - 1.0) > 1e-12:
        w = w / total
    else:
        w = w.copy()
    w.setflags(write=False)
    x = np.ascontiguousarray(x)
    x.setflags(write=False)
    return DiscreteMeasure(weights=w, positions=x)


def _parse_rows(rows: list[list[str]], source: str) -> DiscreteMeasure:
    if not rows:
        raise FormatError(f"{source}: no data rows")
    start = 0
    try:
        [float(tok) for tok in rows[0]]
    except ValueError:
        start = 1  # header row
    body = rows[start:]
    if not body:
        raise FormatError(f"{source}: no data rows after header")
    width = len(body[0])
    if width < 2:
        raise FormatError(f"{source}: rows need a weight and at least one coordinate")
    values = []
    for i, row in enumerate(body):
        if len(row) != width:
            raise FormatError(
                f"{source}: row {i + start} has {len(row)} fields, expected {width}"
            )
        try:
            values.append([float(tok) for tok in row])
        except ValueError as exc:
            raise FormatError(f"{source}: row {i + start}: {exc}") from exc
    arr = np.asarray(values, dtype=np.float64)
    return from_arrays(arr[:, 0], arr[:, 1:])


def load_csv(path) -> DiscreteMeasure:
    """Read a measure from CSV rows ``w,x1,...,xD`` (optional header)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = [
        [tok.strip() for tok in line.split(",")]
        for line in text.splitlines()
        if line.strip()
    ]
    return _parse_rows(rows, str(path))


def save_csv(measure: DiscreteMeasure, path) -> None:
    """Write ``w,x1,...,xD`` rows with full float64 round-trip precision."""
    lines = []
    for w, pos in zip(measure.weights, measure.positions):
        fields = [format(w, ".17g")] + [format(c, ".17g") for c in pos]
        lines.append(",".join(fields))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_json(path) -> DiscreteMeasure:
    """Read a measure from ``{"weights": [...], "positions": [[...], ...]}``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "weights" not in payload or "positions" not in payload:
        raise FormatError(f"{path}: expected keys 'weights' and 'positions'")
    try:
        return from_arrays(payload["weights"], payload["positions"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (InvalidInput, DegenerateMeasure)):
            raise
        raise FormatError(f"{path}: {exc}") from exc


def save_json(measure: DiscreteMeasure, path) -> None:
    payload = {
        "weights": measure.weights.tolist(),
        "positions": measure.positions.tolist(),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def sample_uniform_interval(n: int, lo: float, hi: float, seed=None) -> DiscreteMeasure:
    """Uniform weights on ``n`` i.i.d. points drawn uniformly from [lo, hi]."""
    if n < 1:
        raise DegenerateMeasure(f"need at least one sample, got n={n}")
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InvalidInput(f"need finite lo < hi, got [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n, 1))
    return from_arrays(np.full(n, 1.0 / n), pts)


def sample_unit_square(n: int, seed=None) -> DiscreteMeasure:
    """Uniform weights on ``n`` i.i.d. points drawn uniformly from [0, 1]^2."""
    if n < 1:
        raise DegenerateMeasure(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n, 2))
    return from_arrays(np.full(n, 1.0 / n), pts)
