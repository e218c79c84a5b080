"""Ground costs and kernels, evaluated blockwise and on the fly.

The transport cost is ``C(x, y) = |x - y|^p`` with exponent ``p`` in {1, 2}.
Kernel losses use one of three negative-definite / positive kernels:

* ``energy``:    ``k(x, y) = -|x - y|``
* ``gaussian``:  ``k(x, y) = exp(-|x - y|^2 / (2 sigma^2))``
* ``laplacian``: ``k(x, y) = exp(-|x - y| / sigma)``

Block evaluators accumulate squared distances one coordinate at a time in a
fixed order, so a block computed on a slice is bit-identical to the matching
slice of a block computed on the full arrays. The reduction engine relies on
this for its streaming/dense equivalence guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

__all__ = ["CostSpec", "MmdKernelSpec", "cost", "mmd_kernel", "gibbs_weight"]

KERNEL_KINDS = ("energy", "gaussian", "laplacian")


@dataclass(frozen=True)
class CostSpec:
    """Ground cost ``|x - y|^p`` together with the blur scale epsilon.

    ``epsilon`` is expressed in the same units as the cost itself; no
    rescaling by the exponent or the data diameter is applied.
    """

    p: int
    epsilon: float

    def __post_init__(self):
        if self.p not in (1, 2):
            raise InvalidInput(f"cost exponent must be 1 or 2, got {self.p}")
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise InvalidInput(f"epsilon must be positive and finite, got {self.epsilon}")


@dataclass(frozen=True)
class MmdKernelSpec:
    """Kernel family and bandwidth for maximum-mean-discrepancy losses."""

    kind: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidInput(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise InvalidInput(f"sigma must be positive and finite, got {self.sigma}")


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.shape != yv.shape:
        raise InvalidInput(f"point dimensions differ: {xv.shape[0]} vs {yv.shape[0]}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise InvalidInput("points contain NaN or infinite entries")
    return xv, yv


def cost(spec: CostSpec, x, y) -> float:
    """Pointwise cost ``|x - y|^p``."""
    xv, yv = _check_pair(x, y)
    sq = float(np.dot(xv - yv, xv - yv))
    return np.sqrt(sq) if spec.p == 1 else sq


def gibbs_weight(spec: CostSpec, x, y) -> float:
    """Gibbs kernel value ``exp(-C(x, y) / epsilon)``."""
    return float(np.exp(-cost(spec, x, y) / spec.epsilon))


def mmd_kernel(kspec: MmdKernelSpec, x, y) -> float:
    """Pointwise kernel evaluation for the configured family."""
    xv, yv = _check_pair(x, y)
    sq = float(np.dot(xv - yv, xv - yv))
    if kspec.kind == "energy":
        return -np.sqrt(sq)
    if kspec.kind == "gaussian":
        return float(np.exp(-sq / (2.0 * kspec.sigma**2)))
    return float(np.exp(-np.sqrt(sq) / kspec.sigma))


# ---------------------------------------------------------------------------
# Block evaluators (internal API used by the reduction engine)
# ---------------------------------------------------------------------------


def sq_dist_block(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pairwise squared distances, coordinates accumulated in index order."""
    n, m = xs.shape[0], ys.shape[0]
    acc = np.zeros((n, m), dtype=np.float64)
    for d in range(xs.shape[1]):
        diff = xs[:, d, None] - ys[None, :, d]
        acc += diff * diff
    return acc


def cost_block(spec: CostSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pairwise cost matrix block ``C(xs_i, ys_j)``."""
    sq = sq_dist_block(xs, ys)
    return np.sqrt(sq) if spec.p == 1 else sq


def cost_grad_block(spec: CostSpec, xs: np.ndarray, ys: np.ndarray):
    """Cost block plus its gradient in the first argument.

    Returns ``(C, G)`` with ``C`` of shape (n, m) and ``G`` of shape
    (n, m, d) holding the derivative of ``C(x_i, y_j)`` with respect to
    ``x_i``. For ``p = 1`` the subgradient at coincident points is zero.
    """
    n, m, d = xs.shape[0], ys.shape[0], xs.shape[1]
    diffs = np.empty((n, m, d), dtype=np.float64)
    for k in range(d):
        diffs[:, :, k] = xs[:, k, None] - ys[None, :, k]
    sq = np.zeros((n, m), dtype=np.float64)
    for k in range(d):
        sq += diffs[:, :, k] * diffs[:, :, k]
    if spec.p == 2:
        return sq, 2.0 * diffs
    dist = np.sqrt(sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(dist > 0.0, 1.0 / dist, 0.0)
    return dist, diffs * inv[:, :, None]


def kernel_block(kspec: MmdKernelSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pairwise kernel matrix block ``k(xs_i, ys_j)``."""
    sq = sq_dist_block(xs, ys)
    if kspec.kind == "energy":
        return -np.sqrt(sq)
    if kspec.kind == "gaussian":
        return np.exp(sq * (-0.5 / kspec.sigma**2))
    return np.exp(np.sqrt(sq) * (-1.0 / kspec.sigma))


def kernel_grad_block(kspec: MmdKernelSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Derivative of ``k(x_i, y_j)`` with respect to ``x_i``, shape (n, m, d).

    Distance-based kernels use subgradient zero at coincident points.
    """
    n, m, d = xs.shape[0], ys.shape[0], xs.shape[1]
    diffs = np.empty((n, m, d), dtype=np.float64)
    for k in range(d):
        diffs[:, :, k] = xs[:, k, None] - ys[None, :, k]
    sq = np.zeros((n, m), dtype=np.float64)
    for k in range(d):
        sq += diffs[:, :, k] * diffs[:, :, k]
    if kspec.kind == "gaussian":
        scale = np.exp(sq * (-0.5 / kspec.sigma**2)) * (-1.0 / kspec.sigma**2)
        return diffs * scale[:, :, None]
    dist = np.sqrt(sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(dist > 0.0, 1.0 / dist, 0.0)
    if kspec.kind == "energy":
        return diffs * (-inv)[:, :, None]
    scale = np.exp(dist * (-1.0 / kspec.sigma)) * (-1.0 / kspec.sigma) * inv
    return diffs * scale[:, :, None]
