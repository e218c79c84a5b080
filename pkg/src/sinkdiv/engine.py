"""Pairwise reductions over point clouds, in streaming or dense form.

Every operation here reduces an implicit ``n_rows x n_cols`` matrix of terms
(log-sum-exp rows, kernel sums, and their position-derivative companions)
without the caller ever building that matrix. Two execution modes share one
canonical arithmetic:

* ``streaming`` walks the columns in tiles and the rows in fixed-size blocks,
  recomputing costs on the fly. Memory stays linear in ``n_rows + n_cols``;
  the row maximum needed for a stable log-sum-exp is carried as a running
  maximum across tiles.
* ``dense`` materializes the full term matrix first and is used as the
  reference implementation in tests and oracles.

Both modes reduce each output row in the same order: an exact maximum over
all terms, then tile-sequential accumulation of per-tile partial sums. That
fixed order makes results bit-reproducible regardless of the execution mode
or the number of worker threads, and is what allows the streaming path to be
validated against the dense one to within a few ulps.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs import (
    CostSpec,
    MmdKernelSpec,
    cost_block,
    cost_grad_block,
    kernel_block,
    kernel_grad_block,
)
from .errors import DegenerateMeasure, InvalidInput
from .measures import DiscreteMeasure

__all__ = [
    "ReductionPlan",
    "ReductionStats",
    "last_stats",
    "reset_high_water",
    "high_water",
    "lse_rows",
    "lse_rows_batched",
    "lse_rows_with_grad",
    "kernel_rows",
    "kernel_grad_rows",
    "exp_grad_rows",
    "weighted_kernel_sum",
    "softmin",
    "soft_min",
]

ROW_BLOCK = 256
MODES = ("streaming", "dense")


@dataclass(frozen=True)
class ReductionPlan:
    """Shape, tiling, and execution policy for one reduction.

    ``tile_size`` bounds the number of columns processed per inner step in
    streaming mode (and the partial-sum width in both modes). ``batch``
    declares the number of independent same-shape problems for the batched
    entry points. ``threads`` distributes row blocks (or batch entries)
    across a thread pool; results are independent of the thread count.
    """

    n_rows: int
    n_cols: int
    tile_size: int = 256
    mode: str = "streaming"
    batch: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DegenerateMeasure(
                f"reduction needs at least one row and one column, got {self.n_rows}x{self.n_cols}"
            )
        if self.tile_size < 1:
            raise InvalidInput(f"tile_size must be >= 1, got {self.tile_size}")
        if self.mode not in MODES:
            raise InvalidInput(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch is not None and self.batch < 1:
            raise InvalidInput(f"batch must be >= 1, got {self.batch}")
        if self.threads < 1:
            raise InvalidInput(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class ReductionStats:
    """Allocation accounting for the most recent reduction call.

    ``pair_buffer_bytes`` is the largest buffer indexed by (row, column)
    pairs that the call allocated; in streaming mode it is bounded by the
    block and tile sizes rather than by ``n_rows * n_cols``.
    """

    op: str
    mode: str
    n_rows: int
    n_cols: int
    pair_buffer_bytes: int
    peak_bytes: int


_STATS_LOCK = threading.Lock()
_LAST_STATS: ReductionStats | None = None
_HIGH_WATER: dict = {"peak_bytes": 0, "pair_buffer_bytes": 0}


def last_stats() -> ReductionStats | None:
    """Accounting record of the most recent engine call in this process."""
    return _LAST_STATS


def reset_high_water() -> None:
    """Zero the running maxima tracked across engine calls."""
    with _STATS_LOCK:
        _HIGH_WATER["peak_bytes"] = 0
        _HIGH_WATER["pair_buffer_bytes"] = 0


def high_water() -> dict:
    """Maximum ``peak_bytes`` / ``pair_buffer_bytes`` since the last reset."""
    with _STATS_LOCK:
        return dict(_HIGH_WATER)


def _record_stats(op, plan, pair_buffer_bytes, peak_bytes):
    global _LAST_STATS
    stats = ReductionStats(
        op=op,
        mode=plan.mode,
        n_rows=plan.n_rows,
        n_cols=plan.n_cols,
        pair_buffer_bytes=int(pair_buffer_bytes),
        peak_bytes=int(peak_bytes),
    )
    with _STATS_LOCK:
        _LAST_STATS = stats
        _HIGH_WATER["peak_bytes"] = max(_HIGH_WATER["peak_bytes"], stats.peak_bytes)
        _HIGH_WATER["pair_buffer_bytes"] = max(
            _HIGH_WATER["pair_buffer_bytes"], stats.pair_buffer_bytes
        )
    return stats


def _check_points(name: str, arr: np.ndarray) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInput(f"{name} must be (n, d), got shape {a.shape}")
    if a.shape[0] == 0:
        raise DegenerateMeasure(f"{name} has no points")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} contains NaN or infinite entries")
    return a


def _check_vector(name: str, arr: np.ndarray, length: int) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.shape != (length,):
        raise InvalidInput(f"{name} must have shape ({length},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} contains NaN or infinite entries")
    return a


def _check_plan(plan: ReductionPlan, n_rows: int, n_cols: int):
    if plan.n_rows != n_rows or plan.n_cols != n_cols:
        raise InvalidInput(
            f"plan is {plan.n_rows}x{plan.n_cols} but data is {n_rows}x{n_cols}"
        )


def _blocks(n: int, size: int):
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def _run_blocks(plan: ReductionPlan, ranges, worker):
    if plan.threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            list(pool.map(worker, ranges))
    else:
        for r in ranges:
            worker(r)


def _tile_sum(matrix: np.ndarray, tiles) -> np.ndarray:
    """Row sums of a materialized matrix, accumulated tile-sequentially."""
    acc = np.zeros(matrix.shape[0], dtype=np.float64)
    for j0, j1 in tiles:
        acc += matrix[:, j0:j1].sum(axis=1)
    return acc


# ---------------------------------------------------------------------------
# Log-sum-exp reductions
# ---------------------------------------------------------------------------


def lse_rows(
    plan: ReductionPlan,
    logw: np.ndarray,
    pot: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    spec: CostSpec,
) -> np.ndarray:
    """Stabilized log-sum-exp rows against a potential-weighted point cloud.

    For each source point ``x_i`` this returns

        ``log sum_j exp(logw_j + pot_j / eps - C(x_i, targets_j) / eps)``

    computed with an exact row maximum shift, so the output is finite for
    any finite inputs.
    """
    ys = _check_points("targets", targets)
    xs = _check_points("sources", sources)
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInput(f"dimension mismatch: sources d={xs.shape[1]}, targets d={ys.shape[1]}")
    n, m = xs.shape[0], ys.shape[0]
    _check_plan(plan, n, m)
    lw = _check_vector("logw", logw, m)
    pv = _check_vector("pot", pot, m)
    eps = spec.epsilon
    v = lw + pv / eps

    out = np.empty(n, dtype=np.float64)
    tiles = _blocks(m, plan.tile_size)

    if plan.mode == "dense":
        c = cost_block(spec, xs, ys)
        t = v[None, :] - c / eps
        mx = t.max(axis=1)
        e = np.exp(t - mx[:, None])
        out[:] = mx + np.log(_tile_sum(e, tiles))
        pair = n * m * 8
        peak = _in_bytes(lw, pv, xs, ys) + out.nbytes + 3 * pair
        _record_stats("lse_rows", plan, pair, peak)
        return out

    rb = min(ROW_BLOCK, n)
    tw = min(plan.tile_size, m)

    def worker(block):
        r0, r1 = block
        xb = xs[r0:r1]
        mx = np.full(r1 - r0, -np.inf)
        for j0, j1 in tiles:
            t = v[j0:j1][None, :] - cost_block(spec, xb, ys[j0:j1]) / eps
            np.maximum(mx, t.max(axis=1), out=mx)
        acc = np.zeros(r1 - r0, dtype=np.float64)
        for j0, j1 in tiles:
            t = v[j0:j1][None, :] - cost_block(spec, xb, ys[j0:j1]) / eps
            acc += np.exp(t - mx[:, None]).sum(axis=1)
        out[r0:r1] = mx + np.log(acc)

    _run_blocks(plan, _blocks(n, rb), worker)
    pair = rb * tw * 8
    peak = _in_bytes(lw, pv, xs, ys) + out.nbytes + min(plan.threads, max(1, n // rb)) * 6 * pair
    _record_stats("lse_rows", plan, pair, peak)
    return out


def lse_rows_with_grad(
    plan: ReductionPlan,
    logw: np.ndarray,
    pot: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    spec: CostSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-sum-exp rows plus the softmax-weighted cost gradient.

    Returns ``(lse, grad)`` where ``grad[i]`` is the convex combination
    ``sum_j softmax_ij * dC(x_i, y_j)/dx_i`` of cost gradients under the
    softmax weights implied by the same terms as :func:`lse_rows`.
    """
    ys = _check_points("targets", targets)
    xs = _check_points("sources", sources)
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInput(f"dimension mismatch: sources d={xs.shape[1]}, targets d={ys.shape[1]}")
    n, m, d = xs.shape[0], ys.shape[0], xs.shape[1]
    _check_plan(plan, n, m)
    lw = _check_vector("logw", logw, m)
    pv = _check_vector("pot", pot, m)
    eps = spec.epsilon
    v = lw + pv / eps

    lse = np.empty(n, dtype=np.float64)
    grad = np.empty((n, d), dtype=np.float64)
    tiles = _blocks(m, plan.tile_size)

    if plan.mode == "dense":
        c, g = cost_grad_block(spec, xs, ys)
        t = v[None, :] - c / eps
        mx = t.max(axis=1)
        e = np.exp(t - mx[:, None])
        acc = _tile_sum(e, tiles)
        lse[:] = mx + np.log(acc)
        for k in range(d):
            gacc = np.zeros(n, dtype=np.float64)
            for j0, j1 in tiles:
                gacc += (e[:, j0:j1] * g[:, j0:j1, k]).sum(axis=1)
            grad[:, k] = gacc / acc
        pair = n * m * 8 * d
        peak = _in_bytes(lw, pv, xs, ys) + lse.nbytes + grad.nbytes + 3 * n * m * 8 + 2 * pair
        _record_stats("lse_rows_with_grad", plan, pair, peak)
        return lse, grad

    rb = min(ROW_BLOCK, n)
    tw = min(plan.tile_size, m)

    def worker(block):
        r0, r1 = block
        xb = xs[r0:r1]
        nb = r1 - r0
        mx = np.full(nb, -np.inf)
        for j0, j1 in tiles:
            c = cost_block(spec, xb, ys[j0:j1])
            t = v[j0:j1][None, :] - c / eps
            np.maximum(mx, t.max(axis=1), out=mx)
        acc = np.zeros(nb, dtype=np.float64)
        gacc = np.zeros((nb, d), dtype=np.float64)
        for j0, j1 in tiles:
            c, g = cost_grad_block(spec, xb, ys[j0:j1])
            t = v[j0:j1][None, :] - c / eps
            e = np.exp(t - mx[:, None])
            acc += e.sum(axis=1)
            for k in range(d):
                gacc[:, k] += (e * g[:, :, k]).sum(axis=1)
        lse[r0:r1] = mx + np.log(acc)
        grad[r0:r1] = gacc / acc[:, None]

    _run_blocks(plan, _blocks(n, rb), worker)
    pair = rb * tw * 8 * d
    peak = _in_bytes(lw, pv, xs, ys) + lse.nbytes + grad.nbytes + min(plan.threads, max(1, n // rb)) * (6 * rb * tw * 8 + 2 * pair)
    _record_stats("lse_rows_with_grad", plan, pair, peak)
    return lse, grad


def exp_grad_rows(
    plan: ReductionPlan,
    colw_log: np.ndarray,
    row_pot: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    spec: CostSpec,
) -> np.ndarray:
    """Unnormalized exp-weighted cost-gradient rows.

    Returns ``out[i] = sum_j exp(colw_log_j + (row_pot_i - C(x_i, y_j)) / eps)
    * dC(x_i, y_j)/dx_i`` with an internal row maximum shift. The exponent is
    restored at the end, so the caller is responsible for keeping the true row
    scale within floating-point range (bounded sums are safe).
    """
    ys = _check_points("targets", targets)
    xs = _check_points("sources", sources)
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInput(f"dimension mismatch: sources d={xs.shape[1]}, targets d={ys.shape[1]}")
    n, m, d = xs.shape[0], ys.shape[0], xs.shape[1]
    _check_plan(plan, n, m)
    u = _check_vector("colw_log", colw_log, m)
    rp = _check_vector("row_pot", row_pot, n) / spec.epsilon
    eps = spec.epsilon

    out = np.empty((n, d), dtype=np.float64)
    tiles = _blocks(m, plan.tile_size)

    if plan.mode == "dense":
        c, g = cost_grad_block(spec, xs, ys)
        t = u[None, :] + (rp[:, None] - c / eps)
        mx = t.max(axis=1)
        e = np.exp(t - mx[:, None])
        for k in range(d):
            gacc = np.zeros(n, dtype=np.float64)
            for j0, j1 in tiles:
                gacc += (e[:, j0:j1] * g[:, j0:j1, k]).sum(axis=1)
            out[:, k] = np.exp(mx) * gacc
        pair = n * m * 8 * d
        peak = _in_bytes(u, rp, xs, ys) + out.nbytes + 3 * n * m * 8 + 2 * pair
        _record_stats("exp_grad_rows", plan, pair, peak)
        return out

    rb = min(ROW_BLOCK, n)
    tw = min(plan.tile_size, m)

    def worker(block):
        r0, r1 = block
        xb = xs[r0:r1]
        nb = r1 - r0
        rpb = rp[r0:r1]
        mx = np.full(nb, -np.inf)
        for j0, j1 in tiles:
            c = cost_block(spec, xb, ys[j0:j1])
            t = u[j0:j1][None, :] + (rpb[:, None] - c / eps)
            np.maximum(mx, t.max(axis=1), out=mx)
        gacc = np.zeros((nb, d), dtype=np.float64)
        for j0, j1 in tiles:
            c, g = cost_grad_block(spec, xb, ys[j0:j1])
            t = u[j0:j1][None, :] + (rpb[:, None] - c / eps)
            e = np.exp(t - mx[:, None])
            for k in range(d):
                gacc[:, k] += (e * g[:, :, k]).sum(axis=1)
        out[r0:r1] = np.exp(mx)[:, None] * gacc

    _run_blocks(plan, _blocks(n, rb), worker)
    pair = rb * tw * 8 * d
    peak = _in_bytes(u, rp, xs, ys) + out.nbytes + min(plan.threads, max(1, n // rb)) * (6 * rb * tw * 8 + 2 * pair)
    _record_stats("exp_grad_rows", plan, pair, peak)
    return out


def lse_rows_batched(
    plan: ReductionPlan,
    logw: np.ndarray,
    pot: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    spec: CostSpec,
) -> np.ndarray:
    """Batched :func:`lse_rows` over ``plan.batch`` independent problems.

    Inputs carry a leading batch axis (``logw``/``pot`` are ``(B, m)``,
    ``targets``/``sources`` are ``(B, m, d)`` / ``(B, n, d)``) and the result
    is ``(B, n)``. Each entry matches the unbatched call bit for bit.
    """
    if plan.batch is None:
        raise InvalidInput("plan.batch must be set for batched reductions")
    b = plan.batch
    lw = np.asarray(logw, dtype=np.float64)
    pv = np.asarray(pot, dtype=np.float64)
    ys = np.asarray(targets, dtype=np.float64)
    xs = np.asarray(sources, dtype=np.float64)
    for name, arr, ndim in (("logw", lw, 2), ("pot", pv, 2), ("targets", ys, 3), ("sources", xs, 3)):
        if arr.ndim != ndim or arr.shape[0] != b:
            raise InvalidInput(f"{name} must have a leading batch axis of {b}, got shape {arr.shape}")

    entry_plan = ReductionPlan(
        n_rows=plan.n_rows, n_cols=plan.n_cols, tile_size=plan.tile_size,
        mode=plan.mode, batch=None, threads=1,
    )
    out = np.empty((b, plan.n_rows), dtype=np.float64)

    def worker(i):
        out[i] = lse_rows(entry_plan, lw[i], pv[i], ys[i], xs[i], spec)

    if plan.threads > 1 and b > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            list(pool.map(worker, range(b)))
    else:
        for i in range(b):
            worker(i)
    rb = min(ROW_BLOCK, plan.n_rows)
    tw = min(plan.tile_size, plan.n_cols)
    pair = (plan.n_rows * plan.n_cols * 8) if plan.mode == "dense" else rb * tw * 8
    peak = lw.nbytes + pv.nbytes + ys.nbytes + xs.nbytes + out.nbytes + min(plan.threads, b) * 6 * pair
    _record_stats("lse_rows_batched", plan, pair, peak)
    return out


# ---------------------------------------------------------------------------
# Kernel reductions
# ---------------------------------------------------------------------------


def kernel_rows(
    plan: ReductionPlan,
    weights: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    kspec: MmdKernelSpec,
) -> np.ndarray:
    """Rows of the kernel convolution: ``out[i] = sum_j w_j k(x_i, y_j)``."""
    ys = _check_points("targets", targets)
    xs = _check_points("sources", sources)
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInput(f"dimension mismatch: sources d={xs.shape[1]}, targets d={ys.shape[1]}")
    n, m = xs.shape[0], ys.shape[0]
    _check_plan(plan, n, m)
    w = _check_vector("weights", weights, m)

    out = np.empty(n, dtype=np.float64)
    tiles = _blocks(m, plan.tile_size)

    if plan.mode == "dense":
        k = kernel_block(kspec, xs, ys)
        term = k * w[None, :]
        out[:] = _tile_sum(term, tiles)
        pair = n * m * 8
        peak = _in_bytes(w, xs, ys) + out.nbytes + 2 * pair
        _record_stats("kernel_rows", plan, pair, peak)
        return out

    rb = min(ROW_BLOCK, n)
    tw = min(plan.tile_size, m)

    def worker(block):
        r0, r1 = block
        xb = xs[r0:r1]
        acc = np.zeros(r1 - r0, dtype=np.float64)
        for j0, j1 in tiles:
            k = kernel_block(kspec, xb, ys[j0:j1])
            acc += (k * w[j0:j1][None, :]).sum(axis=1)
        out[r0:r1] = acc

    _run_blocks(plan, _blocks(n, rb), worker)
    pair = rb * tw * 8
    peak = _in_bytes(w, xs, ys) + out.nbytes + min(plan.threads, max(1, n // rb)) * 4 * pair
    _record_stats("kernel_rows", plan, pair, peak)
    return out


def kernel_grad_rows(
    plan: ReductionPlan,
    weights: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    kspec: MmdKernelSpec,
) -> np.ndarray:
    """Gradient rows of the kernel convolution.

    ``out[i] = sum_j w_j dk(x_i, y_j)/dx_i``, shape ``(n, d)``.
    """
    ys = _check_points("targets", targets)
    xs = _check_points("sources", sources)
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInput(f"dimension mismatch: sources d={xs.shape[1]}, targets d={ys.shape[1]}")
    n, m, d = xs.shape[0], ys.shape[0], xs.shape[1]
    _check_plan(plan, n, m)
    w = _check_vector("weights", weights, m)

    out = np.empty((n, d), dtype=np.float64)
    tiles = _blocks(m, plan.tile_size)

    if plan.mode == "dense":
        g = kernel_grad_block(kspec, xs, ys)
        for k in range(d):
            gacc = np.zeros(n, dtype=np.float64)
            for j0, j1 in tiles:
                gacc += (g[:, j0:j1, k] * w[j0:j1][None, :]).sum(axis=1)
            out[:, k] = gacc
        pair = n * m * 8 * d
        peak = _in_bytes(w, xs, ys) + out.nbytes + 2 * pair
        _record_stats("kernel_grad_rows", plan, pair, peak)
        return out

    rb = min(ROW_BLOCK, n)
    tw = min(plan.tile_size, m)

    def worker(block):
        r0, r1 = block
        xb = xs[r0:r1]
        gacc = np.zeros((r1 - r0, d), dtype=np.float64)
        for j0, j1 in tiles:
            g = kernel_grad_block(kspec, xb, ys[j0:j1])
            for k in range(d):
                gacc[:, k] += (g[:, :, k] * w[j0:j1][None, :]).sum(axis=1)
        out[r0:r1] = gacc

    _run_blocks(plan, _blocks(n, rb), worker)
    pair = rb * tw * 8 * d
    peak = _in_bytes(w, xs, ys) + out.nbytes + min(plan.threads, max(1, n // rb)) * (4 * rb * tw * 8 + 2 * pair)
    _record_stats("kernel_grad_rows", plan, pair, peak)
    return out


def weighted_kernel_sum(
    plan: ReductionPlan,
    weights_a: np.ndarray,
    sources: np.ndarray,
    weights_b: np.ndarray,
    targets: np.ndarray,
    kspec: MmdKernelSpec,
) -> float:
    """Double kernel sum ``sum_ij a_i b_j k(x_i, y_j)``.

    Built on :func:`kernel_rows`, so the accumulation order (and therefore
    the exact floating-point result) is shared between modes.
    """
    rows = kernel_rows(plan, weights_b, targets, sources, kspec)
    wa = _check_vector("weights_a", weights_a, plan.n_rows)
    return float(np.sum(wa * rows))


# ---------------------------------------------------------------------------
# Soft minimum
# ---------------------------------------------------------------------------


def softmin(
    measure: DiscreteMeasure,
    phi: np.ndarray,
    spec: CostSpec,
    query_points: np.ndarray,
    plan: ReductionPlan | None = None,
) -> np.ndarray:
    """Smoothed minimum of ``C(., y) - phi(.)`` over the measure's support.

    For each query ``y`` this evaluates

        ``-eps * log sum_k w_k exp((phi_k - C(x_k, y)) / eps)``

    which tends to ``min_k (C(x_k, y) - phi_k)`` as eps goes to zero and to
    the average ``sum_k w_k (C(x_k, y) - phi_k)`` as eps grows.
    """
    queries = np.asarray(query_points, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[:, None]
    if plan is None:
        plan = ReductionPlan(n_rows=queries.shape[0], n_cols=measure.n_atoms)
    phi = _check_vector("phi", phi, measure.n_atoms)
    return -spec.epsilon * lse_rows(
        plan, measure.log_weights, phi, measure.positions, queries, spec
    )


def soft_min(weights: np.ndarray, values: np.ndarray, epsilon: float) -> float:
    """Scalar soft minimum ``-eps log sum_k w_k exp(-values_k / eps)``.

    Interpolates between the hard minimum of ``values`` (small eps) and the
    weighted average (large eps); adding a constant to ``values`` shifts the
    result by the same constant.
    """
    w = np.asarray(weights, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    if w.shape != vals.shape or w.ndim != 1:
        raise InvalidInput(f"weights {w.shape} and values {vals.shape} must be matching vectors")
    if w.size == 0:
        raise DegenerateMeasure("soft_min over empty support")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vals))):
        raise InvalidInput("soft_min inputs contain NaN or infinite entries")
    if np.any(w <= 0):
        raise InvalidInput("soft_min weights must be strictly positive")
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidInput(f"epsilon must be positive and finite, got {epsilon}")
    t = np.log(w) - vals / epsilon
    mx = t.max()
    return float(-epsilon * (mx + np.log(np.sum(np.exp(t - mx)))))


def _in_bytes(*arrays) -> int:
    return int(sum(a.nbytes for a in arrays))
