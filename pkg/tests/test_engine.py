"""Reduction engine: streaming and dense paths must agree to a few ulps for
every operation, results must be independent of threading and batching, the
scalar soft-minimum must satisfy its limit laws, and allocation accounting
must reflect the streaming memory model."""

import numpy as np
import pytest
import scipy.special

import sinkdiv as sd
from sinkdiv import engine
from sinkdiv.engine import (
    ReductionPlan,
    exp_grad_rows,
    kernel_grad_rows,
    kernel_rows,
    lse_rows,
    lse_rows_batched,
    lse_rows_with_grad,
    soft_min,
    softmin,
)

from conftest import max_ulp_diff

ULP_BOUND = 4


def _random_problem(rng, max_n=300):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_n + 1))
    d = int(rng.integers(1, 4))
    xs = rng.uniform(-1, 1, (n, d))
    ys = rng.uniform(-1, 1, (m, d))
    logw = np.log(rng.dirichlet(np.ones(m)))
    pot = rng.normal(0, 1, m)
    p = int(rng.choice([1, 2]))
    eps = float(rng.choice([0.01, 0.1, 1.0]))
    tile = int(rng.integers(1, 258))
    return n, m, xs, ys, logw, pot, sd.CostSpec(p, eps), tile


# ---------------------------------------------------------------------------
# independent reference: scipy log-sum-exp
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_lse_rows_matches_scipy_reference(seed):
    rng = np.random.default_rng(seed)
    n, m, xs, ys, logw, pot, spec, tile = _random_problem(rng, max_n=120)
    from sinkdiv.costs import cost_block
    t = (logw + pot / spec.epsilon)[None, :] - cost_block(spec, xs, ys) / spec.epsilon
    want = scipy.special.logsumexp(t, axis=1)
    got = lse_rows(ReductionPlan(n, m, tile_size=tile), logw, pot, ys, xs, spec)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# streaming == dense within a few ulps, all operations
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_streaming_equals_dense_lse(seed):
    rng = np.random.default_rng(100 + seed)
    n, m, xs, ys, logw, pot, spec, tile = _random_problem(rng)
    a = lse_rows(ReductionPlan(n, m, tile_size=tile, mode="streaming"),
                 logw, pot, ys, xs, spec)
    b = lse_rows(ReductionPlan(n, m, tile_size=tile, mode="dense"),
                 logw, pot, ys, xs, spec)
    assert max_ulp_diff(a, b) <= ULP_BOUND


@pytest.mark.parametrize("seed", range(6))
def test_streaming_equals_dense_lse_with_grad(seed):
    rng = np.random.default_rng(200 + seed)
    n, m, xs, ys, logw, pot, spec, tile = _random_problem(rng, max_n=200)
    l1, g1 = lse_rows_with_grad(
        ReductionPlan(n, m, tile_size=tile, mode="streaming"),
        logw, pot, ys, xs, spec)
    l2, g2 = lse_rows_with_grad(
        ReductionPlan(n, m, tile_size=tile, mode="dense"),
        logw, pot, ys, xs, spec)
    assert max_ulp_diff(l1, l2) <= ULP_BOUND
    assert max_ulp_diff(g1, g2) <= ULP_BOUND


@pytest.mark.parametrize("seed", range(6))
def test_streaming_equals_dense_exp_grad(seed):
    rng = np.random.default_rng(300 + seed)
    n, m, xs, ys, logw, pot, spec, tile = _random_problem(rng, max_n=200)
    row_pot = rng.normal(0, 1, n)
    a = exp_grad_rows(ReductionPlan(n, m, tile_size=tile, mode="streaming"),
                      logw, row_pot, ys, xs, spec)
    b = exp_grad_rows(ReductionPlan(n, m, tile_size=tile, mode="dense"),
                      logw, row_pot, ys, xs, spec)
    assert max_ulp_diff(a, b) <= ULP_BOUND


@pytest.mark.parametrize("kind", ["energy", "gaussian", "laplacian"])
@pytest.mark.parametrize("seed", range(3))
def test_streaming_equals_dense_kernel_ops(kind, seed):
    rng = np.random.default_rng(400 + seed)
    n, m, xs, ys, logw, pot, spec, tile = _random_problem(rng, max_n=200)
    w = np.exp(logw)
    kspec = sd.MmdKernelSpec(kind, sigma=0.7)
    a = kernel_rows(ReductionPlan(n, m, tile_size=tile, mode="streaming"),
                    w, ys, xs, kspec)
    b = kernel_rows(ReductionPlan(n, m, tile_size=tile, mode="dense"),
                    w, ys, xs, kspec)
    assert max_ulp_diff(a, b) <= ULP_BOUND
    ga = kernel_grad_rows(ReductionPlan(n, m, tile_size=tile, mode="streaming"),
                          w, ys, xs, kspec)
    gb = kernel_grad_rows(ReductionPlan(n, m, tile_size=tile, mode="dense"),
                          w, ys, xs, kspec)
    assert max_ulp_diff(ga, gb) <= ULP_BOUND


def test_extreme_tile_sizes_change_nothing():
    rng = np.random.default_rng(500)
    n, m = 97, 145
    xs = rng.uniform(-1, 1, (n, 2))
    ys = rng.uniform(-1, 1, (m, 2))
    logw = np.log(rng.dirichlet(np.ones(m)))
    pot = rng.normal(0, 1, m)
    spec = sd.CostSpec(1, 0.1)
    ref = lse_rows(ReductionPlan(n, m, tile_size=m), logw, pot, ys, xs, spec)
    for tile in (1, 2, 7, 64, 144, 145, 257):
        got = lse_rows(ReductionPlan(n, m, tile_size=tile), logw, pot, ys, xs, spec)
        assert max_ulp_diff(got, ref) <= ULP_BOUND


# ---------------------------------------------------------------------------
# determinism across threads and batching
# ---------------------------------------------------------------------------


def test_thread_count_does_not_change_bits():
    rng = np.random.default_rng(600)
    n, m = 700, 411
    xs = rng.uniform(-1, 1, (n, 3))
    ys = rng.uniform(-1, 1, (m, 3))
    logw = np.log(rng.dirichlet(np.ones(m)))
    pot = rng.normal(0, 1, m)
    spec = sd.CostSpec(2, 0.1)
    ref = lse_rows(ReductionPlan(n, m, threads=1), logw, pot, ys, xs, spec)
    for threads in (2, 4, 7):
        got = lse_rows(ReductionPlan(n, m, threads=threads),
                       logw, pot, ys, xs, spec)
        assert np.array_equal(got, ref)


def test_batched_rows_equal_unbatched_bits():
    rng = np.random.default_rng(601)
    n, m, batch = 83, 57, 5
    xs = rng.uniform(-1, 1, (batch, n, 2))
    ys = rng.uniform(-1, 1, (batch, m, 2))
    logw = np.log(np.stack([rng.dirichlet(np.ones(m)) for _ in range(batch)]))
    pots = rng.normal(0, 1, (batch, m))
    spec = sd.CostSpec(1, 0.5)
    got = lse_rows_batched(ReductionPlan(n, m, batch=batch, threads=3),
                           logw, pots, ys, xs, spec)
    for k in range(batch):
        single = lse_rows(ReductionPlan(n, m), logw[k], pots[k], ys[k], xs[k],
                          spec)
        assert np.array_equal(got[k], single)


# ---------------------------------------------------------------------------
# scalar soft-minimum properties
# ---------------------------------------------------------------------------


def test_soft_min_single_value_is_exact():
    assert soft_min(np.array([1.0]), np.array([3.7]), 0.2) == pytest.approx(
        3.7, abs=1e-15)


def test_soft_min_frozen_two_point_value():
    # uniform weights on values {0, 1} at unit smoothing; independently
    # computed to 20 digits: log 2 - log(1 + exp(-1))
    got = soft_min(np.array([0.5, 0.5]), np.array([0.0, 1.0]), 1.0)
    assert got == pytest.approx(0.37988549304172247537, abs=1e-15)


def test_soft_min_constant_shift_equivariance():
    rng = np.random.default_rng(700)
    w = rng.dirichlet(np.ones(9))
    v = rng.normal(0, 2, 9)
    for eps in (0.01, 1.0, 50.0):
        base = soft_min(w, v, eps)
        shifted = soft_min(w, v + 11.25, eps)
        assert shifted == pytest.approx(base + 11.25, rel=1e-13, abs=1e-12)


def test_soft_min_lies_between_min_and_mean_and_is_monotone_in_values():
    rng = np.random.default_rng(701)
    w = rng.dirichlet(np.ones(7))
    v = rng.normal(0, 1, 7)
    for eps in (0.05, 0.5, 5.0):
        s = soft_min(w, v, eps)
        assert v.min() - 1e-12 <= s <= float(np.dot(w, v)) + 1e-12
        # raising any single value cannot lower the soft minimum
        v2 = v.copy()
        v2[3] += 0.5
        assert soft_min(w, v2, eps) >= s - 1e-12


def test_soft_min_small_smoothing_approaches_min():
    w = np.array([0.25, 0.25, 0.5])
    v = np.array([1.0, 2.0, 0.25])
    assert soft_min(w, v, 1e-6) == pytest.approx(0.25, abs=1e-4)


def test_soft_min_large_smoothing_approaches_weighted_mean():
    w = np.array([0.25, 0.25, 0.5])
    v = np.array([1.0, 2.0, 0.25])
    assert soft_min(w, v, 1e6) == pytest.approx(float(np.dot(w, v)), abs=1e-4)


# ---------------------------------------------------------------------------
# measure-level soft-minimum
# ---------------------------------------------------------------------------


def test_softmin_on_dirac_reproduces_cost():
    alpha = sd.from_arrays([1.0], [[0.0, 0.0]])
    spec = sd.CostSpec(2, 0.3)
    queries = np.array([[1.0, 1.0], [2.0, 0.0]])
    got = softmin(alpha, np.zeros(1), spec, queries)
    assert np.allclose(got, [2.0, 4.0], atol=1e-12)


def test_softmin_matches_scalar_composition():
    rng = np.random.default_rng(702)
    alpha = sd.from_arrays(rng.dirichlet(np.ones(5)), rng.normal(size=(5, 2)))
    phi = rng.normal(size=5)
    spec = sd.CostSpec(1, 0.7)
    queries = rng.normal(size=(3, 2))
    got = softmin(alpha, phi, spec, queries)
    for j, ypt in enumerate(queries):
        costs = np.array([sd.cost(spec, x, ypt) for x in alpha.positions])
        want = soft_min(alpha.weights, costs - phi, spec.epsilon)
        assert got[j] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_softmin_frozen_uniform_pair_value():
    alpha = sd.from_arrays([0.5, 0.5], [[0.0], [1.0]])
    got = softmin(alpha, np.zeros(2), sd.CostSpec(1, 1.0), np.array([[0.0]]))
    assert got[0] == pytest.approx(0.37988549304172247537, abs=1e-15)


# ---------------------------------------------------------------------------
# validation and allocation accounting
# ---------------------------------------------------------------------------


def test_plan_validation():
    with pytest.raises(sd.DegenerateMeasure):
        ReductionPlan(0, 4)
    with pytest.raises(sd.InvalidInput):
        ReductionPlan(4, 4, tile_size=0)
    with pytest.raises(sd.InvalidInput):
        ReductionPlan(4, 4, mode="sparse")
    with pytest.raises(sd.InvalidInput):
        ReductionPlan(4, 4, threads=0)


def test_shape_mismatch_rejected():
    xs = np.zeros((3, 2))
    ys = np.zeros((4, 2))
    spec = sd.CostSpec(1, 1.0)
    with pytest.raises(sd.InvalidInput):
        lse_rows(ReductionPlan(3, 5), np.zeros(4), np.zeros(4), ys, xs, spec)
    with pytest.raises(sd.InvalidInput):
        lse_rows(ReductionPlan(3, 4), np.zeros(4), np.full(4, np.nan), ys, xs, spec)


def test_empty_support_rejected():
    spec = sd.CostSpec(1, 1.0)
    with pytest.raises(sd.DegenerateMeasure):
        lse_rows(ReductionPlan(1, 1), np.zeros(0), np.zeros(0),
                 np.zeros((0, 2)), np.zeros((1, 2)), spec)


def test_streaming_accounting_stays_far_below_pair_matrix():
    rng = np.random.default_rng(800)
    n, m = 3000, 2000
    xs = rng.uniform(0, 1, (n, 2))
    ys = rng.uniform(0, 1, (m, 2))
    logw = np.log(rng.dirichlet(np.ones(m)))
    engine.reset_high_water()
    lse_rows(ReductionPlan(n, m, mode="streaming"), logw, np.zeros(m),
             ys, xs, sd.CostSpec(1, 0.1))
    stats = engine.last_stats()
    assert stats.op == "lse_rows"
    assert stats.mode == "streaming"
    assert stats.pair_buffer_bytes <= 256 * 256 * 8
    assert stats.peak_bytes < n * m * 8 / 10
    hw = engine.high_water()
    assert hw["peak_bytes"] == stats.peak_bytes


def test_dense_accounting_reports_full_matrix():
    rng = np.random.default_rng(801)
    n, m = 300, 200
    xs = rng.uniform(0, 1, (n, 2))
    ys = rng.uniform(0, 1, (m, 2))
    logw = np.log(rng.dirichlet(np.ones(m)))
    engine.reset_high_water()
    lse_rows(ReductionPlan(n, m, mode="dense"), logw, np.zeros(m),
             ys, xs, sd.CostSpec(1, 0.1))
    stats = engine.last_stats()
    assert stats.pair_buffer_bytes >= n * m * 8


def test_high_water_resets():
    engine.reset_high_water()
    assert engine.high_water()["peak_bytes"] == 0
