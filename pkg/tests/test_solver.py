"""Dual solver: fixed points on closed-form instances, gauge behaviour,
monotone dual ascent, marginal feasibility of the implied plan, potential
extension, and the typed failure modes."""

import numpy as np
import pytest

import sinkdiv as sd
from sinkdiv.measures import DiscreteMeasure
from sinkdiv.solver import (
    SolverParams,
    dual_value,
    extend_potential,
    plan_diagnostics,
    plan_matrix,
    sinkhorn,
    sinkhorn_symmetric,
)

from conftest import random_pair


# ---------------------------------------------------------------------------
# closed-form fixed points
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("p", [1, 2])
def test_point_mass_pair_converges_in_one_iteration(eps, p, dirac_pair):
    alpha, beta = dirac_pair
    res = sinkhorn(alpha, beta, SolverParams(epsilon=eps, p=p))
    cost = 1.0  # unit separation, |x-y|^p = 1 for both exponents
    assert res.converged
    assert res.iterations == 1
    assert res.residual == 0.0
    assert res.f[0] == pytest.approx(0.0, abs=1e-15)
    assert res.g[0] == pytest.approx(cost, abs=1e-15)
    assert dual_value(alpha, beta, res.f, res.g) == pytest.approx(cost, abs=1e-15)


def test_point_mass_self_transport_potential_is_zero():
    alpha = sd.from_arrays([1.0], [[0.3, -0.2]])
    res = sinkhorn_symmetric(alpha, SolverParams(epsilon=0.5, p=2, tol=1e-14))
    assert res.converged
    assert res.potential[0] == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# gauge freedom
# ---------------------------------------------------------------------------


def test_constant_warm_start_shifts_only_the_gauge():
    alpha, beta, _ = random_pair(seed=7, max_n=20, uniform_weights=True)
    params = SolverParams(epsilon=0.5, p=2, tol=1e-12, max_iters=5000)
    cold = sinkhorn(alpha, beta, params)
    warm = sinkhorn(alpha, beta, params, init_f=np.full(alpha.n_atoms, 0.37))
    df = warm.f - cold.f
    dg = warm.g - cold.g
    # potentials agree up to one additive constant split between f and g
    assert df.max() - df.min() < 1e-10
    assert dg.max() - dg.min() < 1e-10
    assert df.mean() + dg.mean() == pytest.approx(0.0, abs=1e-10)
    v0 = dual_value(alpha, beta, cold.f, cold.g)
    v1 = dual_value(alpha, beta, warm.f, warm.g)
    assert v1 == pytest.approx(v0, rel=1e-12, abs=1e-12)


def test_symmetric_warm_start_reaches_same_value():
    alpha, beta, _ = random_pair(seed=8, max_n=24, uniform_weights=True)
    params = SolverParams(epsilon=0.3, p=1, tol=1e-12, max_iters=5000)
    cold = sinkhorn(alpha, beta, params)
    p_a = sinkhorn_symmetric(alpha, SolverParams(epsilon=0.3, p=1, tol=1e-13))
    warm = sinkhorn(alpha, beta, params, init_f=p_a.potential)
    assert warm.iterations <= cold.iterations
    v0 = dual_value(alpha, beta, cold.f, cold.g)
    v1 = dual_value(alpha, beta, warm.f, warm.g)
    assert v1 == pytest.approx(v0, rel=1e-9, abs=1e-11)


# ---------------------------------------------------------------------------
# dual ascent and stopping semantics
# ---------------------------------------------------------------------------


def test_dual_objective_ascends_iteration_by_iteration():
    alpha, beta, _ = random_pair(seed=42, max_n=24)
    values = []
    for k in range(1, 13):
        res = sinkhorn(alpha, beta,
                       SolverParams(epsilon=0.1, p=2, tol=0.0, max_iters=k))
        values.append(dual_value(alpha, beta, res.f, res.g))
    diffs = np.diff(values)
    assert np.all(diffs >= -1e-12)


def test_iteration_cap_reports_rather_than_raises():
    alpha, beta, _ = random_pair(seed=43, max_n=40)
    res = sinkhorn(alpha, beta,
                   SolverParams(epsilon=0.01, p=2, tol=1e-14, max_iters=2))
    assert not res.converged
    assert res.iterations == 2
    assert res.residual > 1e-14


def test_symmetric_iteration_cap_reports_rather_than_raises():
    alpha, _, _ = random_pair(seed=44, max_n=40)
    res = sinkhorn_symmetric(
        alpha, SolverParams(epsilon=0.1, p=2, tol=1e-15,
                            symmetric_max_iters=2))
    assert not res.converged
    assert res.iterations == 2


# ---------------------------------------------------------------------------
# self-transport consistency and plan feasibility
# ---------------------------------------------------------------------------


def test_equal_inputs_match_symmetric_potential_sum():
    alpha, _, _ = random_pair(seed=9, max_n=16, uniform_weights=True)
    params = SolverParams(epsilon=0.5, p=2, tol=1e-12, max_iters=10000)
    cross = sinkhorn(alpha, alpha, params)
    sym = sinkhorn_symmetric(alpha, SolverParams(epsilon=0.5, p=2, tol=1e-13))
    lhs = float(np.dot(alpha.weights, cross.f + cross.g))
    rhs = 2.0 * float(np.dot(alpha.weights, sym.potential))
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_converged_plan_satisfies_both_marginals():
    alpha, beta, _ = random_pair(seed=10, max_n=7)
    params = SolverParams(epsilon=0.3, p=2, tol=1e-12, max_iters=20000)
    res = sinkhorn(alpha, beta, params)
    assert res.converged
    pi = plan_matrix(alpha, beta, res.f, res.g, params.cost_spec)
    row_err = np.abs(pi.sum(axis=1) - alpha.weights).sum()
    col_err = np.abs(pi.sum(axis=0) - beta.weights).sum()
    assert row_err + col_err < 1e-10
    diag = plan_diagnostics(alpha, beta, res.f, res.g, params.cost_spec)
    assert diag.marginal_err_l1 < 1e-10
    # primal value of the implied plan equals the dual objective
    primal = diag.transport_cost + params.epsilon * diag.kl
    dual = dual_value(alpha, beta, res.f, res.g)
    assert primal == pytest.approx(dual, rel=1e-10, abs=1e-10)


# ---------------------------------------------------------------------------
# potential extension
# ---------------------------------------------------------------------------


def test_extension_is_a_fixed_point_on_own_support():
    alpha, _, _ = random_pair(seed=11, max_n=20)
    spec = sd.CostSpec(2, 0.2)
    sym = sinkhorn_symmetric(alpha, SolverParams(epsilon=0.2, p=2, tol=1e-13))
    assert sym.converged
    ext = extend_potential(alpha, sym.potential, spec, alpha.positions)
    assert np.allclose(ext, sym.potential, atol=1e-12)


def test_extension_onto_partner_support_matches_partner_potential():
    alpha, beta, _ = random_pair(seed=12, max_n=8, uniform_weights=True)
    params = SolverParams(epsilon=0.5, p=1, tol=1e-13, max_iters=20000)
    res = sinkhorn(alpha, beta, params)
    assert res.converged
    ext = extend_potential(alpha, res.f, params.cost_spec, beta.positions)
    assert np.allclose(ext, res.g, atol=1e-10)


@pytest.mark.parametrize("p,eps", [(1, 0.05), (1, 0.5), (2, 0.1)])
def test_extended_potential_is_cost_lipschitz(p, eps):
    alpha, _, _ = random_pair(seed=13, max_n=30, max_dim=1)
    sym = sinkhorn_symmetric(alpha, SolverParams(epsilon=eps, p=p, tol=1e-12))
    grid = np.linspace(-0.5, 1.5, 401).reshape(-1, 1)
    vals = extend_potential(alpha, sym.potential, sd.CostSpec(p, eps), grid)
    quotients = np.abs(np.diff(vals)) / np.diff(grid[:, 0])
    if p == 1:
        kappa = 1.0
    else:
        kappa = 2.0 * np.abs(grid[:, 0][:, None]
                             - alpha.positions[None, :, 0]).max()
    assert quotients.max() <= kappa + 1e-6


# ---------------------------------------------------------------------------
# typed failures and guards
# ---------------------------------------------------------------------------


def test_plan_materialization_respects_entry_guard():
    alpha, beta, _ = random_pair(seed=14, max_n=5)
    res = sinkhorn(alpha, beta, SolverParams(epsilon=0.5, p=2))
    with pytest.raises(sd.TooLarge):
        plan_matrix(alpha, beta, res.f, res.g, sd.CostSpec(2, 0.5),
                    max_entries=alpha.n_atoms * beta.n_atoms - 1)


def test_plan_diagnostics_on_point_masses():
    alpha = sd.from_arrays([1.0], [[0.0]])
    beta = sd.from_arrays([1.0], [[1.0]])
    spec = sd.CostSpec(1, 0.25)
    diag = plan_diagnostics(alpha, beta, np.array([0.0]), np.array([1.0]), spec)
    assert diag.transport_cost == pytest.approx(1.0, abs=1e-15)
    assert diag.kl == pytest.approx(0.0, abs=1e-15)
    assert diag.marginal_err_l1 == pytest.approx(0.0, abs=1e-15)
    same = sd.from_arrays([1.0], [[0.0]])
    diag0 = plan_diagnostics(alpha, same, np.zeros(1), np.zeros(1), spec)
    assert diag0.transport_cost == 0.0
    assert diag0.kl == pytest.approx(0.0, abs=1e-15)


def test_overflowing_cost_scale_raises_numerical_failure():
    alpha = sd.from_arrays([1.0], [[0.0]])
    beta = sd.from_arrays([1.0], [[1e200]])
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(sd.NumericalFailure):
            sinkhorn(alpha, beta, SolverParams(epsilon=1.0, p=2))


def test_nonfinite_measure_data_is_rejected():
    bad = DiscreteMeasure(
        weights=np.array([0.5, 0.5]),
        positions=np.array([[0.0], [np.inf]]),
    )
    good = sd.from_arrays([1.0], [[0.0]])
    with pytest.raises((sd.InvalidInput, sd.NumericalFailure)):
        with np.errstate(over="ignore", invalid="ignore"):
            sinkhorn(good, bad, SolverParams(epsilon=1.0, p=2))


def test_dimension_mismatch_rejected():
    a = sd.from_arrays([1.0], [[0.0]])
    b = sd.from_arrays([1.0], [[0.0, 0.0]])
    with pytest.raises(sd.InvalidInput):
        sinkhorn(a, b, SolverParams(epsilon=1.0, p=2))


def test_bad_warm_start_rejected():
    a = sd.from_arrays([0.5, 0.5], [[0.0], [1.0]])
    b = sd.from_arrays([1.0], [[0.5]])
    params = SolverParams(epsilon=1.0, p=2)
    with pytest.raises(sd.InvalidInput):
        sinkhorn(a, b, params, init_f=np.zeros(3))
    with pytest.raises(sd.InvalidInput):
        sinkhorn(a, b, params, init_f=np.array([0.0, np.nan]))


def test_solver_params_validation():
    with pytest.raises(sd.InvalidInput):
        SolverParams(epsilon=0.0)
    with pytest.raises(sd.InvalidInput):
        SolverParams(epsilon=1.0, p=3)
    with pytest.raises(sd.InvalidInput):
        SolverParams(epsilon=1.0, tol=-1.0)
    with pytest.raises(sd.InvalidInput):
        SolverParams(epsilon=1.0, max_iters=0)
