import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prodmatch.dual import (
    BACKWARD,
    FORWARD,
    dual_objective,
    init_duals,
    mma_pass,
    subgradient,
)
from prodmatch.errors import EmptyFeasibleSet
from prodmatch.ilp import IlpInstance, make_row

from bruteforce import ilp_optimum


def toy_instance():
    rows = [make_row([0, 1], [1, 1], 1), make_row([1, 2], [1, 1], 1)]
    return IlpInstance.from_rows(np.array([1.0, 1.0, 1.0]), rows)


def feasibility_residual(state):
    sums = state.lambda_sums()
    c = state.instance.costs
    return float(np.max(np.abs(sums - c) / (1.0 + np.abs(c))))


def test_init_duals_splits_costs_uniformly():
    state = init_duals(toy_instance())
    assert state.lambda_of(0).tolist() == [1.0, 0.5]
    assert state.lambda_of(1).tolist() == [0.5, 1.0]
    assert dual_objective(state) == pytest.approx(1.0)
    assert feasibility_residual(state) < 1e-12


def test_zero_cost_instance_has_zero_dual():
    rows = [make_row([0, 1, 2], [1, 1, 1], 1)]
    state = init_duals(IlpInstance.from_rows(np.zeros(3), rows))
    assert dual_objective(state) == 0.0


def test_variable_in_single_constraint_receives_full_cost():
    rows = [make_row([0, 1], [1, 1], 1)]
    state = init_duals(IlpInstance.from_rows(np.array([3.0, 4.0]), rows))
    assert state.lambda_of(0).tolist() == [3.0, 4.0]


def test_mma_pass_keeps_toy_instance_at_its_optimum():
    state = init_duals(toy_instance())
    mma_pass(state, FORWARD)
    mma_pass(state, BACKWARD)
    assert dual_objective(state) == pytest.approx(1.0)
    assert feasibility_residual(state) < 1e-12


def test_mma_is_noop_on_single_constraint_instances():
    rows = [make_row([0, 1, 2], [1, 1, 1], 2)]
    state = init_duals(IlpInstance.from_rows(np.array([0.3, -1.5, 2.0]), rows))
    before = state.lam.copy()
    mma_pass(state, FORWARD)
    mma_pass(state, BACKWARD)
    assert np.allclose(state.lam, before, atol=1e-15)


def test_subgradient_toy_agreement_certificate():
    state = init_duals(toy_instance())
    bits = subgradient(state)
    # both subproblems pick x1 = (0,1) and (1,0): the shared variable agrees
    assert bits.tolist() == [0.0, 1.0, 1.0, 0.0]
    # the induced assignment (0,1,0) is feasible with cost == dual objective
    assert dual_objective(state) == pytest.approx(1.0)


def test_subgradient_forced_variable():
    rows = [make_row([0], [1], 1), make_row([0, 1], [1, 1], 1)]
    state = init_duals(IlpInstance.from_rows(np.array([5.0, 0.2]), rows))
    bits = subgradient(state)
    assert bits[0] == 1.0  # forced coordinate


def test_free_variables_are_clamped_to_cheap_value():
    rows = [make_row([1], [1], 1)]
    inst = IlpInstance.from_rows(np.array([-2.0, 1.0, 3.0]), rows)
    state = init_duals(inst)
    assert state.free_values == {0: 1, 2: 0}
    # bound = c_1 (forced) + min(0, -2) + min(0, 3)
    assert dual_objective(state) == pytest.approx(1.0 - 2.0)


def random_instance(rng, num_vars, num_rows):
    rows = []
    attempts = 0
    while len(rows) < num_rows and attempts < 50 * num_rows:
        attempts += 1
        k = rng.integers(2, min(6, num_vars) + 1)
        variables = np.sort(rng.choice(num_vars, size=k, replace=False))
        coeffs = rng.integers(-2, 3, size=k)
        if not coeffs.any():
            continue
        lo = int(np.minimum(coeffs, 0).sum())
        hi = int(np.maximum(coeffs, 0).sum())
        rhs = int(rng.integers(lo, hi + 1))
        rows.append(make_row(variables, coeffs, rhs))
    costs = rng.standard_normal(num_vars) * 3.0
    try:
        return IlpInstance.from_rows(costs, rows)
    except EmptyFeasibleSet:
        return None


@pytest.mark.parametrize("seed", range(8))
def test_passes_are_monotone_and_bounded_by_optimum(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, num_vars=10, num_rows=4)
    if inst is None:
        pytest.skip("degenerate draw")
    reference = ilp_optimum(
        inst.costs, [(r.variables, r.coefficients, r.rhs) for r in inst.rows]
    )
    state = init_duals(inst)
    values = [dual_objective(state)]
    for _ in range(25):
        mma_pass(state, FORWARD)
        values.append(dual_objective(state))
        mma_pass(state, BACKWARD)
        values.append(dual_objective(state))
        assert feasibility_residual(state) < 1e-9
    diffs = np.diff(values)
    assert (diffs >= -1e-9).all()
    if reference is not None:
        assert values[-1] <= reference[0] + 1e-9


def test_min_marginal_table_matches_reference_sweeps():
    rng = np.random.default_rng(3)
    inst = random_instance(rng, num_vars=8, num_rows=3)
    state = init_duals(inst)
    mma_pass(state, FORWARD)
    m0, m1 = state.min_marginal_table()
    flat = state.flat
    for j, bdd in enumerate(inst.constraints):
        lam = state.lambda_of(j)
        pairs = bdd.min_marginals(lam)
        lo = flat.bdd_layer_lo[j]
        for layer, pair in enumerate(pairs):
            assert m0[lo + layer] == pytest.approx(pair.m0, abs=1e-12)
            assert m1[lo + layer] == pytest.approx(pair.m1, abs=1e-12)


def test_kernel_bound_matches_reference_min_assignment():
    rng = np.random.default_rng(7)
    inst = random_instance(rng, num_vars=9, num_rows=4)
    state = init_duals(inst)
    total = 0.0
    for j, bdd in enumerate(inst.constraints):
        total += bdd.min_assignment(state.lambda_of(j))[0]
    assert dual_objective(state) == pytest.approx(total + state.free_contribution, abs=1e-12)


def test_results_identical_across_thread_counts():
    from prodmatch.kernels import set_threads

    rng = np.random.default_rng(11)
    inst = random_instance(rng, num_vars=12, num_rows=5)
    outputs = []
    for threads in (1, 4, 8):
        set_threads(threads)
        state = init_duals(inst)
        for _ in range(5):
            mma_pass(state, FORWARD)
            mma_pass(state, BACKWARD)
        outputs.append((state.lam.copy(), dual_objective(state), subgradient(state)))
    set_threads(1)
    for lam, obj, bits in outputs[1:]:
        assert np.array_equal(lam, outputs[0][0])
        assert obj == outputs[0][1]
        assert np.array_equal(bits, outputs[0][2])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_forced_variables_never_leak_infinities(seed):
    rng = np.random.default_rng(seed)
    rows = [
        make_row([0], [1], 1),
        make_row([0, 1, 2], [1, 1, 1], 3),
        make_row([1, 2], [1, -1], 0),
    ]
    costs = rng.standard_normal(3) * 2.0
    state = init_duals(IlpInstance.from_rows(costs, rows))
    for _ in range(6):
        mma_pass(state, FORWARD)
        mma_pass(state, BACKWARD)
        assert np.isfinite(state.lam).all()
        assert feasibility_residual(state) < 1e-9
    reference = ilp_optimum(costs, [([0], [1], 1), ([0, 1, 2], [1, 1, 1], 3), ([1, 2], [1, -1], 0)])
    assert dual_objective(state) <= reference[0] + 1e-9
