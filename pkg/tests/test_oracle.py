"""Nested Monte Carlo oracle on tiny grids (the 3-step cross-checks against
the regression solver run in the acceptance suite)."""

import numpy as np
import pytest

import qbsde as q
from qbsde.errors import CapacityError


def small_bundle(steps, seed, dim_m=1, nodes=None):
    grid = q.TimeGrid(np.asarray(nodes)) if nodes is not None else q.build_grid(1.0, steps)
    return q.simulate_scenario(grid, dim_m, 0, 32, source=q.RandomSource(seed))


def test_constant_terminal_exact():
    b = small_bundle(1, 1)
    field = q.nested_mc_oracle(b, q.make_builtin("zero"), q.terminal_constant(2.5, 1), branching=1000)
    assert np.allclose(field.y, 2.5, atol=1e-6)


def test_two_step_quadratic_within_three_se():
    b = small_bundle(2, 2)
    drv = q.make_builtin("pure_quadratic", {"gamma": 1.0})
    field = q.nested_mc_oracle(b, drv, q.terminal_affine(0.0, [1.0]), branching=1000)
    se = field.meta["y0_se"]
    assert se > 0
    assert abs(field.y0 - 0.5) <= 3.0 * se


def test_step_driver_deterministic():
    b = small_bundle(2, 3, nodes=[0.0, 0.5, 2.0])
    drv = q.make_builtin("step_family", {"n": 2})
    field = q.nested_mc_oracle(b, drv, q.terminal_constant(0.0, 1), branching=1000)
    assert field.y0 == pytest.approx(1.0, abs=1e-5)
    assert field.meta["y0_se"] == pytest.approx(0.0, abs=1e-6)


def test_preconditions():
    drv = q.make_builtin("zero")
    xi = q.terminal_constant(0.0, 1)
    with pytest.raises(ValueError, match="4 nodes"):
        q.nested_mc_oracle(small_bundle(4, 4), drv, xi, branching=1000)
    with pytest.raises(ValueError, match="at least 1000"):
        q.nested_mc_oracle(small_bundle(2, 4), drv, xi, branching=500)
    with pytest.raises(CapacityError):
        q.nested_mc_oracle(small_bundle(2, 4), drv, xi, branching=1000, capacity=10**5)


def test_reproducible_given_source():
    b = small_bundle(2, 5)
    drv = q.make_builtin("pure_quadratic", {"gamma": 1.0})
    f1 = q.nested_mc_oracle(b, drv, q.terminal_affine(0.0, [1.0]), branching=1000)
    f2 = q.nested_mc_oracle(b, drv, q.terminal_affine(0.0, [1.0]), branching=1000)
    assert np.array_equal(f1.y, f2.y)
    assert np.array_equal(f1.z, f2.z)


def test_agreement_with_regression_on_two_steps():
    b = small_bundle(2, 6)
    drv = q.make_builtin("pure_quadratic", {"gamma": 1.0})
    xi = q.terminal_affine(0.0, [1.0])
    oracle = q.nested_mc_oracle(b, drv, xi, branching=2000)
    reg_bundle = q.simulate_scenario(b.grid, 1, 0, 2**14, source=q.RandomSource(60))
    y0, se, _ = q.y0_with_se(reg_bundle, drv, xi)
    combined = np.hypot(se, oracle.meta["y0_se"])
    assert abs(oracle.y0 - y0) <= 3.0 * combined
