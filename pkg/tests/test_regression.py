import numpy as np
import pytest

from qbsde.errors import DegenerateBasisError
from qbsde.regression import BasisSpec, BinnedRegression, NodeRegression, make_regression, pointwise_se


def test_poly_design_columns():
    basis = BasisSpec(degree=2)
    state = np.array([[1.0, 2.0], [3.0, 4.0]])
    design = basis.design(state)
    # six monomials of total degree <= 2 in two variables
    assert design.shape == (2, 6)
    assert {1.0, 2.0, 4.0} <= set(design[0])
    extra = basis.design(state, extra=np.array([7.0, 8.0]))
    assert extra.shape == (2, 7)
    assert np.array_equal(extra[:, -1], [7.0, 8.0])


def test_constant_state_falls_back_to_mean():
    rng = np.random.default_rng(0)
    state = np.zeros((200, 1))
    target = rng.normal(2.0, 1.0, 200)
    reg = NodeRegression(BasisSpec(degree=3).design(state))
    fitted = reg.fit(target)
    assert np.allclose(fitted, target.mean())


def test_exact_fit_of_in_span_target(rng):
    state = rng.normal(size=(500, 1))
    target = 1.5 - 2.0 * state[:, 0] + 0.25 * state[:, 0] ** 3
    reg = NodeRegression(BasisSpec(degree=3).design(state))
    assert np.allclose(reg.fit(target), target, atol=1e-10)


def test_degenerate_basis_errors(rng):
    with pytest.raises(DegenerateBasisError):
        NodeRegression(np.zeros((10, 3)))
    with pytest.raises(DegenerateBasisError):
        NodeRegression(np.full((10, 2), np.nan))
    state = rng.normal(size=(50, 1))
    reg = NodeRegression(BasisSpec(degree=1).design(state))
    with pytest.raises(DegenerateBasisError):
        reg.fit(np.full(50, np.inf))


def test_pointwise_se_matches_sampling_spread(rng):
    # repeated fits of pure-noise targets: the empirical spread of the fitted
    # value at a fixed point should match the OLS formula
    state = rng.normal(size=(2000, 1))
    basis = BasisSpec(degree=2)
    design = basis.design(state)
    reg = NodeRegression(design)
    fits = []
    for _ in range(300):
        t = rng.normal(size=2000)
        fits.append(reg.fit(t)[0])
    sig2 = 1.0
    se = pointwise_se(sig2, reg.xtx_pinv(), design[:1])[0]
    assert np.std(fits) == pytest.approx(se, rel=0.2)


def test_binned_agrees_with_explicit_design(rng):
    w = rng.normal(size=(3000, 1))
    target = np.sin(w[:, 0]) + 0.1 * rng.normal(size=3000)
    basis = BasisSpec(kind="binned", bins=8)
    fast = make_regression(basis, w)
    slow = NodeRegression(basis.design(w))
    assert isinstance(fast, BinnedRegression)
    assert np.allclose(fast.fit(target), slow.fit(target), atol=1e-8)


def test_binned_exact_on_affine_target(rng):
    w = rng.normal(size=(4000, 1))
    target = 0.3 + 1.7 * w[:, 0]
    reg = make_regression(BasisSpec(kind="binned", bins=12), w)
    assert np.allclose(reg.fit(target), target, atol=1e-9)


def test_binned_constant_state(rng):
    w = np.zeros((100, 1))
    target = rng.normal(size=100)
    reg = make_regression(BasisSpec(kind="binned", bins=12), w)
    assert np.allclose(reg.fit(target), target.mean())


def test_binned_rejects_multidim():
    with pytest.raises(ValueError):
        BasisSpec(kind="binned").design(np.zeros((10, 2)))


def test_fit_variance_positive(rng):
    w = rng.normal(size=(1000, 1))
    reg = make_regression(BasisSpec(kind="binned", bins=6), w)
    var = reg.fit_variance(2.0)
    assert var.shape == (1000,)
    assert np.all(var >= 0)
    # more data in a cell -> smaller variance than a near-empty tail cell
    assert var[np.argmax(np.abs(w))] >= np.median(var)
