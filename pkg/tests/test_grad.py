import math

import numpy as np
import pytest

from spdalign.core import (
    batch_covariance,
    matrix_log,
    random_spd,
    random_spd_with_condition,
    symmetrize,
)
from spdalign.errors import DimensionError, NumericalError
from spdalign.grad import (
    check_cov_gradient,
    check_feature_gradient,
    finite_diff_check,
    gradient_errors,
    grad_cov_wrt_features,
    grad_loss_coral_wrt_cov,
    grad_loss_log_wrt_cov,
    grad_matrix_log,
    loewner_log,
    loss_coral_and_grads,
    loss_log_and_grads,
)
from spdalign.metrics import loss_coral, loss_log

I2 = np.eye(2)


def test_coral_grad_examples():
    np.testing.assert_array_equal(grad_loss_coral_wrt_cov(I2, I2), np.zeros((2, 2)))
    np.testing.assert_allclose(grad_loss_coral_wrt_cov(2 * I2, I2), I2 / 8)


def test_coral_grad_random_pair():
    rng = np.random.default_rng(0)
    c_s, c_t = random_spd(8, rng), random_spd(8, rng)
    assert check_cov_gradient("coral", c_s, c_t).entrywise < 1e-7


def test_grad_matrix_log_identity():
    g = symmetrize(np.random.default_rng(1).standard_normal((4, 4)))
    np.testing.assert_allclose(grad_matrix_log(np.eye(4), g), g, atol=1e-15)


def test_grad_matrix_log_diagonal():
    e11 = np.array([[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(grad_matrix_log(np.diag([3.0, 0.5]), e11), e11 / 3.0, atol=1e-16)


def test_grad_matrix_log_finite_differences():
    rng = np.random.default_rng(2)
    a = random_spd(8, rng)
    g = symmetrize(rng.standard_normal((8, 8)))
    analytic = grad_matrix_log(a, g)
    f = lambda x: np.sum(g * matrix_log(symmetrize(x)))  # noqa: E731
    err = gradient_errors(f, a, analytic)
    assert err.scaled < 1e-6
    assert err.entrywise < 1e-5


def test_fd_error_is_second_order():
    # a correct gradient leaves only O(h^2) truncation: 10x smaller h, 100x smaller error
    rng = np.random.default_rng(2)
    c_s, c_t = random_spd(6, rng), random_spd(6, rng)
    coarse = check_cov_gradient("log", c_s, c_t, h=1e-3).scaled
    fine = check_cov_gradient("log", c_s, c_t, h=1e-4).scaled
    assert 50 < coarse / fine < 200


def test_grad_matrix_log_shape_mismatch():
    with pytest.raises(DimensionError):
        grad_matrix_log(np.eye(3), np.eye(2))


def test_loewner_matches_limit_on_coincident_eigenvalues():
    k = loewner_log(np.array([2.0, 2.0, 5.0]))
    assert k[0, 1] == pytest.approx(0.5)
    assert k[0, 0] == pytest.approx(0.5)
    assert k[0, 2] == pytest.approx((math.log(2) - math.log(5)) / (2 - 5))


def test_loewner_near_coincident_is_continuous():
    lam = 3.0
    near = loewner_log(np.array([lam, lam * (1 + 1e-9)]))[0, 1]
    assert near == pytest.approx(1 / lam, rel=1e-8)


def test_log_grad_examples():
    a = random_spd(5, np.random.default_rng(3))
    assert np.linalg.norm(grad_loss_log_wrt_cov(a, a)) < 1e-12
    np.testing.assert_allclose(
        grad_loss_log_wrt_cov(np.diag([math.e**2, 1.0]), I2),
        np.diag([math.exp(-2) / 4, 0.0]),
        atol=1e-16,
    )


def test_log_grad_random_pair():
    rng = np.random.default_rng(4)
    c_s, c_t = random_spd(8, rng), random_spd(8, rng)
    err = check_cov_gradient("log", c_s, c_t)
    assert err.scaled < 1e-7
    assert err.entrywise < 1e-5


def test_target_side_gradients():
    rng = np.random.default_rng(5)
    c_s, c_t = random_spd(6, rng), random_spd(6, rng)
    for value_fn, grad_fn in [(loss_coral, loss_coral_and_grads), (loss_log, loss_log_and_grads)]:
        _, _, g_t = grad_fn(c_s, c_t)
        err = gradient_errors(lambda x: value_fn(c_s, symmetrize(x)).value, c_t, g_t)
        assert err.scaled < 1e-6


def test_log_grad_symmetric():
    rng = np.random.default_rng(6)
    g = grad_loss_log_wrt_cov(random_spd(9, rng), random_spd(9, rng))
    assert np.abs(g - g.T).max() < 1e-10


def test_features_zero_upstream():
    x = np.random.default_rng(7).standard_normal((10, 3))
    np.testing.assert_array_equal(grad_cov_wrt_features(x, np.zeros((3, 3))), 0)


def test_features_constant_batch():
    x = np.tile([1.0, 2.0, 3.0], (6, 1))
    g = symmetrize(np.random.default_rng(8).standard_normal((3, 3)))
    np.testing.assert_array_equal(grad_cov_wrt_features(x, g), 0)


def test_features_end_to_end():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((32, 8))
    err = check_feature_gradient("log", x, random_spd(8, rng))
    assert err.entrywise < 1e-5


def test_features_column_sums():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((32, 8)) + 3.0
    _, g, _ = loss_log_and_grads(batch_covariance(x), random_spd(8, rng))
    d = grad_cov_wrt_features(x, g)
    assert np.abs(d.sum(axis=0)).max() < 1e-8 * 32


def test_finite_diff_check_examples():
    rng = np.random.default_rng(11)
    c_s, c_t = random_spd(4, rng), random_spd(4, rng)
    f = lambda x: np.sum((x - c_t) ** 2) / (4 * 16)  # noqa: E731
    assert finite_diff_check(f, c_s, grad_loss_coral_wrt_cov(c_s, c_t)) < 1e-7
    assert finite_diff_check(lambda x: 3.0, c_s, np.zeros((4, 4))) == 0.0


def test_finite_diff_check_non_finite():
    with pytest.raises(NumericalError):
        finite_diff_check(lambda x: float("nan"), np.eye(2), np.zeros((2, 2)))


def _property_instances(count=100, seed=20):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = int(rng.integers(2, 17))
        n = int(rng.integers(d + 2, 65))
        spread = 10 ** rng.uniform(0, 4)
        c_s = random_spd_with_condition(d, spread, rng)
        c_t = random_spd_with_condition(d, spread, rng)
        x = rng.standard_normal((n, d)) * np.sqrt(np.logspace(0, np.log10(spread), d))
        yield c_s, c_t, x


@pytest.fixture(scope="module")
def property_errors():
    out = {key: [] for key in ("coral_cov", "log_cov", "coral_feat", "log_feat")}
    for c_s, c_t, x in _property_instances():
        for loss in ("coral", "log"):
            out[f"{loss}_cov"].append(check_cov_gradient(loss, c_s, c_t))
            out[f"{loss}_feat"].append(check_feature_gradient(loss, x, c_t))
    return out


@pytest.mark.parametrize("key", ["coral_cov", "log_cov", "coral_feat", "log_feat"])
def test_gradient_property_scaled(property_errors, key):
    """Gradient error relative to the gradient's own scale, over 100 instances."""
    assert max(e.scaled for e in property_errors[key]) < 1e-5


@pytest.mark.parametrize("key", ["coral_cov", "log_cov", "coral_feat", "log_feat"])
def test_gradient_property_entrywise(property_errors, key):
    """Entry-wise relative error below 1e-5 on every entry of every instance.

    Fails whenever an instance has a gradient entry close to zero, where the
    finite-difference error (rounding or O(h^2) truncation) is of the same
    order as the entry itself.
    """
    worst = max(e.entrywise for e in property_errors[key])
    assert worst < 1e-5, f"max entry-wise relative error {worst:.3e}"


def _project_spd(m, floor=1e-8):
    lam, u = np.linalg.eigh(symmetrize(m))
    return symmetrize((u * np.maximum(lam, floor)) @ u.T)


@pytest.mark.parametrize("loss", ["coral", "log"])
def test_descent_step(loss):
    value_fn, grad_fn = (loss_coral, loss_coral_and_grads) if loss == "coral" else (
        loss_log, loss_log_and_grads)
    rng = np.random.default_rng(30)
    for _ in range(100):
        d = int(rng.integers(2, 10))
        c_s, c_t = random_spd(d, rng), random_spd(d, rng)
        value, g, _ = grad_fn(c_s, c_t)
        step = 1e-3 / max(1e-12, np.linalg.norm(g))
        stepped = _project_spd(c_s - step * g)
        assert value_fn(stepped, c_t).value < value.value


@pytest.mark.parametrize("grad_fn", [loss_coral_and_grads, loss_log_and_grads])
def test_gradient_vanishes_at_minimum(grad_fn):
    c = random_spd(7, np.random.default_rng(31))
    _, g_s, g_t = grad_fn(c, c)
    assert np.linalg.norm(g_s) < 1e-10 and np.linalg.norm(g_t) < 1e-10
