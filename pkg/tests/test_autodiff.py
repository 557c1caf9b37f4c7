"""Tape autodiff: forward values, hand-computed gradients, finite
differences, and bookkeeping invariants."""
import numpy as np
import pytest

from tppattack import autodiff as ad
from tppattack.autodiff import (
    DomainError, ShapeError, Tape, Tensor, backward, grad_check,
)


def leaf(x):
    tape = Tape()
    return tape, tape.leaf(np.asarray(x, dtype=np.float64))


# ------------------------------------------------------------ forward values

def test_forward_values_match_numpy():
    x = np.array([[0.5, -1.2], [2.0, 0.0]])
    assert np.allclose(ad.exp(Tensor(x)).values, np.exp(x))
    assert np.allclose(ad.tanh(Tensor(x)).values, np.tanh(x))
    assert np.allclose(ad.relu(Tensor(x)).values, np.maximum(x, 0))
    assert np.allclose(ad.abs_(Tensor(x)).values, np.abs(x))
    assert np.allclose(ad.sin(Tensor(x)).values, np.sin(x))
    assert np.allclose(ad.cos(Tensor(x)).values, np.cos(x))
    assert np.allclose(ad.softplus(Tensor(x)).values, np.log1p(np.exp(x)))
    assert np.allclose(ad.sigmoid(Tensor(x)).values, 1 / (1 + np.exp(-x)))
    assert np.allclose(ad.softmax(Tensor(x), axis=1).values,
                       np.exp(x) / np.exp(x).sum(axis=1, keepdims=True))


def test_softplus_is_overflow_safe():
    big = Tensor(np.array([800.0, -800.0]))
    out = ad.softplus(big).values
    assert np.isfinite(out).all()
    assert out[0] == pytest.approx(800.0)
    assert out[1] == pytest.approx(0.0, abs=1e-300)


def test_operator_sugar_matches_functions():
    _, x = leaf([[1.0, 2.0], [3.0, 4.0]])
    y = Tensor([[2.0, 2.0], [2.0, 2.0]])
    assert np.allclose((x + y).values, x.values + y.values)
    assert np.allclose((x - y).values, x.values - y.values)
    assert np.allclose((x * y).values, x.values * y.values)
    assert np.allclose((x / y).values, x.values / y.values)
    assert np.allclose((x @ y).values, x.values @ y.values)
    assert np.allclose((-x).values, -x.values)
    assert np.allclose((x ** 2).values, x.values ** 2)
    assert np.allclose(x.T.values, x.values.T)


# ------------------------------------------------------- analytic gradients

def test_matmul_gradient_is_exact():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.5, -1.0], [2.0, 0.25]])
    tape = Tape()
    at, bt = tape.leaf(a), tape.leaf(b)
    y = ad.sum_(ad.matmul(at, bt))
    grads = backward(tape, y)
    ones = np.ones((2, 2))
    assert np.allclose(grads[at.node], ones @ b.T)
    assert np.allclose(grads[bt.node], a.T @ ones)


def test_gather_rows_accumulates_repeated_indices():
    tape, x = leaf([[1.0, 2.0], [3.0, 4.0]])
    y = ad.sum_(ad.gather_rows(x, [0, 0, 1]))
    grads = backward(tape, y)
    assert np.allclose(grads[x.node], [[2.0, 2.0], [1.0, 1.0]])


def test_slice_scatters_gradient_back():
    tape, x = leaf(np.arange(6.0).reshape(2, 3))
    y = ad.sum_(ad.slice_(x, (slice(0, 1), slice(1, 3))))
    grads = backward(tape, y)
    assert np.allclose(grads[x.node], [[0, 1, 1], [0, 0, 0]])


def test_max_routes_subgradient_to_first_argmax():
    tape, x = leaf([3.0, 7.0, 7.0])
    grads = backward(tape, ad.max_(x))
    assert np.allclose(grads[x.node], [0.0, 1.0, 0.0])


def test_subgradients_at_kinks_are_zero():
    for fn in (ad.relu, ad.abs_):
        tape, x = leaf([0.0])
        grads = backward(tape, ad.sum_(fn(x)))
        assert grads[x.node][0] == 0.0


def test_scalar_broadcast_gradient_reduces():
    tape = Tape()
    s = tape.leaf(np.array(2.0))
    x = Tensor(np.array([1.0, 2.0, 3.0]))
    grads = backward(tape, ad.sum_(ad.mul(x, s)))
    assert grads[s.node].reshape(()) == pytest.approx(6.0)


def test_gradient_accumulates_over_reuse():
    tape, x = leaf([2.0])
    y = ad.sum_(x * x + x)       # d/dx (x^2 + x) = 2x + 1
    grads = backward(tape, y)
    assert grads[x.node][0] == pytest.approx(5.0)


# ------------------------------------------------------------ bookkeeping

def test_untracked_tensors_get_no_gradient_entry():
    tape, x = leaf([1.0, 2.0])
    const = Tensor(np.array([3.0, 4.0]))
    grads = backward(tape, ad.sum_(ad.mul(x, const)))
    assert set(grads.keys()) <= set(range(len(tape)))
    assert const.node is None


def test_backward_requires_tracked_scalar_root():
    tape, x = leaf([1.0, 2.0])
    with pytest.raises(ValueError):
        backward(tape, x)                       # not scalar
    with pytest.raises(ValueError):
        backward(tape, Tensor(np.array(1.0)))   # not tracked


def test_mixed_tapes_are_rejected():
    _, x = leaf([1.0])
    _, y = leaf([1.0])
    with pytest.raises(ValueError):
        ad.add(x, y)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        ad.add(Tensor(np.ones(3)), Tensor(np.ones(4)))
    with pytest.raises(ShapeError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_domain_errors():
    with pytest.raises(DomainError):
        ad.log(Tensor(np.array([1.0, 0.0])))
    with pytest.raises(DomainError):
        ad.div(Tensor(np.ones(2)), Tensor(np.array([1.0, 0.0])))


def test_float64_everywhere():
    t = Tensor(np.array([1, 2], dtype=np.int32))
    assert t.values.dtype == np.float64
    assert ad.exp(t).values.dtype == np.float64


def test_backward_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 4))

    def run():
        tape = Tape()
        xt = tape.leaf(x)
        y = ad.sum_(ad.softmax(ad.matmul(xt, ad.transpose(xt)), axis=1) ** 2)
        return backward(tape, y)[xt.node]

    a, b = run(), run()
    assert np.array_equal(a, b)


# ----------------------------------------------------- finite-difference suite

SMOOTH_CASES = [
    ("exp", lambda x: ad.sum_(ad.exp(x))),
    ("log", lambda x: ad.sum_(ad.log(ad.exp(x)))),
    ("softplus", lambda x: ad.sum_(ad.softplus(x))),
    ("sigmoid", lambda x: ad.sum_(ad.sigmoid(x))),
    ("tanh", lambda x: ad.sum_(ad.tanh(x))),
    ("sin", lambda x: ad.sum_(ad.sin(x))),
    ("cos", lambda x: ad.sum_(ad.cos(x))),
    ("softmax", lambda x: ad.sum_(ad.softmax(ad.reshape(x, (2, 3)), axis=1) ** 2)),
    ("matmul", lambda x: ad.sum_(ad.matmul(ad.reshape(x, (2, 3)),
                                           ad.transpose(ad.reshape(x, (2, 3)))))),
    ("div", lambda x: ad.sum_(ad.div(x, ad.softplus(x) + 1.0))),
    ("power", lambda x: ad.sum_((ad.softplus(x) + 0.5) ** 1.7)),
    ("mean", lambda x: ad.mean(ad.exp(x))),
    ("concat", lambda x: ad.sum_(ad.concat([ad.exp(x), ad.sin(x)]) ** 2)),
    ("gather", lambda x: ad.sum_(ad.gather_rows(ad.reshape(x, (3, 2)),
                                                [0, 2, 0]) ** 2)),
    ("slice", lambda x: ad.sum_(ad.exp(ad.slice_(ad.reshape(x, (2, 3)),
                                                 (slice(None), slice(0, 2)))))),
]


@pytest.mark.parametrize("name,fn", SMOOTH_CASES, ids=[c[0] for c in SMOOTH_CASES])
def test_gradcheck_primitives(name, fn):
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(20):
        x = rng.normal(size=6)
        passed, err = grad_check(fn, x, h=1e-5, tol=1e-4)
        assert passed, f"{name}: max rel err {err:.2e}"


def test_gradcheck_kinked_primitives_away_from_kinks():
    rng = np.random.default_rng(7)
    for fn in (lambda x: ad.sum_(ad.relu(x)), lambda x: ad.sum_(ad.abs_(x)),
               lambda x: ad.max_(x)):
        for _ in range(20):
            x = rng.normal(size=5)
            x[np.abs(x) < 0.1] += 0.2           # keep clear of the kinks
            passed, err = grad_check(fn, x, h=1e-5, tol=1e-4)
            assert passed, f"max rel err {err:.2e}"


def test_gradcheck_flags_a_wrong_gradient():
    # sin computed outside the tape: numeric gradient is cos(x), analytic is 0
    def detached_sin(t):
        return ad.sum_(Tensor(np.sin(t.values))) + ad.scale(ad.sum_(t), 0.0)

    passed, err = grad_check(detached_sin, np.array([0.3, -0.8, 1.1]))
    assert not passed and err > 0.1
