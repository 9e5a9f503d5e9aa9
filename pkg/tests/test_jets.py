import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mflab import jets
from mflab.finsler import jet_inverse

from conftest import fd_grad

coord = st.floats(-1.5, 1.5)


def _f(z):
    x, y = z[..., 0], z[..., 1]
    return np.sin(x) * np.exp(y) / (1 + x * x) + np.sqrt(2 + np.cos(x * y))


def _f_jet(J):
    x, y = J[:, 0], J[:, 1]
    return jets.sin(x) * jets.exp(y) / (x * x + 1.0) + jets.sqrt(jets.cos(x * y) + 2.0)


@given(coord, coord)
def test_first_and_second_partials_match_differences(a, b):
    z = np.array([[a, b]])
    J = _f_jet(jets.seed(z, 3))
    grad = J.grad(range(2)).value[0]
    assert np.allclose(grad, fd_grad(lambda q: _f(q), z[0]), atol=1e-8)
    hess = np.array([[J.d(i).d(j).value[0] for j in range(2)] for i in range(2)])
    fd_h = fd_grad(lambda q: _f_jet(jets.seed(q[None], 1)).grad(range(2)).value[0], z[0])
    assert np.allclose(hess, fd_h, atol=1e-7)
    assert np.allclose(hess, hess.T, atol=1e-12)


def test_log_exp_and_powers_round_trip():
    z = np.array([[0.3, 0.7], [1.1, -0.4]])
    J = jets.seed(z, 4)
    x = J[:, 0] * J[:, 0] + 1.0
    back = jets.exp(jets.log(x))
    assert np.allclose(back.c, x.c, atol=1e-13)
    p = jets.power(x, 1.5) * jets.power(x, -0.5)
    assert np.allclose(p.c, x.c, atol=1e-13)
    assert np.allclose((x ** 3).c, (x * x * x).c, atol=1e-13)


def test_known_taylor_coefficients():
    J = jets.seed(np.array([[0.0]]), 5)
    s = jets.sin(J[:, 0]).c[:, 0]
    assert np.allclose(s, [0, 1, 0, -1 / 6, 0, 1 / 120])
    e = jets.exp(J[:, 0]).c[:, 0]
    assert np.allclose(e, [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120])


def test_truncation_is_a_slice():
    J = jets.seed(np.array([[0.2, 0.5, 0.1]]), 4)
    f = jets.cos(J[:, 0] * J[:, 1]) * J[:, 2]
    g = jets.cos(J.trunc(2)[:, 0] * J.trunc(2)[:, 1]) * J.trunc(2)[:, 2]
    assert np.allclose(f.trunc(2).c, g.c, atol=1e-15)


def test_einsum_matches_numpy_on_values():
    rng = np.random.default_rng(1)
    J = jets.seed(rng.normal(size=(5, 3)), 2)
    A = jets.einsum("pi,pj->pij", J, J)
    M = rng.normal(size=(5, 3, 3))
    out = jets.einsum("pij,pjk->pik", A, M)
    ref = np.einsum("pi,pj,pjk->pik", J.value, J.value, M)
    assert np.allclose(out.value, ref)


@given(st.floats(0.1, 1.0), st.floats(-0.5, 0.5))
def test_jet_inverse_matches_numpy(a, b):
    z = np.array([[a, b]])
    J = jets.seed(z, 2)
    x, y = J[:, 0], J[:, 1]
    one = jets.Jet.constant(J.space, np.ones(1), J.k)
    row0 = jets.stack([x * x + 2.0, x * y], -1)
    row1 = jets.stack([x * y, y * y + one * 1.5], -1)
    A = jets.stack([row0, row1], -2)
    inv = jet_inverse(A)
    assert np.allclose(inv.value[0], np.linalg.inv(A.value[0]), atol=1e-13)

    def num_inv(q):
        xx, yy = q
        return np.linalg.inv(np.array([[xx * xx + 2, xx * yy], [xx * yy, yy * yy + 1.5]]))

    fd = fd_grad(num_inv, z[0])
    assert np.allclose(inv.grad(range(2)).value[0], fd, atol=1e-8)


def test_cannot_differentiate_below_order_zero():
    J = jets.seed(np.array([[1.0, 2.0]]), 0)
    with pytest.raises(ValueError):
        J.d(0)
