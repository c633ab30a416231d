import numpy as np
import pytest

from micromorph.polynomials import Poly3, PolyMat3, grad_vec, sym_grad


def test_arithmetic_and_eval():
    p = Poly3({(1, 0, 0): 2.0, (0, 1, 0): -1.0})      # 2x - y
    q = Poly3({(0, 0, 1): 3.0, (0, 0, 0): 1.0})       # 3z + 1
    x = np.array([0.5, 2.0, -1.0])
    assert (p + q)(x) == pytest.approx(2 * 0.5 - 2.0 + 3 * (-1.0) + 1.0)
    assert (p * q)(x) == pytest.approx(p(x) * q(x))
    assert (p - q)(x) == pytest.approx(p(x) - q(x))
    assert (2.5 * p)(x) == pytest.approx(2.5 * p(x))


def test_differentiation():
    # d/dx (x^2 y) = 2 x y ; d/dy = x^2 ; d/dz = 0
    p = Poly3({(2, 1, 0): 1.0})
    x = np.array([1.5, -0.5, 2.0])
    assert p.diff(0)(x) == pytest.approx(2 * 1.5 * -0.5)
    assert p.diff(1)(x) == pytest.approx(1.5 ** 2)
    assert p.diff(2)(x) == 0.0


def test_diff_product_rule():
    rng = np.random.default_rng(0)
    a = PolyMat3.random(rng, degree=1)[0, 0]
    b = PolyMat3.random(rng, degree=2)[1, 2]
    x = np.array([0.3, 0.7, -0.2])
    lhs = (a * b).diff(1)(x)
    rhs = (a.diff(1) * b)(x) + (a * b.diff(1))(x)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_matrix_ops():
    rng = np.random.default_rng(1)
    M = PolyMat3.random(rng, degree=2)
    x = np.array([0.1, -0.4, 0.9])
    V = M(x)
    assert np.allclose(M.transpose()(x), V.T)
    assert M.trace()(x) == pytest.approx(np.trace(V))
    assert np.allclose(M.sym()(x), 0.5 * (V + V.T))
    assert np.allclose(M.skew()(x), 0.5 * (V - V.T))
    assert np.allclose(M.dev()(x), V - np.trace(V) / 3 * np.eye(3))


def test_curl_rows_against_fd():
    rng = np.random.default_rng(2)
    M = PolyMat3.random(rng, degree=3)
    C = M.curl_rows()
    x = np.array([0.25, -0.3, 0.55])
    h = 1e-6
    for i in range(3):
        d = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            d.append((M(x + e)[i] - M(x - e)[i]) / (2 * h))
        fd = np.array([d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]])
        assert np.allclose(C(x)[i], fd, atol=1e-7)


def test_curl_of_gradient_vanishes():
    v = [Poly3({(1, 1, 0): 2.0, (0, 0, 3): -1.0}),
         Poly3({(2, 0, 1): 0.5}),
         Poly3({(0, 2, 0): 1.5})]
    G = grad_vec(v)
    C = G.curl_rows()
    x = np.array([0.8, 0.1, -0.6])
    assert np.abs(C(x)).max() == 0.0


def test_sym_grad():
    v = [Poly3({(0, 1, 0): 1.0}), Poly3({(1, 0, 0): 1.0}), Poly3()]
    S = sym_grad(v)
    x = np.zeros(3)
    expect = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0.0]])
    assert np.allclose(S(x), expect)


def test_degree_cap():
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        PolyMat3.random(rng, degree=4)
