import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projfinsler import jets
from projfinsler.jets import Jet, JetOrderError, jet_space


def test_variable_seed():
    (r,) = jets.seed([2.0], 3)
    assert r.value == 2.0
    assert r.partial(0) == 1.0
    assert r.partial(0, 0) == 0.0
    assert r.partial(0, 0, 0) == 0.0


def test_square_derivatives():
    (r,) = jets.seed([2.0], 2)
    f = r * r
    assert f.partial(0) == pytest.approx(4.0, abs=0)
    assert f.partial(0, 0) == pytest.approx(2.0, abs=0)


def test_bilinear_mixed_partial():
    r, v = jets.seed([2.0, 3.0], 2)
    f = r * v
    assert f.partial(0, 1) == 1.0
    assert f.partial(0, 0) == 0.0
    assert f.value == 6.0


def test_order_limits():
    with pytest.raises(JetOrderError):
        jet_space(2, 5)
    (x,) = jets.seed([1.0], 2)
    with pytest.raises(JetOrderError):
        x.partial(0, 0, 0)


def test_rejects_bad_leading_values():
    (x,) = jets.seed([0.0], 2)
    with pytest.raises(ZeroDivisionError):
        1.0 / x
    with pytest.raises(ValueError):
        jets.sqrt(x)
    with pytest.raises(ValueError):
        jets.sqrt(x - 1.0)


def test_elementary_functions_exact():
    # d^k/dx^k at x0 for sin, exp, log, sqrt
    x0 = 0.7
    (x,) = jets.seed([x0], 4)
    s = jets.sin(x)
    assert s.partial(0, 0, 0, 0) == pytest.approx(math.sin(x0), rel=1e-14)
    e = jets.exp(x)
    assert e.partial(0, 0, 0) == pytest.approx(math.exp(x0), rel=1e-14)
    lg = jets.log(x)
    assert lg.partial(0, 0) == pytest.approx(-1 / x0**2, rel=1e-14)
    sq = jets.sqrt(x)
    assert sq.partial(0, 0, 0) == pytest.approx(3 / 8 * x0**-2.5, rel=1e-13)
    c = jets.cos(x)
    assert c.partial(0) == pytest.approx(-math.sin(x0), rel=1e-14)


def test_leibniz_product_rule_order3():
    a, b = jets.seed([0.4, -1.3], 3)
    f = jets.sin(a * b) * jets.exp(b)
    g = jets.cos(a) + b**3
    h = f * g
    # d/da of h = f_a g + f g_a
    assert h.partial(0) == pytest.approx(f.partial(0) * g.value + f.value * g.partial(0), rel=1e-13)
    lhs = h.partial(0, 1)
    rhs = (f.partial(0, 1) * g.value + f.partial(0) * g.partial(1)
           + f.partial(1) * g.partial(0) + f.value * g.partial(0, 1))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_batch_and_diff_truncate():
    x, y = jets.seed([np.array([0.5, 1.0, 2.0]), np.array([1.0, 2.0, 3.0])], 3)
    f = x * x * y
    np.testing.assert_allclose(f.partial(0, 0, 1), 2.0, atol=0)
    d = f.diff(0)
    assert d.order == 2
    np.testing.assert_allclose(d.value, 2 * x.value * y.value)
    t = f.truncate(1)
    np.testing.assert_allclose(t.gradient(), f.gradient())
    H = f.hessian()
    assert H.shape == (3, 2, 2)
    np.testing.assert_allclose(H[:, 0, 1], 2 * x.value)


def test_float_powers():
    (x,) = jets.seed([1.5], 3)
    p = x**2.5
    assert p.partial(0, 0) == pytest.approx(2.5 * 1.5 * 1.5**0.5, rel=1e-13)
    assert (x**-2).partial(0) == pytest.approx(-2 * 1.5**-3, rel=1e-13)


# -- random composite expressions vs central differences ------------------

def _expr(k):
    funcs = [
        lambda a, b, c: jets.sin(a * b) + c * c / (1.5 + a * a),
        lambda a, b, c: jets.sqrt(2.0 + a * a + b * c * 0.3) * jets.exp(0.2 * c),
        lambda a, b, c: jets.log(3.0 + a - 0.5 * b) * jets.cos(c - a),
        lambda a, b, c: (a * b * c + 1.0) ** 3 / (4.0 + b * b),
        lambda a, b, c: jets.exp(jets.sin(a) * b) - c**2.5,
    ]
    return funcs[k % len(funcs)]


H = 1e-5


@settings(max_examples=100, deadline=None)
@given(k=st.integers(0, 4),
       p=st.tuples(*[st.floats(0.2, 1.2) for _ in range(3)]))
def test_jets_match_central_differences(k, p):
    f = _expr(k)
    J = f(*jets.seed(list(p), 2))
    base = np.array(p)

    def val(q):
        return float(f(*[float(t) for t in q]))

    for i in range(3):
        e = np.zeros(3)
        e[i] = H
        fd1 = (val(base + e) - val(base - e)) / (2 * H)
        assert abs(J.partial(i) - fd1) < 1e-7 * max(1.0, abs(fd1))
        for j in range(i, 3):
            ej = np.zeros(3)
            ej[j] = H
            fd2 = (val(base + e + ej) - val(base + e - ej) - val(base - e + ej)
                   + val(base - e - ej)) / (4 * H * H)
            assert abs(J.partial(i, j) - fd2) < 1e-4 * max(1.0, abs(fd2))


def test_constant_jet_and_numpy_deferral():
    space = jet_space(2, 2)
    c = Jet.constant(3.0, space)
    a = np.float64(2.0) * c
    assert isinstance(a, Jet)
    assert a.value == 6.0
    assert (np.array(1.0) + c).value == 4.0
