import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoslab.chaos import (
    HermiteExpansion,
    ShiftedExpansion,
    chaos_bound,
    derivative,
    derivative_norm_sq,
    evaluate,
    expand,
    gauss_hermite,
    hermite_eval,
    hermite_table,
    neg_L_power,
    ou_semigroup,
    shift_down,
    shift_operator,
)
from chaoslab.errors import (
    NegativeTime,
    NonFiniteQuadrature,
    NonzeroConstant,
    PreconditionError,
    RankNotFound,
    ZeroRank,
)
from chaoslab.selftest import random_expansion

EXPLICIT = [
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: x**2 - 1,
    lambda x: x**3 - 3 * x,
    lambda x: x**4 - 6 * x**2 + 3,
    lambda x: x**5 - 10 * x**3 + 15 * x,
]


@pytest.mark.parametrize(
    "q, x, expected",
    [(0, 7.3, 1.0), (1, 0.0, 0.0), (3, 2.0, 2.0), (2, 2.0, 3.0)],
)
def test_hermite_eval_examples(q, x, expected):
    assert hermite_eval(q, x) == expected


def test_recurrence_matches_explicit_polynomials():
    x = np.random.default_rng(1).uniform(-5, 5, size=100)
    for q, f in enumerate(EXPLICIT):
        exact = f(x)
        got = hermite_eval(q, x)
        np.testing.assert_allclose(got, exact, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(hermite_table(5, x)[q], exact, rtol=1e-12, atol=1e-12)


def test_orthogonality_under_gaussian_quadrature():
    x, w = gauss_hermite(64)
    H = hermite_table(10, x)
    gram = (H * w) @ H.T
    expected = np.diag([math.factorial(q) for q in range(11)]).astype(float)
    np.testing.assert_allclose(gram / np.sqrt(np.outer(np.diag(expected), np.diag(expected))),
                               np.eye(11), atol=1e-10)


def test_negative_degree_rejected():
    with pytest.raises(PreconditionError):
        hermite_eval(-1, 0.0)


def test_expand_h2_exact():
    e = expand(lambda x: x**2 - 1, Q=6)
    expected = np.zeros(7)
    expected[2] = 1.0
    np.testing.assert_allclose(e.coeffs, expected, atol=1e-12)
    assert e.rank == 2
    assert e.mean == pytest.approx(0.0, abs=1e-12)


def test_expand_cube_matches_symbolic_identity():
    # x^3 = H_3 + 3 H_1
    e = expand(lambda x: x**3, Q=6)
    expected = np.array([0, 3, 0, 1, 0, 0, 0], dtype=float)
    np.testing.assert_allclose(e.coeffs, expected, atol=1e-12)
    assert e.rank == 1
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(hermite_eval(3, x) + 3 * hermite_eval(1, x), x**3, atol=1e-12)


def test_expand_sign_against_gaussian_moments():
    # E[sign(N) H_q(N)] / q! = 2 pdf(0) H_{q-1}(0) / q!
    e = expand(np.sign, Q=5)
    pdf0 = 1 / math.sqrt(2 * math.pi)
    c1 = 2 * pdf0
    c3 = 2 * pdf0 * (-1.0) / 6
    assert c1 == pytest.approx(0.797885, abs=1e-6)
    assert c3 == pytest.approx(-0.132981, abs=1e-6)
    # the jump at 0 limits Gauss-Hermite accuracy to a few 1e-3
    assert e.coeffs[1] == pytest.approx(c1, abs=5e-3)
    assert e.coeffs[3] == pytest.approx(c3, abs=5e-3)
    assert abs(e.coeffs[2]) < 1e-12
    assert e.rank == 1


def test_expand_reports_mean_part_and_discarded_mass():
    e = expand(lambda x: x**2, Q=4)
    assert e.mean == pytest.approx(1.0)
    assert not e.is_centered
    assert e.discarded_mass == pytest.approx(0.0, abs=1e-10)
    sign = expand(np.sign, Q=5)
    assert sign.discarded_mass == pytest.approx(1.0 - sign.l2_norm_sq(), abs=1e-12)


def test_expand_errors():
    with pytest.raises(NonFiniteQuadrature):
        with np.errstate(divide="ignore", invalid="ignore"):
            expand(lambda x: 1.0 / (x - x), Q=3)
    with pytest.raises(RankNotFound):
        expand(lambda x: np.full_like(x, 2.0), Q=3)
    with pytest.raises(PreconditionError):
        expand(np.sign, Q=10, quad_order=5)


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(-3, 3), b=st.floats(-3, 3),
    ca=st.lists(st.floats(-2, 2), min_size=6, max_size=6),
    cb=st.lists(st.floats(-2, 2), min_size=6, max_size=6),
)
def test_expand_is_linear(a, b, ca, cb):
    f = lambda x: np.polyval(ca, x)  # noqa: E731
    g = lambda x: np.polyval(cb, x)  # noqa: E731
    try:
        lhs = expand(lambda x: a * f(x) + b * g(x), Q=8).coeffs
    except RankNotFound:
        return
    rhs = a * expand_all(f) + b * expand_all(g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def expand_all(f):
    try:
        return expand(f, Q=8).coeffs
    except RankNotFound:
        x, w = gauss_hermite(128)
        out = np.zeros(9)
        out[0] = float(np.dot(w, f(x)))
        return out


def test_evaluate_matches_direct_sum():
    rng = np.random.default_rng(3)
    c = rng.standard_normal(12)
    x = rng.uniform(-4, 4, 50)
    direct = sum(c[q] * hermite_eval(q, x) for q in range(12))
    np.testing.assert_allclose(evaluate(HermiteExpansion(c), x), direct, rtol=1e-12, atol=1e-9)


def test_json_roundtrip():
    e = HermiteExpansion.from_coeffs([0.0, 3.0, 0.0, 1.0])
    doc = e.to_dict()
    assert set(doc) == {"mean", "coeffs", "rank", "truncation"}
    back = HermiteExpansion.from_json(e.to_json())
    np.testing.assert_array_equal(back.coeffs, e.coeffs)
    assert back.rank == 1 and back.truncation == 3
    with pytest.raises(PreconditionError):
        HermiteExpansion.from_dict({**doc, "rank": 2})


@pytest.mark.parametrize(
    "coeffs, expected",
    [
        ([0, 0, 1], [1]),
        ([0, 3, 0, 1], [3, 0, 1]),
        ([0, 0, 0, 2, 1], [2, 1]),
    ],
)
def test_shift_operator_examples(coeffs, expected):
    out = shift_operator(HermiteExpansion.from_coeffs(coeffs))
    np.testing.assert_array_equal(out.coeffs, expected)


def test_shift_operator_rank_metadata_and_errors():
    assert shift_operator(HermiteExpansion.hermite(2)).rank == 0
    assert shift_operator(HermiteExpansion.from_coeffs([0, 0, 0, 2, 1])).rank == 1
    with pytest.raises(ZeroRank):
        shift_operator(HermiteExpansion.from_coeffs([1.0]))
    with pytest.raises(NonzeroConstant):
        shift_operator(HermiteExpansion.from_coeffs([1.0, 1.0]))


def test_shift_down_single_term():
    for d in range(1, 7):
        s = ShiftedExpansion.from_expansion(HermiteExpansion.hermite(d))
        for _ in range(d):
            s = shift_down(s)
        assert s.tensor_power == d
        np.testing.assert_allclose(s.coeffs, [1.0], rtol=1e-15)


def test_shift_down_once_on_cube():
    e = HermiteExpansion.from_coeffs([0, 3, 0, 1])
    s = shift_down(ShiftedExpansion.from_expansion(e))
    assert s.tensor_power == 1
    np.testing.assert_allclose(s.coeffs, [3, 0, 1], rtol=1e-15)
    np.testing.assert_allclose(s.coeffs, shift_operator(e).coeffs, rtol=1e-15)


def test_shift_down_zero_times_is_identity_and_constant_rejected():
    e = HermiteExpansion.from_coeffs([0, 1, 2])
    s = ShiftedExpansion.from_expansion(e)
    np.testing.assert_array_equal(s.coeffs, e.coeffs)
    assert s.tensor_power == 0
    with pytest.raises(NonzeroConstant):
        shift_down(ShiftedExpansion(np.array([1.0, 2.0])))


def test_derivative_acts_like_calculus():
    # d/dx H_q = q H_{q-1}
    rng = np.random.default_rng(5)
    c = rng.standard_normal(7)
    x = np.linspace(-2, 2, 9)
    h = 1e-6
    e = HermiteExpansion(c)
    numeric = (evaluate(e, x + h) - evaluate(e, x - h)) / (2 * h)
    d = derivative(ShiftedExpansion(c))
    np.testing.assert_allclose(evaluate(HermiteExpansion(d.coeffs), x), numeric, rtol=1e-6, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_repeated_shift_down_matches_shift_operator(seed):
    e = random_expansion(np.random.default_rng(seed))
    s = ShiftedExpansion.from_expansion(e)
    for _ in range(e.rank):
        s = shift_down(s)
    target = shift_operator(e)
    assert s.tensor_power == e.rank
    np.testing.assert_allclose(s.coeffs, target.coeffs, rtol=0, atol=1e-15 * max(1, np.abs(e.coeffs).max()))


def test_ou_semigroup_examples():
    e = HermiteExpansion.hermite(2)
    np.testing.assert_array_equal(ou_semigroup(e, 0.0).coeffs, e.coeffs)
    assert ou_semigroup(e, math.log(2)).coeffs[2] == pytest.approx(0.25, rel=1e-15)
    killed = ou_semigroup(HermiteExpansion.from_coeffs([0, 1, 0, 1]), math.inf)
    np.testing.assert_array_equal(killed.coeffs, np.zeros(4))
    with pytest.raises(NegativeTime):
        ou_semigroup(e, -0.1)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 5), t=st.floats(0, 5))
def test_semigroup_law(seed, s, t):
    e = random_expansion(np.random.default_rng(seed))
    lhs = ou_semigroup(ou_semigroup(e, s), t).coeffs
    rhs = ou_semigroup(e, s + t).coeffs
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-15 * max(1, np.abs(e.coeffs).max()))


def test_neg_L_power_examples():
    e = HermiteExpansion.hermite(4)
    np.testing.assert_array_equal(neg_L_power(e, 0).coeffs, e.coeffs)
    assert neg_L_power(e, -1).coeffs[4] == pytest.approx(0.25)
    c = HermiteExpansion.from_coeffs([0, 1.5, -2, 0.25])
    np.testing.assert_allclose(neg_L_power(neg_L_power(c, -1), 1).coeffs, c.coeffs, rtol=1e-15)
    with pytest.raises(NonzeroConstant):
        neg_L_power(HermiteExpansion.from_coeffs([1, 1]), -1)
    assert neg_L_power(HermiteExpansion.from_coeffs([1, 1]), 2).coeffs[0] == 0.0


def test_derivative_norm_examples():
    assert derivative_norm_sq(HermiteExpansion.hermite(3), 1) == 0.0
    # x^3 = H_3 + 3 H_1 has d = 1; only q = 3 contributes 1 * 2^2 * 1!
    assert derivative_norm_sq(HermiteExpansion.from_coeffs([0, 3, 0, 1]), 1) == pytest.approx(4.0)
    e = HermiteExpansion.from_coeffs([0, 0, 0.5, -1.0, 0.25])
    phi_d = shift_operator(e)
    assert derivative_norm_sq(e, 0) == pytest.approx(
        sum(math.factorial(q) * c * c for q, c in enumerate(phi_d.coeffs)), rel=1e-14
    )


def test_derivative_norm_equals_norm_of_derivative_of_shift():
    # E|D^k phi_d|^2 = sum_j j! (k-th derivative coefficient)^2 computed independently
    rng = np.random.default_rng(11)
    for _ in range(20):
        e = random_expansion(rng)
        s = ShiftedExpansion(shift_operator(e).coeffs)
        for k in range(e.rank + 1):
            direct = sum(math.factorial(j) * c * c for j, c in enumerate(s.coeffs))
            assert derivative_norm_sq(e, k) == pytest.approx(direct, rel=1e-12, abs=1e-300)
            s = derivative(s)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_derivative_norm_bound(seed):
    e = random_expansion(np.random.default_rng(seed))
    bound = chaos_bound(e)
    for k in range(e.rank + 1):
        assert derivative_norm_sq(e, k) <= bound * (1 + 1e-12)
