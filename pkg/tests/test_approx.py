import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erfc

from mqsprep import approx
from mqsprep.approx import ChebSeries1D, FourierSeries2D


def test_cheb_series_evaluates_cosine_sum():
    s = ChebSeries1D(np.array([0.5, -0.25, 0.125]))
    x = np.linspace(0, 3, 7)
    assert np.allclose(s(x), 0.5 - 0.25 * np.cos(x) + 0.125 * np.cos(2 * x), atol=1e-15)
    assert s.degree == 2
    assert ChebSeries1D(np.array([1.0, 2.0, 3.0]), "even").coefficients[1] == 0.0


@given(st.integers(0, 10_000))
def test_cheb_fit_reproduces_cosine_polynomials(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=6)
    f = lambda x: sum(c * np.cos(j * x) for j, c in enumerate(a))  # noqa: E731
    s = approx.cheb_fit(f, 5)
    assert np.abs(s.coefficients - a).max() < 1e-12
    assert s.fit_report["sup_error"] < 1e-12


def test_cheb_fit_parity_variants():
    # cos(2x) is symmetric about pi/2 and cos(3x) antisymmetric: exact members of each subspace
    ev = approx.cheb_fit(lambda x: 0.3 + np.cos(2 * x), 6, "even")
    od = approx.cheb_fit(lambda x: np.cos(x) - 0.5 * np.cos(3 * x), 7, "odd")
    assert np.all(ev.coefficients[1::2] == 0) and np.all(od.coefficients[0::2] == 0)
    assert np.allclose(ev.coefficients[:3], [0.3, 0, 1], atol=1e-14)
    assert np.allclose(od.coefficients[:4], [0, 1, 0, -0.5], atol=1e-14)
    # a generic function is reproduced on [0, 1] by both projections as degree grows
    f = lambda x: np.exp(-x**2)  # noqa: E731
    errs = [approx.cheb_fit(f, d, "even").fit_report["sup_error"] for d in (8, 32, 128)]
    assert errs[0] > errs[1] > errs[2]
    e, o = approx.parity_split(approx.cheb_fit(f, 16))
    assert np.allclose(e.coefficients + o.coefficients, approx.cheb_fit(f, 16).coefficients)


def test_cheb_fit_rejects_nonfinite():
    with pytest.raises(approx.ApproximationError), np.errstate(divide="ignore", invalid="ignore"):
        approx.cheb_fit(lambda x: 1 / (x - x), 4)


def test_smooth_step_profile_plateaus():
    l, gap, eps = 0.5, 0.1, 0.01
    p = approx.smooth_step_profile(l, gap, eps)
    assert abs(p(l - gap / 2) - (1 - eps / 2)) <= eps / 4 + 1e-15
    assert p(l + gap / 2) <= eps / 4 + 1e-15
    # independent erfc check of the formula
    w = gap / (2 * 2.5758293035489004 * 1.0)  # erfcinv(0.005) ~ z_{0.9975}/sqrt(2)
    assert abs(p(l) - 0.5 * (1 - eps / 2) * erfc(0.0)) < 1e-15
    assert w > 0


@pytest.mark.parametrize("l,gap,eps", [(0.5, 0.1, 0.01), (0.3, 0.2, 0.05), (0.7, 0.05, 0.002)])
def test_rect_approx_contract(l, gap, eps):
    s = approx.rect_approx(l, gap, eps)
    xs = np.linspace(0, 1, 10_000)
    v = s(xs)
    assert np.abs(v[xs <= l - gap / 2] - 1).max() <= eps
    assert np.abs(v[xs >= l + gap / 2]).max() <= eps
    assert s.sup_on_circle() < 1.0
    assert s.degree <= approx.RECT_DEGREE_CAP
    assert np.all(s.coefficients[1::2] == 0)


def test_rect_approx_degree_search_is_minimal_among_even_degrees():
    l, gap, eps = 0.5, 0.1, 0.01
    s = approx.rect_approx(l, gap, eps)
    prof = approx.smooth_step_profile(l, gap, eps)
    lower = approx.cheb_fit(prof, s.degree - 2, "even")
    assert not approx.check_rect_contract(lower, l, gap, eps)["pass"]


def test_rect_approx_argument_checks():
    with pytest.raises(ValueError):
        approx.rect_approx(0.05, 0.2, 0.01)
    with pytest.raises(ValueError):
        approx.rect_approx(0.5, 0.1, 1.5)
    with pytest.raises(approx.ApproximationError):
        approx.rect_approx(0.5, 0.001, 1e-6, cap=8)


def test_fourier_series_indexing_and_eval():
    c = np.zeros((3, 5), complex)
    c[2, 4] = 0.5  # e^{i x1} e^{2 i x2}
    c[0, 0] = 0.5
    P = FourierSeries2D(c, real=True)
    assert P.degrees == (1, 2)
    assert P.coeff(1, 2) == 0.5 and P.coeff(5, 0) == 0
    x1, x2 = 0.3, -0.8
    assert abs(P(x1, x2) - np.cos(x1 + 2 * x2)) < 1e-15
    Q = P.padded(3, 3)
    assert Q.degrees == (3, 3) and abs(Q(x1, x2) - P(x1, x2)) < 1e-15
    with pytest.raises(ValueError):
        FourierSeries2D(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        FourierSeries2D(np.array([[0, 0, 1j]]).T, real=True)


def test_fourier_series_roundtrip_dict():
    rng = np.random.default_rng(5)
    P = FourierSeries2D(rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5)))
    R = FourierSeries2D.from_dict(P.to_dict())
    assert np.array_equal(P.coefficients, R.coefficients)


@given(st.integers(0, 10_000))
def test_fourier_fit_recovers_trig_polynomial(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    P = FourierSeries2D(c)
    fit = approx.fourier_fit_2d(P, (2, 1), grid=16)
    assert np.abs(fit.coefficients - c).max() < 1e-12


def test_grid_eval_and_filling_ratio():
    g = approx.grid_eval(lambda x1, x2: x1 + 2 * x2, (2, 1))
    assert g.values.shape == (4, 2)
    assert g.values[3, 1] == 0.75 + 1.0
    # F = sqrt(sum f^2) / (sqrt(N) max|f|); brute force
    v = np.array([[i / 4 + 2 * j / 2 for j in range(2)] for i in range(4)])
    expect = np.sqrt((v**2).sum()) / (np.sqrt(8) * v.max())
    assert abs(approx.filling_ratio(g) - expect) < 1e-15
    assert abs(approx.filling_ratio(approx.grid_eval(lambda x: 1 + 0 * x, (3,))) - 1) < 1e-15
    with pytest.raises(ValueError):
        approx.GridFunction((2,), np.ones(3))
