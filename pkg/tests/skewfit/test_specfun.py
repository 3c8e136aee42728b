import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import integrate, stats

from src.skewfit.errors import DomainError
from src.skewfit.specfun import (
    SpecFunResult,
    digamma,
    kummer_m,
    ln_gamma,
    log_kummer_m_positive,
    parabolic_cylinder_d,
    reg_inc_beta,
    student_t_cdf,
    student_t_logcdf,
)


def _kummer_decimal(a: float, g: float, z: float, terms: int = 400) -> float:
    getcontext().prec = 60
    a_d, g_d, z_d = Decimal(repr(a)), Decimal(repr(g)), Decimal(repr(z))
    total = Decimal(1)
    term = Decimal(1)
    for k in range(terms):
        term = term * (a_d + k) * z_d / ((g_d + k) * (k + 1))
        total += term
    return float(total)


def test_ln_gamma_known_values():
    assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-13)
    assert ln_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_ln_gamma_rejects_non_positive(x):
    with pytest.raises(DomainError):
        ln_gamma(x)


def test_digamma_values_and_recurrence():
    euler = 0.5772156649015329
    assert digamma(1.0) == pytest.approx(-euler, rel=1e-12)
    assert digamma(2.0) == pytest.approx(1.0 - euler, rel=1e-12)
    h = 1e-6
    numeric = (ln_gamma(7.3 + h) - ln_gamma(7.3 - h)) / (2 * h)
    assert digamma(7.3) == pytest.approx(numeric, rel=1e-7)
    for x in np.linspace(0.05, 50.0, 40):
        assert digamma(x + 1) - digamma(x) - 1.0 / x == pytest.approx(0.0, abs=1e-12 * max(1.0, 1.0 / x))


def test_digamma_rejects_zero():
    with pytest.raises(DomainError):
        digamma(0.0)


def test_reg_inc_beta_endpoints_and_median():
    assert reg_inc_beta(2.0, 3.0, 0.0) == 0.0
    assert reg_inc_beta(2.0, 3.0, 1.0) == 1.0
    assert reg_inc_beta(2.0, 2.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    values = [reg_inc_beta(1.5, 4.0, x) for x in np.linspace(0, 1, 21)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_reg_inc_beta_out_of_range():
    with pytest.raises(DomainError):
        reg_inc_beta(1.0, 1.0, 1.5)


def test_student_t_cdf_values():
    assert student_t_cdf(0.0, 3.0) == 0.5
    assert student_t_cdf(1.0, 1.0) == pytest.approx(0.75, abs=1e-14)
    density = lambda t: stats.t.pdf(t, 7.0)
    oracle = 0.5 + integrate.quad(density, 0.0, 1.5, epsabs=1e-14)[0]
    assert student_t_cdf(1.5, 7.0) == pytest.approx(oracle, abs=1e-12)


def test_student_t_cdf_symmetry_and_normal_limit():
    for dof in (0.5, 1.0, 4.0, 30.0):
        for x in (0.1, 1.0, 3.0, 12.0):
            assert student_t_cdf(x, dof) + student_t_cdf(-x, dof) == pytest.approx(1.0, abs=1e-12)
    for x in range(-3, 4):
        assert student_t_cdf(float(x), 1e6) == pytest.approx(stats.norm.cdf(x), abs=1e-6)


def test_student_t_cdf_rejects_bad_dof():
    with pytest.raises(DomainError):
        student_t_cdf(1.0, 0.0)


def test_student_t_logcdf_matches_scalar():
    xs = np.array([-4.0, -0.5, 0.0, 2.0])
    out = student_t_logcdf(xs, 5.0)
    assert out == pytest.approx([math.log(student_t_cdf(x, 5.0)) for x in xs], rel=1e-10)


def test_kummer_m_basic():
    assert kummer_m(2.0, 3.0, 0.0).value == 1.0
    result = kummer_m(1.0, 1.0, 1.0)
    assert result.converged
    assert result.value == pytest.approx(math.e, rel=1e-12)


def test_kummer_m_negative_argument_matches_high_precision():
    result = kummer_m(2.0, 3.5, -4.2)
    assert result.converged
    assert result.value == pytest.approx(_kummer_decimal(2.0, 3.5, -4.2), rel=1e-10)


@pytest.mark.parametrize("a", [-4.5, -2.0, -0.5, 0.7, 3.0, 5.0])
@pytest.mark.parametrize("g", [0.5, 1.5, 3.5])
@pytest.mark.parametrize("z", [-10.0, -3.0, 2.5, 10.0])
def test_kummer_m_grid(a, g, z):
    result = kummer_m(a, g, z)
    oracle = _kummer_decimal(a, g, z)
    assert result.converged
    assert result.value == pytest.approx(oracle, rel=1e-10, abs=1e-10 * max(1.0, abs(oracle)))


def test_kummer_m_pole():
    with pytest.raises(DomainError):
        kummer_m(1.0, -2.0, 1.0)


def test_kummer_m_reports_non_convergence():
    assert not kummer_m(1.0, 1.0, 50.0, max_terms=5).converged


def test_log_kummer_m_positive_matches_scalar_and_large_arguments():
    a = np.array([0.5, 2.0, 3.0])
    b = np.array([0.5, 1.5, 1.5])
    x = np.array([0.0, 3.0, 40.0])
    log_value, converged = log_kummer_m_positive(a, b, x)
    assert np.all(converged)
    for j in range(3):
        assert log_value[j] == pytest.approx(math.log(kummer_m(a[j], b[j], x[j]).value), rel=1e-11)
    # far beyond double range: M(a, a; x) = e^x
    big, ok = log_kummer_m_positive(np.array([2.0]), np.array([2.0]), np.array([900.0]))
    assert ok[0]
    assert big[0] == pytest.approx(900.0, rel=1e-10)


def test_parabolic_cylinder_d_at_zero():
    result = parabolic_cylinder_d(-1.0, 0.0)
    assert result.converged
    assert result.value == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-12)
    assert parabolic_cylinder_d(-2.0, 0.0).value == pytest.approx(math.sqrt(math.pi) / (2.0 * math.gamma(1.5)), rel=1e-12)
    assert parabolic_cylinder_d(0.0, 1.3).value == pytest.approx(math.exp(-0.25 * 1.3**2))


def test_parabolic_cylinder_d_matches_integral_representation():
    # D_{-nu}(z) = e^{-z^2/4} / Gamma(nu) * int_0^inf t^{nu-1} e^{-t^2/2 - z t} dt
    for p, z in [(-3.0, 2.1), (-1.5, -1.2), (-0.8, 0.6)]:
        nu = -p
        kernel = lambda t: t ** (nu - 1) * math.exp(-0.5 * t * t - z * t)
        integral = integrate.quad(kernel, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)[0] + integrate.quad(kernel, 1.0, math.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
        oracle = math.exp(-0.25 * z * z) / math.gamma(nu) * integral
        result = parabolic_cylinder_d(p, z)
        assert result.converged
        assert result.value == pytest.approx(oracle, rel=1e-8)


def test_parabolic_cylinder_d_rejects_positive_order():
    with pytest.raises(DomainError):
        parabolic_cylinder_d(0.5, 1.0)


def test_specfun_result_requires_a_term():
    with pytest.raises(DomainError):
        SpecFunResult(1.0, True, 0)
