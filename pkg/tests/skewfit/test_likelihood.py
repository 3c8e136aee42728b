import math

import numpy as np
import pytest
from scipy import integrate, special

from src.skewfit.distributions import RngStream, SpdMatrix, gamma_sample, mvn_logpdf, mvt_logpdf, sn_logpdf
from src.skewfit.errors import ConstraintError, DegenerateLatentsError, DomainError
from src.skewfit.likelihood import (
    Dataset,
    LatentState,
    augmented_loglik,
    cml_estimates,
    nu_equation_rhs,
    nu_equation_root,
    observed_loglik,
    solve_nu_equation,
    st_logpdf,
)
from src.skewfit.model import AlphaParams, ModelSpec, ThetaParams, theta_from_alpha

ST = ModelSpec.from_name("st")


def _alpha_1d(alpha: float, nu: float, xi: float = 0.5, scale: float = 1.7) -> AlphaParams:
    return AlphaParams(np.array([xi]), np.array([alpha]), SpdMatrix.from_array([[scale]]), nu)


def test_dataset_validation():
    data = Dataset.from_array([1.0, 2.0, 3.0])
    assert (data.n, data.p) == (3, 1)
    with pytest.raises(DomainError):
        Dataset.from_array([[1.0, math.nan]])
    with pytest.raises(DomainError):
        Dataset.from_array(np.empty((0, 2)))


def test_latent_state_rejects_non_positive_scales():
    with pytest.raises(DomainError):
        LatentState.build([0.1, 0.2], [1.0, 0.0])
    with pytest.raises(DomainError):
        LatentState.build([0.1], [1.0, 2.0])


def test_st_logpdf_cauchy_value():
    assert st_logpdf([0.0], _alpha_1d(0.0, 1.0, xi=0.0, scale=1.0)) == pytest.approx(math.log(1.0 / math.pi))
    # the skew factor is 1/2 at y = xi, cancelling the leading 2
    assert st_logpdf([0.0], _alpha_1d(4.0, 1.0, xi=0.0, scale=1.0)) == pytest.approx(math.log(1.0 / math.pi))


def test_st_logpdf_without_skew_is_student_t(truth_2d):
    ap = AlphaParams(truth_2d.xi, np.zeros(2), truth_2d.sigma, truth_2d.nu)
    points = np.array([[0.0, 0.0], [1.0, -2.0], [3.5, 1.0]])
    assert st_logpdf(points, ap) == pytest.approx(mvt_logpdf(points, ap.xi, ap.sigma, ap.nu), rel=1e-12)


def test_st_logpdf_infinite_nu_is_skew_normal(truth_2d):
    ap = AlphaParams(truth_2d.xi, truth_2d.alpha, truth_2d.sigma, math.inf)
    y = np.array([0.4, -1.1])
    assert st_logpdf(y, ap) == pytest.approx(sn_logpdf(y, ap.xi, ap.alpha, ap.sigma))


@pytest.mark.parametrize("alpha", [-5.0, 0.0, 3.0])
@pytest.mark.parametrize("nu", [1.0, 4.0, 30.0])
def test_st_density_integrates_to_one(alpha, nu):
    ap = _alpha_1d(alpha, nu)
    density = lambda t: math.exp(st_logpdf([t], ap))
    total = integrate.quad(density, -np.inf, 0.5, limit=400)[0] + integrate.quad(density, 0.5, np.inf, limit=400)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_observed_loglik_nesting(truth_2d):
    gen = np.random.default_rng(1)
    data = Dataset.from_array(gen.normal(size=(25, 2)))
    g = truth_2d.sigma.entries
    symmetric = ThetaParams.build(truth_2d.xi, np.zeros(2), g, 6.0)

    assert observed_loglik(data, symmetric, ST) == pytest.approx(observed_loglik(data, symmetric, ModelSpec.from_name("t")), rel=1e-12)
    expected_normal = float(np.sum(mvn_logpdf(data.y, truth_2d.xi, g)))
    assert observed_loglik(data, symmetric, ModelSpec.from_name("normal")) == pytest.approx(expected_normal, rel=1e-12)

    tp = theta_from_alpha(truth_2d)
    sn = ModelSpec.from_name("sn")
    expected_sn = float(np.sum(sn_logpdf(data.y, truth_2d.xi, truth_2d.alpha, truth_2d.sigma)))
    assert observed_loglik(data, tp, sn) == pytest.approx(expected_sn, rel=1e-10)
    assert observed_loglik(data, tp, ST) == pytest.approx(float(np.sum(st_logpdf(data.y, truth_2d))), rel=1e-10)


def test_observed_loglik_rejects_inconsistent_parameters(truth_2d):
    data = Dataset.from_array(np.zeros((5, 2)))
    skewed = theta_from_alpha(truth_2d)
    with pytest.raises(ConstraintError):
        observed_loglik(data, skewed, ModelSpec.from_name("normal"))
    with pytest.raises(ConstraintError):
        observed_loglik(data, ThetaParams.build(truth_2d.xi, np.zeros(2), truth_2d.sigma.entries, math.inf), ModelSpec.from_name("t"))


def _random_alpha_params(seed: int) -> AlphaParams:
    gen = np.random.default_rng(500 + seed)
    p = 1 if seed < 6 else 2
    factor = gen.normal(size=(p, p))
    sigma = factor @ factor.T + 0.5 * np.eye(p)
    alpha = np.zeros(p) if seed == 0 else gen.uniform(-4.0, 4.0, size=p)
    nu = (2.0, 3.0, 5.0, 10.0, 30.0)[seed % 5]
    return AlphaParams(gen.normal(size=p), alpha, SpdMatrix.from_array(sigma, symmetrize=True), nu)


@pytest.mark.parametrize("seed", range(10))
def test_augmented_loglik_marginalizes_to_skew_t(seed):
    ap = _random_alpha_params(seed)
    tp = theta_from_alpha(ap)
    gen = np.random.default_rng(seed)
    row = ap.xi + gen.normal(size=ap.xi.size) * ap.omega
    data = Dataset.from_array(row[None, :])

    def joint(v: float, z: float) -> float:
        return math.exp(augmented_loglik(data, tp, LatentState.build([z], [v])))

    # the joint is even in z, so integrate the half line and double
    half, _ = integrate.dblquad(joint, 0.0, np.inf, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10)
    assert 2.0 * half == pytest.approx(math.exp(st_logpdf(row, ap)), rel=1e-5)


def test_augmented_loglik_is_even_in_z(truth_2d, rng):
    gen = rng.generator
    data = Dataset.from_array(gen.normal(size=(12, 2)))
    z = gen.normal(size=12)
    v = gen.gamma(3.0, 1.0 / 3.0, size=12)
    tp = theta_from_alpha(truth_2d)
    flipped = np.where(gen.random(12) < 0.5, -z, z)
    assert augmented_loglik(data, tp, LatentState.build(flipped, v)) == pytest.approx(augmented_loglik(data, tp, LatentState.build(z, v)), abs=1e-10)


def test_augmented_loglik_normal_spec_with_unit_scales(truth_2d):
    gen = np.random.default_rng(2)
    data = Dataset.from_array(gen.normal(size=(10, 2)))
    tp = ThetaParams.build(truth_2d.xi, np.zeros(2), truth_2d.sigma.entries, math.inf)
    value = augmented_loglik(data, tp, LatentState.build(gen.normal(size=10), np.ones(10)), ModelSpec.from_name("normal"))
    assert value == pytest.approx(float(np.sum(mvn_logpdf(data.y, tp.xi, tp.g))), rel=1e-12)


def test_augmented_loglik_checks_lengths(truth_2d):
    data = Dataset.from_array(np.zeros((4, 2)))
    with pytest.raises(DomainError):
        augmented_loglik(data, theta_from_alpha(truth_2d), LatentState.unit(3))


def _latent_fixture(seed: int, n: int) -> LatentState:
    gen = np.random.default_rng(seed)
    return LatentState.build(gen.normal(size=n), gen.gamma(4.0, 0.25, size=n))


def test_cml_estimates_maximize_augmented_loglik():
    gen = np.random.default_rng(9)
    data = Dataset.from_array(gen.normal(size=(40, 2)) + [1.0, -1.0])
    lat = _latent_fixture(10, 40)
    xi, psi, g = cml_estimates(data, lat)
    best = augmented_loglik(data, ThetaParams.build(xi, psi, g.entries, 5.0), lat)

    for _ in range(25):
        d_xi, d_psi = 0.05 * gen.normal(size=2), 0.05 * gen.normal(size=2)
        d_g = 0.05 * gen.normal(size=(2, 2))
        d_g = 0.5 * (d_g + d_g.T)
        moved = ThetaParams.build(xi + d_xi, psi + d_psi, g.entries + d_g, 5.0)
        assert augmented_loglik(data, moved, lat) < best


def _central_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros(x.size)
    for j in range(x.size):
        step = np.zeros(x.size)
        step[j] = h
        grad[j] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


@pytest.mark.parametrize("seed", range(20))
def test_cml_estimates_are_stationary(seed):
    p = (1, 2, 4)[seed % 3]
    gen = np.random.default_rng(100 + seed)
    n = 40
    data = Dataset.from_array(gen.normal(size=(n, p)) + gen.normal(size=p))
    lat = _latent_fixture(200 + seed, n)
    xi, psi, g = cml_estimates(data, lat)
    nu = 5.0
    best = augmented_loglik(data, ThetaParams.build(xi, psi, g.entries, nu), lat)
    tol = 1e-5 * max(abs(best), 1.0)

    d_xi = _central_gradient(lambda x: augmented_loglik(data, ThetaParams.build(x, psi, g.entries, nu), lat), xi)
    d_psi = _central_gradient(lambda s: augmented_loglik(data, ThetaParams.build(xi, s, g.entries, nu), lat), psi)
    rows, cols = np.triu_indices(p)

    def by_entries(entries: np.ndarray) -> float:
        moved = np.zeros((p, p))
        moved[rows, cols] = entries
        moved[cols, rows] = entries
        return augmented_loglik(data, ThetaParams.build(xi, psi, moved, nu), lat)

    d_g = _central_gradient(by_entries, g.entries[rows, cols])
    assert np.max(np.abs(d_xi)) <= tol
    assert np.max(np.abs(d_psi)) <= tol
    assert np.max(np.abs(d_g)) <= tol

    root = nu_equation_root(lat.v)
    residual = math.log(0.5 * root) - float(special.digamma(0.5 * root)) - nu_equation_rhs(lat.v)
    assert abs(residual) <= 1e-10


def test_cml_estimates_with_all_zero_z_is_weighted_mean():
    gen = np.random.default_rng(12)
    data = Dataset.from_array(gen.normal(size=(15, 3)))
    v = gen.gamma(2.0, 0.5, size=15)
    xi, psi, g = cml_estimates(data, LatentState.build(np.zeros(15), v))
    assert np.array_equal(psi, np.zeros(3))
    assert xi == pytest.approx(v @ data.y / v.sum(), rel=1e-12)
    assert g.dim == 3


def test_cml_estimates_need_enough_rows():
    data = Dataset.from_array(np.arange(6, dtype=float).reshape(3, 2))
    with pytest.raises(DegenerateLatentsError):
        cml_estimates(data, LatentState.unit(3))


def test_nu_equation_unit_scales_have_no_root():
    assert nu_equation_rhs(np.ones(8)) == pytest.approx(0.0)
    assert math.isinf(nu_equation_root(np.ones(8)))
    assert solve_nu_equation(np.ones(8), [1.0, 5.0, 100.0]) == 100.0


def test_nu_equation_two_point_root():
    root = nu_equation_root([0.5, 2.0])
    assert root == pytest.approx(4.3, rel=0.02)
    assert solve_nu_equation([0.5, 2.0], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) == 4.0


def test_nu_equation_recovers_gamma_shape():
    v = gamma_sample(5.0, 5.0, RngStream(1), size=20_000)
    assert nu_equation_root(v) == pytest.approx(10.0, rel=0.15)


def test_nu_equation_rejects_bad_input():
    with pytest.raises(DomainError):
        nu_equation_rhs([1.0, -1.0])
    with pytest.raises(DomainError):
        solve_nu_equation([0.5, 2.0], [])
