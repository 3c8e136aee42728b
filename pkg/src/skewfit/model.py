"""Parameterizations of the skew-t family, the skewness ellipsoid and the priors.

Three coordinate systems are used:

* ``AlphaParams``  (xi, alpha, Sigma, nu): the density is written in these;
* ``DeltaParams``  (xi, delta, Sigma, nu): the priors are elicited in these;
* ``ThetaParams``  (xi, psi, G, nu): the sampler works in these, with
  psi = omega delta and G = Sigma - psi psi'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field, field_validator
from scipy import special

from .distributions import SpdMatrix, as_spd, batched_cholesky, cholesky_checked, invwishart_logpdf
from .errors import ConstraintError, MatrixError

DEFAULT_NU_GRID: tuple[float, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 14, 17, 20, 25, 30, 40, 55, 75, 100)
LOG_PI = math.log(math.pi)


class ModelName(str, Enum):
    NORMAL = "normal"
    T = "t"
    SN = "sn"
    ST = "st"

    @property
    def label(self) -> str:
        return {"normal": "Normal", "t": "Student-t", "sn": "SN", "st": "ST"}[self.value]


@dataclass(frozen=True)
class ModelSpec:
    """Which member of the nested family is fitted."""

    skewed: bool
    heavy_tailed: bool

    @property
    def name(self) -> ModelName:
        if self.skewed:
            return ModelName.ST if self.heavy_tailed else ModelName.SN
        return ModelName.T if self.heavy_tailed else ModelName.NORMAL

    @classmethod
    def from_name(cls, name: str | ModelName) -> "ModelSpec":
        name = ModelName(name)
        return cls(skewed=name in (ModelName.SN, ModelName.ST), heavy_tailed=name in (ModelName.T, ModelName.ST))

    @classmethod
    def all(cls) -> list["ModelSpec"]:
        return [cls.from_name(name) for name in ModelName]


class PriorConfig(BaseModel):
    """Hyperparameters (m, Lambda) of the inverse Wishart prior and the nu grid."""

    iw_dof: float = Field(default=0.0, ge=0.0)
    iw_scale: list[list[float]] | None = None
    nu_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_NU_GRID))

    @field_validator("nu_grid")
    @classmethod
    def _grid_increasing(cls, grid: list[float]) -> list[float]:
        values = np.asarray(grid, dtype=float)
        if values.size and (np.any(~np.isfinite(values)) or np.any(values <= 0)):
            raise ValueError("nu_grid values must be positive and finite")
        if np.any(np.diff(values) <= 0):
            raise ValueError("nu_grid must be strictly increasing")
        return [float(v) for v in values]

    @property
    def k(self) -> int:
        return len(self.nu_grid)

    @property
    def log_nu_prior(self) -> float:
        return -math.log(self.k)

    def scale_matrix(self, p: int) -> NDArray[np.float64]:
        if self.iw_scale is None:
            return np.zeros((p, p))
        scale = np.asarray(self.iw_scale, dtype=float)
        if scale.shape != (p, p):
            raise ConstraintError(f"iw_scale must be {p}x{p}, got {scale.shape}")
        return scale

    def has_zero_scale(self) -> bool:
        return self.iw_scale is None or not np.any(np.asarray(self.iw_scale, dtype=float))


def _vector(x: ArrayLike) -> NDArray[np.float64]:
    return np.atleast_1d(np.asarray(x, dtype=float)).copy()


@dataclass(frozen=True, eq=False)
class AlphaParams:
    xi: NDArray[np.float64]
    alpha: NDArray[np.float64]
    sigma: SpdMatrix
    nu: float

    @property
    def omega(self) -> NDArray[np.float64]:
        return np.sqrt(np.diag(self.sigma.entries))

    @property
    def omega_corr(self) -> SpdMatrix:
        return correlation(self.sigma)


@dataclass(frozen=True, eq=False)
class DeltaParams:
    xi: NDArray[np.float64]
    delta: NDArray[np.float64]
    sigma: SpdMatrix
    nu: float


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """Sampler coordinates. G is kept as a plain array so invalid draws can be scored (-inf)."""

    xi: NDArray[np.float64]
    psi: NDArray[np.float64]
    g: NDArray[np.float64]
    nu: float

    @classmethod
    def build(cls, xi: ArrayLike, psi: ArrayLike, g: ArrayLike, nu: float) -> "ThetaParams":
        xi, psi = _vector(xi), _vector(psi)
        g = np.atleast_2d(np.asarray(g, dtype=float)).copy()
        if not (xi.shape == psi.shape and g.shape == (xi.size, xi.size)):
            raise ConstraintError("xi, psi and G dimensions disagree")
        return cls(xi, psi, g, float(nu))

    @property
    def p(self) -> int:
        return int(self.xi.size)

    @property
    def sigma_entries(self) -> NDArray[np.float64]:
        return self.g + np.outer(self.psi, self.psi)

    def g_spd(self) -> SpdMatrix:
        try:
            return SpdMatrix.from_array(self.g, symmetrize=True)
        except MatrixError as exc:
            raise ConstraintError("G = Sigma - psi psi' is not positive definite") from exc

    def is_valid(self) -> bool:
        try:
            cholesky_checked(0.5 * (self.g + self.g.T))
        except MatrixError:
            return False
        return True


def correlation(sigma: SpdMatrix | ArrayLike) -> SpdMatrix:
    sigma = as_spd(sigma)
    omega = np.sqrt(np.diag(sigma.entries))
    return SpdMatrix.from_array(sigma.entries / np.outer(omega, omega), symmetrize=True)


def _check_unit_diagonal(omega_corr: SpdMatrix) -> None:
    if not np.allclose(np.diag(omega_corr.entries), 1.0, atol=1e-10):
        raise MatrixError("expected a correlation matrix with unit diagonal")


def delta_from_alpha(alpha: ArrayLike, omega_corr: SpdMatrix | ArrayLike) -> NDArray[np.float64]:
    """delta = Omega alpha / sqrt(1 + alpha' Omega alpha); always inside the ellipsoid."""
    omega_corr = as_spd(omega_corr)
    _check_unit_diagonal(omega_corr)
    alpha = _vector(alpha)
    omega_alpha = omega_corr.entries @ alpha
    return omega_alpha / math.sqrt(1.0 + float(alpha @ omega_alpha))


def ellipsoid_form(delta: ArrayLike, omega_corr: SpdMatrix | ArrayLike) -> float:
    """delta' Omega^{-1} delta; the skewness ellipsoid is where this is below one."""
    return float(as_spd(omega_corr).quad_form(_vector(delta)))


def alpha_from_delta(delta: ArrayLike, omega_corr: SpdMatrix | ArrayLike) -> NDArray[np.float64]:
    omega_corr = as_spd(omega_corr)
    _check_unit_diagonal(omega_corr)
    delta = _vector(delta)
    q = ellipsoid_form(delta, omega_corr)
    if q >= 1.0:
        raise ConstraintError(f"delta lies outside the skewness ellipsoid (delta' Omega^-1 delta = {q:.6g})")
    return omega_corr.solve(delta) / math.sqrt(1.0 - q)


def theta_from_delta(dp: DeltaParams) -> ThetaParams:
    omega = np.sqrt(np.diag(dp.sigma.entries))
    psi = omega * _vector(dp.delta)
    tp = ThetaParams.build(dp.xi, psi, dp.sigma.entries - np.outer(psi, psi), dp.nu)
    if not tp.is_valid():
        raise ConstraintError("Sigma - psi psi' is not positive definite; delta is outside the ellipsoid")
    return tp


def delta_from_theta(tp: ThetaParams) -> DeltaParams:
    tp.g_spd()
    sigma = SpdMatrix.from_array(tp.sigma_entries, symmetrize=True)
    omega = np.sqrt(np.diag(sigma.entries))
    return DeltaParams(tp.xi.copy(), tp.psi / omega, sigma, tp.nu)


def alpha_from_theta(tp: ThetaParams) -> AlphaParams:
    dp = delta_from_theta(tp)
    alpha = alpha_from_delta(dp.delta, correlation(dp.sigma))
    return AlphaParams(dp.xi, alpha, dp.sigma, dp.nu)


def theta_from_alpha(ap: AlphaParams) -> ThetaParams:
    delta = delta_from_alpha(ap.alpha, correlation(ap.sigma))
    return theta_from_delta(DeltaParams(_vector(ap.xi), delta, ap.sigma, ap.nu))


def jacobian_logdet(tp: ThetaParams) -> float:
    """log |J| = -1/2 sum_j log(G_jj + psi_j^2) for the (delta, Sigma) -> (psi, G) change."""
    return -0.5 * float(np.sum(np.log(np.diag(tp.g) + tp.psi**2)))


def ellipsoid_log_volume(p: int, omega_logdet: float) -> float:
    return 0.5 * p * LOG_PI + 0.5 * omega_logdet - float(special.gammaln(0.5 * p + 1.0))


def log_prior_delta_given_sigma(delta: ArrayLike, sigma: SpdMatrix | ArrayLike) -> float:
    """Uniform density on the ellipsoid delta' Omega^{-1} delta < 1; -inf outside."""
    omega_corr = correlation(sigma)
    delta = _vector(delta)
    if ellipsoid_form(delta, omega_corr) >= 1.0:
        return -math.inf
    return -ellipsoid_log_volume(delta.size, omega_corr.logdet)


def _nu_in_grid(nu: float, cfg: PriorConfig) -> bool:
    return bool(np.any(np.isclose(cfg.nu_grid, nu, rtol=0.0, atol=1e-9)))


def log_prior(tp: ThetaParams, spec: ModelSpec, cfg: PriorConfig) -> float:
    """Log prior density in theta coordinates; -inf encodes any constraint violation."""
    if not tp.is_valid():
        return -math.inf
    if not spec.skewed and np.any(tp.psi != 0.0):
        return -math.inf
    sigma = SpdMatrix.from_array(tp.sigma_entries, symmetrize=True)
    scale = None if cfg.has_zero_scale() else cfg.scale_matrix(tp.p)
    total = invwishart_logpdf(sigma, cfg.iw_dof, scale)
    if spec.skewed:
        delta = tp.psi / np.sqrt(np.diag(sigma.entries))
        total += log_prior_delta_given_sigma(delta, sigma)
        total += jacobian_logdet(tp)
    if spec.heavy_tailed:
        if not _nu_in_grid(tp.nu, cfg):
            return -math.inf
        total += cfg.log_nu_prior
    return float(total)


def log_prior_batch(
    psi: NDArray[np.float64],
    g: NDArray[np.float64],
    spec: ModelSpec,
    cfg: PriorConfig,
) -> NDArray[np.float64]:
    """log_prior for a population stored as arrays psi (N, p) and G (N, p, p).

    The nu factor is the constant -log K because every particle carries a grid value.
    """
    p = g.shape[-1]
    sigma = g + psi[:, :, None] * psi[:, None, :]
    _, g_ok = batched_cholesky(0.5 * (g + np.swapaxes(g, -1, -2)))
    sigma_chol, sigma_ok = batched_cholesky(sigma)
    ok = g_ok & sigma_ok
    logdet_sigma = 2.0 * np.sum(np.log(np.diagonal(sigma_chol, axis1=-2, axis2=-1)), axis=-1)
    total = -0.5 * (cfg.iw_dof + p + 1) * logdet_sigma
    if not cfg.has_zero_scale():
        lam = cfg.scale_matrix(p)
        w = np.linalg.solve(sigma_chol, np.broadcast_to(cholesky_checked(lam), sigma.shape))
        total = total - 0.5 * np.sum(w * w, axis=(-2, -1))
        if cfg.iw_dof > p - 1:
            lam_logdet = 2.0 * float(np.sum(np.log(np.diag(cholesky_checked(lam)))))
            total = total + 0.5 * cfg.iw_dof * lam_logdet - 0.5 * cfg.iw_dof * p * math.log(2.0) - float(special.multigammaln(0.5 * cfg.iw_dof, p))
    if spec.skewed:
        sigma_diag = np.where(ok[:, None], np.diagonal(sigma, axis1=-2, axis2=-1), 1.0)
        log_sigma_diag = np.log(sigma_diag)
        omega_logdet = logdet_sigma - np.sum(log_sigma_diag, axis=-1)
        total = total - (0.5 * p * LOG_PI + 0.5 * omega_logdet - float(special.gammaln(0.5 * p + 1.0)))
        total = total - 0.5 * np.sum(log_sigma_diag, axis=-1)
    if spec.heavy_tailed:
        total = total + cfg.log_nu_prior
    return np.where(ok, total, -np.inf)


@dataclass(frozen=True)
class PreconditionCheck:
    ok: bool
    condition: str | None = None
    message: str | None = None


INSUFFICIENT_SAMPLE = "n >= p+1"
IMPROPER_NU_PRIOR = "proper nu prior"


def validate_posterior_preconditions(n: int, p: int, cfg: PriorConfig) -> PreconditionCheck:
    """Posterior propriety needs n >= p + 1 and a proper discrete prior on nu."""
    if n < p + 1:
        return PreconditionCheck(False, INSUFFICIENT_SAMPLE, f"insufficient sample: n={n} but n >= p+1 = {p + 1} is required")
    if cfg.k == 0 or not all(math.isfinite(v) for v in cfg.nu_grid):
        return PreconditionCheck(False, IMPROPER_NU_PRIOR, "improper nu prior: nu_grid must be finite and non-empty")
    return PreconditionCheck(True)
