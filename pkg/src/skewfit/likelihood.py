"""Observed-data and augmented log-likelihoods, complete-data ML estimators and the nu equation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special

from .distributions import LOG_2, LOG_2PI, SpdMatrix, batched_cholesky, mvn_logpdf, mvt_logpdf, sn_logpdf
from .errors import ConstraintError, DegenerateLatentsError, DomainError, MatrixError
from .model import AlphaParams, ModelSpec, ThetaParams, alpha_from_theta
from .specfun import student_t_logcdf

# Below this fraction of (sum z^2)(sum v) the (xi, psi) normal equations are treated as singular.
CML_DENOMINATOR_RTOL = 1e-12
NU_BRACKET = (1e-3, 1e6)


@dataclass(frozen=True, eq=False)
class Dataset:
    y: NDArray[np.float64]

    @classmethod
    def from_array(cls, y: ArrayLike) -> "Dataset":
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise DomainError(f"dataset must be a non-empty n x p matrix, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise DomainError("dataset has non-finite entries")
        y = y.copy()
        y.setflags(write=False)
        return cls(y)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return int(self.y.shape[1])


@dataclass(frozen=True, eq=False)
class LatentState:
    z: NDArray[np.float64]
    v: NDArray[np.float64]

    @classmethod
    def build(cls, z: ArrayLike, v: ArrayLike) -> "LatentState":
        z = np.atleast_1d(np.asarray(z, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(v, dtype=float)).copy()
        if z.shape != v.shape or z.ndim != 1:
            raise DomainError("z and v must be vectors of the same length")
        if np.any(~(v > 0)) or not np.all(np.isfinite(v)):
            raise DomainError("latent scales v must be positive and finite")
        return cls(z, v)

    @classmethod
    def unit(cls, n: int) -> "LatentState":
        return cls.build(np.zeros(n), np.ones(n))

    @property
    def n(self) -> int:
        return int(self.z.size)

    def residuals(self, data: Dataset, tp: ThetaParams) -> NDArray[np.float64]:
        """eps_i = y_i - xi - psi |z_i| / sqrt(v_i)."""
        shift = (np.abs(self.z) / np.sqrt(self.v))[:, None] * tp.psi[None, :]
        return data.y - tp.xi[None, :] - shift


def st_logpdf(y: ArrayLike, ap: AlphaParams) -> float | NDArray[np.float64]:
    """Skew-t log density 2 t_p(y; nu) T_1(alpha' omega^{-1} (y - xi) sqrt((nu + p)/(Q_y + nu)); nu + p)."""
    if math.isinf(ap.nu):
        return sn_logpdf(y, ap.xi, ap.alpha, ap.sigma)
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1
    rows = np.atleast_2d(y).reshape(-1, ap.sigma.dim)
    p = ap.sigma.dim
    centred = rows - ap.xi
    q = np.atleast_1d(ap.sigma.quad_form(centred))
    arg = (centred / ap.omega) @ ap.alpha * np.sqrt((ap.nu + p) / (q + ap.nu))
    out = LOG_2 + np.atleast_1d(mvt_logpdf(rows, ap.xi, ap.sigma, ap.nu)) + student_t_logcdf(arg, ap.nu + p)
    return float(out[0]) if single else out


def _symmetric_params(tp: ThetaParams) -> SpdMatrix:
    if np.any(tp.psi != 0.0):
        raise ConstraintError("a non-skewed model needs psi = 0")
    return tp.g_spd()


def observed_loglik(data: Dataset, tp: ThetaParams, spec: ModelSpec) -> float:
    if spec.heavy_tailed and not (math.isfinite(tp.nu) and tp.nu > 0):
        raise ConstraintError(f"heavy-tailed models need a finite positive nu, got {tp.nu!r}")
    if spec.skewed:
        ap = alpha_from_theta(tp)
        if spec.heavy_tailed:
            return float(np.sum(st_logpdf(data.y, ap)))
        return float(np.sum(sn_logpdf(data.y, ap.xi, ap.alpha, ap.sigma)))
    sigma = _symmetric_params(tp)
    if spec.heavy_tailed:
        return float(np.sum(mvt_logpdf(data.y, tp.xi, sigma, tp.nu)))
    return float(np.sum(mvn_logpdf(data.y, tp.xi, sigma)))


def _lower_solve(chol: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.linalg.solve(chol, rhs)


def augmented_loglik_batch(
    y: NDArray[np.float64],
    nu: NDArray[np.float64],
    v: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    g: NDArray[np.float64],
    spec: ModelSpec,
) -> NDArray[np.float64]:
    """Complete-data log density for a stack of particles; -inf where G is not SPD.

    Shapes: y (n, p), nu (N,), v and z (N, n), xi and psi (N, p), G (N, p, p).
    """
    n, p = y.shape
    g_chol, ok = batched_cholesky(g)
    logdet_g = 2.0 * np.sum(np.log(np.diagonal(g_chol, axis1=-2, axis2=-1)), axis=-1)
    sqrt_v = np.sqrt(v)
    eps = y[None, :, :] - xi[:, None, :]
    if spec.skewed:
        eps = eps - (np.abs(z) / sqrt_v)[:, :, None] * psi[:, None, :]
    w = _lower_solve(g_chol, np.swapaxes(eps, -1, -2))
    quad = np.sum(w * w, axis=-2)

    total = -0.5 * n * p * LOG_2PI - 0.5 * n * logdet_g - 0.5 * np.sum(v * quad, axis=-1)
    if spec.heavy_tailed:
        log_v = np.log(v)
        half = 0.5 * nu
        total = total + 0.5 * p * np.sum(log_v, axis=-1)
        total = total + n * (half * np.log(half) - special.gammaln(half))
        total = total + (half - 1.0) * np.sum(log_v, axis=-1) - half * np.sum(v, axis=-1)
    if spec.skewed:
        total = total - 0.5 * n * LOG_2PI - 0.5 * np.sum(z * z, axis=-1)
    return np.where(ok, total, -np.inf)


def augmented_loglik(data: Dataset, tp: ThetaParams, lat: LatentState, spec: ModelSpec | None = None) -> float:
    """Log of the complete-data density p(y, z, v | theta), Gaussian and gamma normalizers included.

    ``spec`` defaults to the full skew-t model; nested models drop the z factor
    (not skewed) or the gamma factor with v fixed at one (not heavy-tailed).
    """
    spec = spec or ModelSpec(skewed=True, heavy_tailed=True)
    if lat.n != data.n:
        raise DomainError(f"latent length {lat.n} does not match n={data.n}")
    if tp.p != data.p:
        raise DomainError(f"parameter dimension {tp.p} does not match p={data.p}")
    SpdMatrix.from_array(tp.g, symmetrize=True)
    value = augmented_loglik_batch(
        data.y,
        np.array([tp.nu]),
        lat.v[None, :],
        lat.z[None, :],
        tp.xi[None, :],
        tp.psi[None, :],
        0.5 * (tp.g + tp.g.T)[None, :, :],
        spec,
    )
    return float(value[0])


def cml_estimates_batch(
    y: NDArray[np.float64], v: NDArray[np.float64], z: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_]]:
    """Closed-form complete-data maximizers for a stack of latent draws.

    Returns (xi, psi, G, ok) where ok flags an SPD estimate of G.
    """
    n = y.shape[0]
    sqrt_v = np.sqrt(v)
    abs_z = np.abs(z)
    sum_v = np.sum(v, axis=-1)
    sum_z2 = np.sum(z * z, axis=-1)
    sum_zv = np.sum(abs_z * sqrt_v, axis=-1)
    sum_vy = v @ y
    sum_zvy = (abs_z * sqrt_v) @ y

    denom = sum_z2 * sum_v - sum_zv**2
    regular = denom > CML_DENOMINATOR_RTOL * sum_z2 * sum_v
    safe = np.where(regular, denom, 1.0)[:, None]
    psi = np.where(regular[:, None], (sum_v[:, None] * sum_zvy - sum_zv[:, None] * sum_vy) / safe, 0.0)
    xi = np.where(
        regular[:, None],
        (sum_z2[:, None] * sum_vy - sum_zv[:, None] * sum_zvy) / safe,
        sum_vy / sum_v[:, None],
    )

    eps = y[None, :, :] - xi[:, None, :] - (abs_z / sqrt_v)[:, :, None] * psi[:, None, :]
    g = np.einsum("kn,kni,knj->kij", v, eps, eps) / n
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    _, ok = batched_cholesky(g)
    return xi, psi, g, ok


def cml_estimates(data: Dataset, lat: LatentState) -> tuple[NDArray[np.float64], NDArray[np.float64], SpdMatrix]:
    """Complete maximum likelihood (xi, psi, G) treating z and v as observed.

    A singular (xi, psi) system is the alpha = 0 boundary: psi is set to zero
    and xi falls back to the v-weighted mean.
    """
    if data.n < data.p + 2:
        raise DegenerateLatentsError(f"complete-data estimates need n >= p + 2, got n={data.n}, p={data.p}")
    if lat.n != data.n:
        raise DomainError(f"latent length {lat.n} does not match n={data.n}")
    xi, psi, g, ok = cml_estimates_batch(data.y, lat.v[None, :], lat.z[None, :])
    if not ok[0]:
        raise MatrixError("complete-data estimate of G is singular")
    return xi[0], psi[0], SpdMatrix.from_array(g[0], symmetrize=True)


def nu_equation_rhs(v: ArrayLike) -> float:
    """(sum v - sum log v - n) / n, the right-hand side of log(nu/2) - digamma(nu/2) = rhs."""
    v = np.asarray(v, dtype=float)
    if v.size == 0 or np.any(~(v > 0)):
        raise DomainError("nu equation needs positive latent scales")
    return float(np.mean(v) - np.mean(np.log(v)) - 1.0)


def _nu_equation(nu: float, rhs: float) -> float:
    half = 0.5 * nu
    return math.log(half) - float(special.digamma(half)) - rhs


def nu_equation_root(v: ArrayLike) -> float:
    """Continuous root of the nu equation; +inf when none exists inside the bracket."""
    rhs = nu_equation_rhs(v)
    lo, hi = NU_BRACKET
    if rhs <= 0.0 or _nu_equation(hi, rhs) > 0.0:
        return math.inf
    return float(optimize.brentq(_nu_equation, lo, hi, args=(rhs,), xtol=1e-12, rtol=1e-15, maxiter=500))


def solve_nu_equation(v: ArrayLike, grid: ArrayLike) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("nu grid is empty")
    root = nu_equation_root(v)
    if math.isinf(root):
        return float(grid[-1])
    return float(grid[int(np.argmin(np.abs(grid - root)))])
