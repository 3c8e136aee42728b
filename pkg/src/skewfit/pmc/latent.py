"""Full conditional of the latent scales v_i and its rejection sampler.

pi(v | ...) = k_v^{-1} v^{C-1} exp(-A v - B sqrt(v)) is sampled by proposing
W = R^2 with R ~ Gamma(2C, beta*), whose right tail is thicker than the
target's. beta* minimizes KL(f || pi); M bounds pi / f.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from ..distributions import LOG_2, RngStream
from ..errors import DomainError, NumericError
from ..model import ThetaParams
from ..specfun import log_kummer_m_positive, parabolic_cylinder_d

logger = logging.getLogger(__name__)

MAX_REJECTION_TRIALS = 1_000_000
# Allowed cancellation in the B > 0 closed form before switching to quadrature.
_CANCELLATION_LIMIT = 1e6
_LOG_SQRT_PI = 0.5 * math.log(math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_GL_PANELS = 16
_TAIL_DROP = 45.0
_TAIL_STEPS = np.array([8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 1024.0])


@dataclass(frozen=True)
class VCondCoeffs:
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"A must be positive, got {self.a!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"C must be positive, got {self.c!r}")
        if not math.isfinite(self.b):
            raise DomainError("B must be finite")


@dataclass(frozen=True)
class RejectionEnvelope:
    alpha_v: float
    beta_v: float
    log_bound: float
    log_kv: float

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound) if self.log_bound < 700 else math.inf

    def v_star(self, c: VCondCoeffs) -> float:
        """Maximizer of pi / f."""
        return ((self.beta_v - c.b) / (2.0 * c.a)) ** 2


def vcond_coeffs_batch(
    nu: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """(A, B) of shape (N, n) and C of shape (N,) for every particle and observation."""
    p = y.shape[1]
    resid = np.swapaxes(y[None, :, :] - xi[:, None, :], -1, -2)
    w_resid = np.linalg.solve(g_chol, resid)
    w_psi = np.linalg.solve(g_chol, psi[:, :, None])
    quad = np.sum(w_resid * w_resid, axis=-2)
    cross = np.sum(w_resid * w_psi, axis=-2)
    a = 0.5 * (nu[:, None] + quad)
    b = -cross * np.abs(z)
    c = 0.5 * (nu + p)
    return a, b, c


def vcond_coeffs(theta: ThetaParams, z_i: float, y_i: ArrayLike) -> VCondCoeffs:
    """A_i = (nu + r' G^{-1} r) / 2, B_i = -r' G^{-1} psi |z_i|, C = (nu + p) / 2 with r = y_i - xi."""
    g = theta.g_spd()
    y_i = np.atleast_1d(np.asarray(y_i, dtype=float))
    a, b, c = vcond_coeffs_batch(
        np.array([theta.nu]), np.array([[z_i]]), theta.xi[None, :], theta.psi[None, :], g.chol[None, :, :], y_i[None, :]
    )
    return VCondCoeffs(float(a[0, 0]), float(b[0, 0]), float(c[0]))


def beta_star(c: VCondCoeffs) -> float:
    return 0.5 * (c.b + math.sqrt(c.b * c.b + 8.0 * c.a * (2.0 * c.c + 1.0)))


def _beta_star_array(a, b, c):
    return 0.5 * (b + np.sqrt(b * b + 8.0 * a * (2.0 * c + 1.0)))


def kl_divergence(c: VCondCoeffs, beta: float, log_kv: float | None = None) -> float:
    """KL(f || pi) for the instrumental W = R^2, R ~ Gamma(2C, beta)."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    log_kv = kv_constant(c) if log_kv is None else log_kv
    two_c = 2.0 * c.c
    return (
        log_kv
        - LOG_2
        - float(special.gammaln(two_c))
        + two_c * math.log(beta)
        + two_c * (two_c + 1.0) * c.a / beta**2
        + two_c * c.b / beta
        - two_c
    )


def log_kv_closed_form(c: VCondCoeffs) -> float:
    """log k_v = log[2 (2A)^{-C} Gamma(2C) exp(B^2 / 8A) D_{-2C}(B / sqrt(2A))]."""
    d = parabolic_cylinder_d(-2.0 * c.c, c.b / math.sqrt(2.0 * c.a))
    if not d.converged or not d.value > 0.0:
        raise NumericError(
            f"parabolic cylinder evaluation failed for A={c.a:.6g}, B={c.b:.6g}, C={c.c:.6g}"
        )
    return (
        LOG_2
        - c.c * math.log(2.0 * c.a)
        + float(special.gammaln(2.0 * c.c))
        + c.b * c.b / (8.0 * c.a)
        + math.log(d.value)
    )


def _sqrt_mode(a, b, c):
    """Mode of s^{2C-1} exp(-A s^2 - B s), the integrand of k_v after v = s^2."""
    power = np.maximum(2.0 * c - 1.0, 0.0)
    return (-b + np.sqrt(b * b + 8.0 * a * power)) / (4.0 * a)


def log_kv_quadrature(c: VCondCoeffs) -> float:
    """log k_v by adaptive quadrature of 2 int s^{2C-1} exp(-A s^2 - B s) ds."""
    power = 2.0 * c.c - 1.0
    mode = float(_sqrt_mode(c.a, c.b, c.c))
    if mode > 0.0:
        peak = power * math.log(mode) - c.a * mode * mode - c.b * mode
        width = 1.0 / math.sqrt(power / mode**2 + 2.0 * c.a)
    else:
        peak, width = 0.0, 1.0 / math.sqrt(2.0 * c.a)

    def integrand(s: float) -> float:
        if s <= 0.0:
            return 0.0 if power > 0 else math.inf
        return math.exp(power * math.log(s) - c.a * s * s - c.b * s - peak)

    edges = [0.0, mode, mode + 20.0 * width]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            total += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    total += integrate.quad(integrand, edges[-1], math.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return LOG_2 + peak + math.log(total)


def kv_constant(c: VCondCoeffs) -> float:
    """log k_v, from the parabolic-cylinder closed form or, when that fails, by quadrature."""
    try:
        return log_kv_closed_form(c)
    except NumericError:
        logger.debug("k_v closed form failed (A=%.6g, B=%.6g, C=%.6g); using quadrature", c.a, c.b, c.c)
        return log_kv_quadrature(c)


def _log_kv_panels(a: NDArray[np.float64], b: NDArray[np.float64], c: NDArray[np.float64]) -> NDArray[np.float64]:
    """Gauss-Legendre panels over the bulk of s^{2C-1} exp(-A s^2 - B s), in log space."""
    power = np.maximum(2.0 * c - 1.0, 0.0)
    mode = _sqrt_mode(a, b, c)
    safe_mode = np.maximum(mode, 1e-300)
    width = 1.0 / np.sqrt(np.where(mode > 0, power / safe_mode**2, 0.0) + 2.0 * a)

    def log_f(s):
        with np.errstate(divide="ignore"):
            return power[..., None] * np.log(s) - a[..., None] * s * s - b[..., None] * s

    peak = log_f(safe_mode[:, None])[:, 0]
    rows = np.arange(mode.size)
    up = mode[:, None] + _TAIL_STEPS[None, :] * width[:, None]
    up_drop = log_f(up) < peak[:, None] - _TAIL_DROP
    hi = up[rows, np.where(np.any(up_drop, axis=1), np.argmax(up_drop, axis=1), _TAIL_STEPS.size - 1)]
    down = mode[:, None] - _TAIL_STEPS[None, :] * width[:, None]
    inside = down > 0
    drop = np.where(inside, log_f(np.where(inside, down, 1.0)), -np.inf) < peak[:, None] - _TAIL_DROP
    first = np.argmax(drop, axis=1)
    lo = np.where(drop[rows, first], np.maximum(down[rows, first], 0.0), 0.0)

    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, _GL_PANELS + 1)[None, :]
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    centre = 0.5 * (edges[:, 1:] + edges[:, :-1])
    nodes = centre[:, :, None] + half[:, :, None] * _GL_NODES[None, None, :]
    values = log_f(nodes.reshape(mode.size, -1)).reshape(nodes.shape) - peak[:, None, None]
    mass = np.sum(_GL_WEIGHTS[None, None, :] * np.exp(values), axis=-1) * half
    return LOG_2 + peak + np.log(np.sum(mass, axis=-1))


def log_kv_batch(a: ArrayLike, b: ArrayLike, c: ArrayLike) -> NDArray[np.float64]:
    """Elementwise log k_v.

    The factor exp(B^2 / 8A) cancels against the exp(-z^2 / 4) inside D, so
    log k_v = log 2 - C log(4A) + log Gamma(2C) + log[T1 - sign(B) T2] where
    T1, T2 are the two Kummer terms. For B <= 0 both terms add; for B > 0
    they cancel and entries with too much cancellation go to quadrature.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c)))
    shape = a.shape
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    if np.any(~(a > 0)) or np.any(~(c > 0)):
        raise DomainError("k_v needs A > 0 and C > 0")

    x = b * b / (4.0 * a)
    abs_z = np.abs(b) / np.sqrt(2.0 * a)
    log_m1, ok1 = log_kummer_m_positive(c, 0.5, x)
    log_m2, ok2 = log_kummer_m_positive(c + 0.5, 1.5, x)
    t1 = _LOG_SQRT_PI - special.gammaln(c + 0.5) + log_m1
    with np.errstate(divide="ignore"):
        t2 = _LOG_SQRT_2PI + np.log(abs_z) - special.gammaln(c) + log_m2

    positive = b > 0
    gap = np.where(positive, t2 - t1, -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = np.where(positive, t1 + np.log(-np.expm1(np.minimum(gap, 0.0))), np.logaddexp(t1, t2))
    cancelled = positive & ((gap >= 0.0) | (-np.expm1(np.minimum(gap, 0.0)) < 1.0 / _CANCELLATION_LIMIT))
    out = LOG_2 - c * np.log(4.0 * a) + special.gammaln(2.0 * c) + bracket

    fallback = cancelled | ~ok1 | ~ok2 | ~np.isfinite(out)
    if np.any(fallback):
        idx = np.flatnonzero(fallback)
        out[idx] = _log_kv_panels(a[idx], b[idx], c[idx])
    return out.reshape(shape)


def envelope(c: VCondCoeffs) -> RejectionEnvelope:
    """Instrumental (2C, beta*) and bound M = 2 Gamma(2C) / (k_v beta^{2C}) exp((beta - B)^2 / 4A)."""
    beta = beta_star(c)
    log_kv = kv_constant(c)
    two_c = 2.0 * c.c
    log_bound = (
        LOG_2 + float(special.gammaln(two_c)) - log_kv - two_c * math.log(beta) + (beta - c.b) ** 2 / (4.0 * c.a)
    )
    if log_bound < -1e-9:
        raise NumericError(f"rejection bound below one (log M = {log_bound:.3g}); k_v is inaccurate")
    return RejectionEnvelope(two_c, beta, max(log_bound, 0.0), log_kv)


def log_vcond_density(v: ArrayLike, a: ArrayLike, b: ArrayLike, c: ArrayLike, log_kv: ArrayLike) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=float)
    return (np.asarray(c) - 1.0) * np.log(v) - np.asarray(a) * v - np.asarray(b) * np.sqrt(v) - np.asarray(log_kv)


def sample_v_batch(
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    c: NDArray[np.float64],
    rng: RngStream,
    *,
    max_trials: int = MAX_REJECTION_TRIALS,
) -> tuple[NDArray[np.float64], NDArray[np.float64], int]:
    """Exact draws from pi(v | ...) elementwise.

    Returns (draws, log density at the draws, total proposals made). A
    proposal W = R^2 is accepted with probability exp(-A (R - s*)^2),
    s* = (beta* - B) / (2A), which is pi / (M f) with k_v cancelled.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c)))
    shape = a.shape
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    beta = _beta_star_array(a, b, c)
    s_star = (beta - b) / (2.0 * a)
    gen = rng.generator

    root = np.empty_like(a)
    pending = np.arange(a.size)
    trials = 0
    for _ in range(max_trials):
        if pending.size == 0:
            break
        trials += pending.size
        r = gen.gamma(2.0 * c[pending], 1.0 / beta[pending])
        log_u = np.log(gen.random(pending.size))
        accept = log_u <= -a[pending] * (r - s_star[pending]) ** 2
        root[pending[accept]] = r[accept]
        pending = pending[~accept]
    if pending.size:
        raise NumericError(f"v rejection sampler exceeded {max_trials} trials; envelope is broken")

    v = root * root
    log_density = log_vcond_density(v, a, b, c, log_kv_batch(a, b, c))
    return v.reshape(shape), log_density.reshape(shape), trials


def sample_v(c: VCondCoeffs, env: RejectionEnvelope, rng: RngStream) -> tuple[float, float]:
    """One exact draw from pi(v | ...) and its normalized log density."""
    gen = rng.generator
    s_star = (env.beta_v - c.b) / (2.0 * c.a)
    for _ in range(MAX_REJECTION_TRIALS):
        r = float(gen.gamma(env.alpha_v, 1.0 / env.beta_v))
        if math.log(gen.random()) <= -c.a * (r - s_star) ** 2:
            v = r * r
            return v, float(log_vcond_density(v, c.a, c.b, c.c, env.log_kv))
    raise NumericError(f"v rejection sampler exceeded {MAX_REJECTION_TRIALS} trials; envelope is broken")
