"""Densities and samplers for the multivariate normal, t, skew-normal, gamma,
inverse Wishart and positive truncated normal.

Every sampler takes an explicit :class:`RngStream`; there is no module-level
random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special, stats
from scipy.linalg import cho_solve, solve_triangular

from .errors import DomainError, MatrixError

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)

# Relative pivot floor for Cholesky acceptance.
PIVOT_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12

# Standardized truncation point beyond which the exponential proposal is used.
_EXPONENTIAL_SWITCH = 0.5


class RngStream:
    """Reproducible random stream identified by (seed, stream_id, spawn_key).

    Two streams built from the same identifiers produce the same draws.
    ``substream`` derives independent children, which is how per-model,
    per-replication and per-iteration streams are assigned.
    """

    def __init__(self, seed: int, stream_id: int = 0, spawn_key: Sequence[int] = ()) -> None:
        if seed < 0 or stream_id < 0:
            raise DomainError("seed and stream_id must be non-negative")
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.stream_id = int(stream_id)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.spawn_key))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def substream(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.spawn_key + tuple(keys))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, spawn_key={self.spawn_key})"


def _check_symmetric(a: NDArray[np.float64]) -> None:
    scale = max(float(np.max(np.abs(a))), 1.0)
    if float(np.max(np.abs(a - np.swapaxes(a, -1, -2)))) > SYMMETRY_RTOL * scale:
        raise MatrixError("matrix is not symmetric")


def cholesky_checked(a: ArrayLike) -> NDArray[np.float64]:
    """Lower Cholesky factor; raises MatrixError on any pivot <= 1e-12 * max diagonal."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatrixError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MatrixError("matrix has non-finite entries")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise MatrixError("matrix is not positive definite") from exc
    pivots = np.diag(chol) ** 2
    if np.min(pivots) <= PIVOT_RTOL * max(float(np.max(np.diag(a))), 0.0):
        raise MatrixError("Cholesky pivot below tolerance")
    return chol


def batched_cholesky(a: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Cholesky of a stack (..., p, p); failed entries get an identity factor and ok=False."""
    a = np.asarray(a, dtype=float)
    batch_shape = a.shape[:-2]
    p = a.shape[-1]
    flat = a.reshape(-1, p, p)
    ok = np.all(np.isfinite(flat), axis=(1, 2))
    chol = np.broadcast_to(np.eye(p), flat.shape).copy()
    stacked = False
    if np.all(ok):
        try:
            chol = np.linalg.cholesky(flat)
            stacked = True
        except np.linalg.LinAlgError:
            pass
    if not stacked:
        # fall back to one factorization per entry to find the failures
        for j in np.flatnonzero(ok):
            try:
                chol[j] = np.linalg.cholesky(flat[j])
            except np.linalg.LinAlgError:
                ok[j] = False
    diag = np.diagonal(flat, axis1=1, axis2=2)
    pivots = np.diagonal(chol, axis1=1, axis2=2) ** 2
    floor = PIVOT_RTOL * np.maximum(diag.max(axis=1), 0.0)
    ok &= np.all(pivots > floor[:, None], axis=1)
    chol[~ok] = np.eye(p)
    return chol.reshape(a.shape), ok.reshape(batch_shape)


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive definite matrix with its cached Cholesky factor."""

    entries: NDArray[np.float64]
    chol: NDArray[np.float64] = field(repr=False)

    @classmethod
    def from_array(cls, a: ArrayLike, *, symmetrize: bool = False) -> "SpdMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if symmetrize:
            a = 0.5 * (a + a.T)
        else:
            _check_symmetric(a)
        chol = cholesky_checked(a)
        a = a.copy()
        a.setflags(write=False)
        chol.setflags(write=False)
        return cls(a, chol)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, b: ArrayLike) -> NDArray[np.float64]:
        return cho_solve((self.chol, True), np.asarray(b, dtype=float))

    def inverse(self) -> NDArray[np.float64]:
        return self.solve(np.eye(self.dim))

    def quad_form(self, x: ArrayLike) -> NDArray[np.float64] | float:
        """x' A^{-1} x for a vector or for every row of a matrix."""
        x = np.asarray(x, dtype=float)
        w = solve_triangular(self.chol, np.atleast_2d(x).T, lower=True)
        q = np.sum(w * w, axis=0)
        return float(q[0]) if x.ndim == 1 else q


def as_spd(a: SpdMatrix | ArrayLike) -> SpdMatrix:
    return a if isinstance(a, SpdMatrix) else SpdMatrix.from_array(a)


def _as_rows(x: ArrayLike, p: int) -> tuple[NDArray[np.float64], bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    rows = np.atleast_2d(x).reshape(-1, p) if x.size else np.empty((0, p))
    if rows.shape[1] != p:
        raise DomainError(f"dimension mismatch: expected {p} columns")
    return rows, single


def mvn_logpdf(x: ArrayLike, mean: ArrayLike, cov: SpdMatrix | ArrayLike) -> float | NDArray[np.float64]:
    cov = as_spd(cov)
    p = cov.dim
    mean = np.asarray(mean, dtype=float).reshape(p)
    rows, single = _as_rows(x, p)
    q = np.atleast_1d(cov.quad_form(rows - mean))
    out = -0.5 * (p * LOG_2PI + cov.logdet + q)
    return float(out[0]) if single else out


def mvn_sample(mean: ArrayLike, cov: SpdMatrix | ArrayLike, rng: RngStream, size: int | None = None) -> NDArray[np.float64]:
    cov = as_spd(cov)
    mean = np.asarray(mean, dtype=float).reshape(cov.dim)
    eps = rng.generator.standard_normal((1 if size is None else size, cov.dim))
    draws = mean + eps @ cov.chol.T
    return draws[0] if size is None else draws


def mvt_logpdf(y: ArrayLike, loc: ArrayLike, scale: SpdMatrix | ArrayLike, dof: float) -> float | NDArray[np.float64]:
    if not dof > 0:
        raise DomainError(f"dof must be positive, got {dof!r}")
    scale = as_spd(scale)
    p = scale.dim
    loc = np.asarray(loc, dtype=float).reshape(p)
    rows, single = _as_rows(y, p)
    q = np.atleast_1d(scale.quad_form(rows - loc))
    half = 0.5 * (dof + p)
    out = (
        special.gammaln(half)
        - special.gammaln(0.5 * dof)
        - 0.5 * scale.logdet
        - 0.5 * p * math.log(math.pi * dof)
        - half * np.log1p(q / dof)
    )
    return float(out[0]) if single else out


def sn_logpdf(y: ArrayLike, loc: ArrayLike, shape: ArrayLike, scale: SpdMatrix | ArrayLike) -> float | NDArray[np.float64]:
    """Skew-normal log density 2 phi_p(y; loc, scale) Phi(alpha' omega^{-1} (y - loc))."""
    scale = as_spd(scale)
    p = scale.dim
    loc = np.asarray(loc, dtype=float).reshape(p)
    alpha = np.asarray(shape, dtype=float).reshape(p)
    rows, single = _as_rows(y, p)
    omega = np.sqrt(np.diag(scale.entries))
    arg = ((rows - loc) / omega) @ alpha
    out = LOG_2 + np.atleast_1d(mvn_logpdf(rows, loc, scale)) + special.log_ndtr(arg)
    return float(out[0]) if single else out


def _check_gamma_params(shape: ArrayLike, rate: ArrayLike) -> None:
    if np.any(~(np.asarray(shape) > 0)) or np.any(~(np.asarray(rate) > 0)):
        raise DomainError("gamma shape and rate must be positive")


def gamma_sample(shape: ArrayLike, rate: ArrayLike, rng: RngStream, size: int | tuple[int, ...] | None = None) -> NDArray[np.float64] | float:
    """Gamma draws in the shape-rate convention (mean shape/rate)."""
    _check_gamma_params(shape, rate)
    draws = rng.generator.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)
    return float(draws) if np.ndim(draws) == 0 else draws


def gamma_logpdf(v: ArrayLike, shape: ArrayLike, rate: ArrayLike) -> NDArray[np.float64] | float:
    _check_gamma_params(shape, rate)
    out = stats.gamma.logpdf(v, a=shape, scale=1.0 / np.asarray(rate, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _is_zero_scale(scale: SpdMatrix | ArrayLike | None) -> bool:
    if scale is None:
        return True
    if isinstance(scale, SpdMatrix):
        return False
    return not np.any(np.asarray(scale, dtype=float))


def invwishart_logpdf(x: SpdMatrix | ArrayLike, dof: float, scale: SpdMatrix | ArrayLike | None) -> float:
    """Inverse Wishart log density, pi(X) ∝ |X|^{-(m+p+1)/2} exp(-tr(Lambda X^{-1})/2).

    With a zero scale (or dof <= p - 1) only the unnormalized kernel is
    returned, which is what the improper m = 0, Lambda = 0 prior needs.
    """
    x = as_spd(x)
    p = x.dim
    kernel = -0.5 * (dof + p + 1) * x.logdet
    if _is_zero_scale(scale):
        return float(kernel)
    lam = as_spd(scale)
    if lam.dim != p:
        raise DomainError("scale and X dimensions differ")
    trace = float(np.trace(x.solve(lam.entries)))
    kernel -= 0.5 * trace
    if dof <= p - 1:
        return float(kernel)
    norm = 0.5 * dof * lam.logdet - 0.5 * dof * p * LOG_2 - special.multigammaln(0.5 * dof, p)
    return float(norm + kernel)


def invwishart_logpdf_batch(
    x_chol: NDArray[np.float64], dof: float, scale: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Normalized inverse Wishart log density for stacks of draws and scales (dof > p - 1)."""
    p = x_chol.shape[-1]
    logdet_x = 2.0 * np.sum(np.log(np.diagonal(x_chol, axis1=-2, axis2=-1)), axis=-1)
    scale_chol, ok = batched_cholesky(scale)
    if not np.all(ok):
        raise MatrixError("inverse Wishart scale is not positive definite")
    logdet_s = 2.0 * np.sum(np.log(np.diagonal(scale_chol, axis1=-2, axis2=-1)), axis=-1)
    # tr(Lambda X^{-1}) = ||L_X^{-1} L_Lambda||_F^2
    w = np.linalg.solve(x_chol, scale_chol)
    trace = np.sum(w * w, axis=(-2, -1))
    return (
        0.5 * dof * logdet_s
        - 0.5 * dof * p * LOG_2
        - special.multigammaln(0.5 * dof, p)
        - 0.5 * (dof + p + 1) * logdet_x
        - 0.5 * trace
    )


def invwishart_sample_batch(dof: float, scale: NDArray[np.float64], rng: RngStream) -> NDArray[np.float64]:
    """One IW(dof, scale[j]) draw per stacked scale, via the Bartlett decomposition."""
    scale = np.asarray(scale, dtype=float)
    count, p = scale.shape[0], scale.shape[-1]
    if not dof > p - 1:
        raise DomainError(f"inverse Wishart sampling needs dof > p - 1, got dof={dof}, p={p}")
    scale_chol, ok = batched_cholesky(scale)
    if not np.all(ok):
        raise MatrixError("inverse Wishart scale is not positive definite")
    gen = rng.generator
    bartlett = np.zeros((count, p, p))
    rows, cols = np.tril_indices(p, -1)
    bartlett[:, rows, cols] = gen.standard_normal((count, rows.size))
    idx = np.arange(p)
    bartlett[:, idx, idx] = np.sqrt(gen.chisquare(dof - idx, size=(count, p)))
    # X^{-1} = L_Lambda^{-T} A A' L_Lambda^{-1}  =>  X = (L_Lambda^{-T} A)^{-T} (L_Lambda^{-T} A)^{-1}
    inv_factor = np.linalg.solve(np.swapaxes(scale_chol, -1, -2), bartlett)
    factor_inv = np.linalg.inv(inv_factor)
    draws = np.swapaxes(factor_inv, -1, -2) @ factor_inv
    return 0.5 * (draws + np.swapaxes(draws, -1, -2))


def invwishart_sample(dof: float, scale: SpdMatrix | ArrayLike, rng: RngStream) -> SpdMatrix:
    scale = as_spd(scale)
    draw = invwishart_sample_batch(dof, scale.entries[None], rng)[0]
    return SpdMatrix.from_array(draw, symmetrize=True)


def truncnorm_positive_batch(mean: ArrayLike, sd: ArrayLike, rng: RngStream, *, max_rounds: int = 10_000) -> NDArray[np.float64]:
    """Exact draws from N(mean, sd^2) restricted to (0, inf), elementwise.

    Means far to the left of zero use the translated-exponential proposal
    with the optimal rate (a + sqrt(a^2 + 4)) / 2; the others use plain
    rejection from the untruncated normal.
    """
    mean, sd = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(sd, dtype=float))
    if np.any(~(sd > 0)):
        raise DomainError("truncated normal needs a positive scale")
    shape = mean.shape
    mean, sd = mean.ravel(), sd.ravel()
    lower = -mean / sd
    out = np.empty_like(mean)
    gen = rng.generator

    naive = np.flatnonzero(lower <= _EXPONENTIAL_SWITCH)
    tail = np.flatnonzero(lower > _EXPONENTIAL_SWITCH)

    pending_naive = naive
    for _ in range(max_rounds):
        if pending_naive.size == 0:
            break
        z = gen.standard_normal(pending_naive.size)
        hit = z > lower[pending_naive]
        out[pending_naive[hit]] = z[hit]
        pending_naive = pending_naive[~hit]

    rate = 0.5 * (lower[tail] + np.sqrt(lower[tail] ** 2 + 4.0))
    pending_tail = np.arange(tail.size)
    for _ in range(max_rounds):
        if pending_tail.size == 0:
            break
        a = lower[tail[pending_tail]]
        lam = rate[pending_tail]
        z = a + gen.exponential(1.0 / lam)
        accept = gen.random(pending_tail.size) <= np.exp(-0.5 * (z - lam) ** 2)
        out[tail[pending_tail[accept]]] = z[accept]
        pending_tail = pending_tail[~accept]

    if pending_naive.size or pending_tail.size:
        raise DomainError("truncated normal sampler did not terminate")
    return (mean + sd * out).reshape(shape)


def truncnorm_sample_positive(mean: float, var: float, rng: RngStream) -> float:
    if not var > 0:
        raise DomainError(f"variance must be positive, got {var!r}")
    return float(truncnorm_positive_batch(np.array([mean]), np.array([math.sqrt(var)]), rng)[0])


def truncnorm_logpdf_positive(x: ArrayLike, mean: ArrayLike, sd: ArrayLike) -> NDArray[np.float64]:
    """Log density of N(mean, sd^2) restricted to (0, inf); -inf for x <= 0."""
    x, mean, sd = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, mean, sd)))
    u = (x - mean) / sd
    out = -0.5 * (LOG_2PI + u * u) - np.log(sd) - special.log_ndtr(mean / sd)
    return np.where(x > 0, out, -np.inf)
