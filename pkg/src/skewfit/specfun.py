"""Scalar special functions behind the densities, the nu-equation and k_v.

The gamma family and the incomplete beta delegate to ``scipy.special``;
the confluent hypergeometric series and the parabolic cylinder function
are summed here because callers need to know whether the series actually
converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DomainError

KUMMER_RTOL = 1e-12
KUMMER_MAX_TERMS = 10_000

# Cancellation beyond this factor leaves fewer than ~9 significant digits.
_CANCELLATION_LIMIT = 1e6
_RESCALE = 1e280
_LOG_RESCALE = math.log(_RESCALE)


@dataclass(frozen=True)
class SpecFunResult:
    value: float
    converged: bool
    terms_used: int

    def __post_init__(self) -> None:
        if self.terms_used < 1:
            raise DomainError("terms_used must be at least 1")


def _require_positive(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return x


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = _require_positive("x", x)
    return float(special.gammaln(x))


def digamma(x: float) -> float:
    x = _require_positive("x", x)
    return float(special.digamma(x))


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    a = _require_positive("a", a)
    b = _require_positive("b", b)
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    return float(special.betainc(a, b, x))


def student_t_cdf(x: float, dof: float) -> float:
    """CDF of the univariate Student-t, built on the incomplete beta so that T(-x) = 1 - T(x)."""
    dof = _require_positive("dof", dof)
    x = float(x)
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    tail = 0.5 * reg_inc_beta(0.5 * dof, 0.5, dof / (dof + x * x))
    return 1.0 - tail if x > 0 else tail


def student_t_logcdf(x: np.ndarray | float, dof: np.ndarray | float) -> np.ndarray:
    """Vectorized log CDF of the Student-t."""
    dof_arr = np.asarray(dof, dtype=float)
    if np.any(~(dof_arr > 0)):
        raise DomainError("dof must be positive")
    return stats.t.logcdf(np.asarray(x, dtype=float), dof_arr)


def _is_pole(g: float) -> bool:
    return g <= 0.0 and float(g).is_integer()


def _kummer_series(a: float, g: float, z: float, rtol: float, max_terms: int) -> tuple[float, bool, int]:
    terms = [1.0]
    running = 1.0
    term = 1.0
    for k in range(max_terms - 1):
        ratio = (a + k) * z / ((g + k) * (k + 1))
        term *= ratio
        if term == 0.0:
            # a is a non-positive integer: the series is a polynomial
            return math.fsum(terms), True, len(terms)
        terms.append(term)
        running += term
        if not math.isfinite(running):
            return running, False, len(terms)
        if abs(ratio) < 1.0 and abs(term) <= rtol * abs(running):
            return math.fsum(terms), True, len(terms)
    return math.fsum(terms), False, len(terms)


def kummer_m(a: float, g: float, z: float, *, rtol: float = KUMMER_RTOL, max_terms: int = KUMMER_MAX_TERMS) -> SpecFunResult:
    """Confluent hypergeometric function of the first kind, M(a, g; z).

    Negative arguments go through Kummer's transformation
    M(a, g; z) = e^z M(g - a, g; -z) so the summed series never alternates
    for long; the terms are added with ``math.fsum``.
    """
    a, g, z = float(a), float(g), float(z)
    if _is_pole(g):
        raise DomainError(f"g must not be zero or a negative integer, got {g!r}")
    if not (math.isfinite(a) and math.isfinite(z)):
        raise DomainError("a and z must be finite")
    if z == 0.0:
        return SpecFunResult(1.0, True, 1)

    if z < 0.0:
        total, converged, used = _kummer_series(g - a, g, -z, rtol, max_terms)
        value = math.exp(z) * total
    else:
        total, converged, used = _kummer_series(a, g, z, rtol, max_terms)
        value = total
    if not math.isfinite(value):
        converged = False
    return SpecFunResult(value, converged, used)


def log_kummer_m_positive(
    a: np.ndarray,
    b: np.ndarray,
    x: np.ndarray,
    *,
    rtol: float = KUMMER_RTOL,
    max_terms: int = KUMMER_MAX_TERMS,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched log M(a, b; x) for a > 0, b > 0, x >= 0.

    Every term is positive, so the sum is carried with a running power-of-ten
    rescale instead of compensated summation. Returns (log value, converged).
    """
    a, b, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(x, float))
    if np.any(a <= 0) or np.any(b <= 0) or np.any(x < 0):
        raise DomainError("log_kummer_m_positive needs a > 0, b > 0, x >= 0")
    shape = a.shape
    a, b, x = a.ravel(), b.ravel(), x.ravel()
    total = np.ones_like(x)
    term = np.ones_like(x)
    log_scale = np.zeros_like(x)
    converged = x == 0.0
    active = np.flatnonzero(~converged)

    for k in range(max_terms - 1):
        if active.size == 0:
            break
        ratio = (a[active] + k) * x[active] / ((b[active] + k) * (k + 1))
        term[active] *= ratio
        total[active] += term[active]

        big = total[active] > _RESCALE
        if np.any(big):
            idx = active[big]
            total[idx] /= _RESCALE
            term[idx] /= _RESCALE
            log_scale[idx] += _LOG_RESCALE

        done = (ratio < 1.0) & (term[active] <= rtol * total[active])
        converged[active[done]] = True
        active = active[~done]

    log_value = np.log(total) + log_scale
    return log_value.reshape(shape), converged.reshape(shape)


def parabolic_cylinder_d(p: float, z: float) -> SpecFunResult:
    """Parabolic cylinder function D_p(z) for p <= 0 from two Kummer series.

    D_p(z) = 2^{p/2} e^{-z^2/4} [ sqrt(pi)/Gamma((1-p)/2) M(-p/2, 1/2; z^2/2)
                                  - sqrt(2 pi) z / Gamma(-p/2) M((1-p)/2, 3/2; z^2/2) ]

    For z > 0 the bracket is a difference of two large numbers; when more
    than six digits cancel the result is flagged as not converged.
    """
    p, z = float(p), float(z)
    if not math.isfinite(p) or p > 0.0:
        raise DomainError(f"parabolic_cylinder_d supports p <= 0 only, got {p!r}")
    if not math.isfinite(z):
        raise DomainError("z must be finite")
    if p == 0.0:
        return SpecFunResult(math.exp(-0.25 * z * z), True, 1)

    c = -0.5 * p
    x = 0.5 * z * z
    first = kummer_m(c, 0.5, x)
    second = kummer_m(c + 0.5, 1.5, x)
    used = first.terms_used + second.terms_used

    prefactor = 2.0 ** (0.5 * p) * math.exp(-0.25 * z * z)
    t1 = math.sqrt(math.pi) * float(special.rgamma(c + 0.5)) * first.value
    t2 = math.sqrt(2.0 * math.pi) * z * float(special.rgamma(c)) * second.value
    bracket = t1 - t2
    value = prefactor * bracket

    converged = first.converged and second.converged and math.isfinite(value)
    if converged and bracket != 0.0:
        if max(abs(t1), abs(t2)) / abs(bracket) > _CANCELLATION_LIMIT:
            converged = False
    elif bracket == 0.0 and t1 != 0.0:
        converged = False
    return SpecFunResult(value, converged, used)
