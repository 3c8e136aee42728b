"""Particle population stored as parallel arrays, with per-particle views."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..errors import DomainError
from ..likelihood import LatentState
from ..model import ThetaParams


@dataclass(frozen=True, eq=False)
class Particle:
    theta: ThetaParams
    lat: LatentState
    log_unnorm_weight: float
    norm_weight: float


@dataclass(frozen=True, eq=False)
class Population:
    """Structure-of-arrays population.

    nu (N,), v and z (N, n), xi and psi (N, p), g (N, p, p); log_q is the
    accumulated log proposal density of the current draw, log_weight the
    unnormalized log importance weight and weights the normalized ones.
    """

    nu: NDArray[np.float64]
    v: NDArray[np.float64]
    z: NDArray[np.float64]
    xi: NDArray[np.float64]
    psi: NDArray[np.float64]
    g: NDArray[np.float64]
    log_q: NDArray[np.float64] = field(default=None)
    log_weight: NDArray[np.float64] = field(default=None)
    weights: NDArray[np.float64] = field(default=None)

    def __post_init__(self) -> None:
        size = self.nu.shape[0]
        if size < 1:
            raise DomainError("population is empty")
        for name in ("v", "z", "xi", "psi", "g"):
            if getattr(self, name).shape[0] != size:
                raise DomainError(f"population field {name} has the wrong leading dimension")
        if self.log_q is None:
            object.__setattr__(self, "log_q", np.zeros(size))
        if self.log_weight is None:
            object.__setattr__(self, "log_weight", np.zeros(size))
        if self.weights is None:
            object.__setattr__(self, "weights", np.full(size, 1.0 / size))

    @property
    def size(self) -> int:
        return int(self.nu.shape[0])

    def replace(self, **changes) -> "Population":
        return dataclasses.replace(self, **changes)

    def take(self, idx: NDArray[np.intp]) -> "Population":
        return Population(
            nu=self.nu[idx],
            v=self.v[idx],
            z=self.z[idx],
            xi=self.xi[idx],
            psi=self.psi[idx],
            g=self.g[idx],
            log_q=self.log_q[idx],
            log_weight=self.log_weight[idx],
            weights=self.weights[idx],
        )

    def slice(self, start: int, stop: int) -> "Population":
        return self.take(np.arange(start, min(stop, self.size)))

    @classmethod
    def concat(cls, parts: list["Population"]) -> "Population":
        return cls(**{name: np.concatenate([getattr(part, name) for part in parts]) for name in _FIELDS})

    def particle(self, j: int) -> Particle:
        theta = ThetaParams.build(self.xi[j], self.psi[j], self.g[j], float(self.nu[j]))
        return Particle(theta, LatentState.build(self.z[j], self.v[j]), float(self.log_weight[j]), float(self.weights[j]))


_FIELDS = ("nu", "v", "z", "xi", "psi", "g", "log_q", "log_weight", "weights")


@dataclass(frozen=True, eq=False)
class IterationEstimate:
    """Weighted posterior means of one iteration, taken before resampling."""

    xi: NDArray[np.float64]
    xi_second_moment: NDArray[np.float64]
    psi: NDArray[np.float64]
    g: NDArray[np.float64]
    nu_mean: float
    nu_pmf: NDArray[np.float64] | None

    @classmethod
    def from_population(cls, population: Population, grid: NDArray[np.float64] | None) -> "IterationEstimate":
        w = population.weights
        nu_pmf = None
        nu_mean = math.inf
        if grid is not None:
            idx = np.searchsorted(grid, population.nu)
            nu_pmf = np.bincount(np.clip(idx, 0, grid.size - 1), weights=w, minlength=grid.size)
            nu_mean = float(w @ population.nu)
        return cls(
            xi=w @ population.xi,
            xi_second_moment=w @ (population.xi**2),
            psi=w @ population.psi,
            g=np.einsum("k,kij->ij", w, population.g),
            nu_mean=nu_mean,
            nu_pmf=nu_pmf,
        )


@dataclass(frozen=True, eq=False)
class PopulationState:
    population: Population
    iteration: int
    entropy: float
    log_sum_unnorm: float
    ess: float
    estimates: IterationEstimate | None = None
    resampled: bool = False

    @property
    def n_particles(self) -> int:
        return self.population.size

    @property
    def particles(self) -> list[Particle]:
        return [self.population.particle(j) for j in range(self.population.size)]
