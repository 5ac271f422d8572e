"""Empirical covariance spectrum tooling.

Top-eigenvalue estimation by power iteration, plus the concentration study
that checks how many slab-conditioned draws keep the empirical second-moment
matrix within twice its population spectral bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import BandSpec
from .dist import DistributionSpec, Kind, sample_band
from .rng import derive_seed, stream

POWER_MAX_ITER = 1000
POWER_REL_TOL = 1e-13


def lambda_max(vectors) -> float:
    """Top eigenvalue of the mean outer-product matrix of the rows.

    Power iteration started from the normalized data mean plus a fixed random
    perturbation (orthogonal starts would stall); iteration stops when the
    Rayleigh quotient is stationary to relative 1e-13 or after 1000 rounds.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need a nonempty sequence of vectors")
    n, d = x.shape
    gram = x.T @ x / n
    rng = stream(0, "lambda-max")
    v = x.mean(axis=0) + 1e-3 * rng.standard_normal(d)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        v = rng.standard_normal(d)
        norm = float(np.linalg.norm(v))
    v /= norm
    value = float(v @ gram @ v)
    for _ in range(POWER_MAX_ITER):
        u = gram @ v
        norm = float(np.linalg.norm(u))
        if norm < 1e-300:
            return 0.0
        v = u / norm
        value_next = float(v @ gram @ v)
        if abs(value_next - value) <= POWER_REL_TOL * max(1.0, abs(value_next)):
            return value_next
        value = value_next
    return value


@dataclass(frozen=True)
class SpectralStudy:
    dims: tuple[int, ...]
    n_factors: tuple[float, ...]
    halfwidth: float
    radius: float
    trials: int
    seed: int
    kind: Kind = Kind.GAUSSIAN
    pop_factor: int = 10

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least one")
        if not self.dims or not self.n_factors:
            raise ValueError("dims and n_factors must be nonempty")
        if not (0 < self.halfwidth < math.inf) or not (0 < self.radius < math.inf):
            raise ValueError("halfwidth and radius must be positive and finite")


@dataclass(frozen=True)
class StudyRow:
    d: int
    n_factor: float
    n: int
    trial: int
    lambda_max: float
    pop_bound: float
    exceeded: bool


def study_sample_size(d: int, n_factor: float, halfwidth: float) -> int:
    return int(math.ceil(n_factor * d * math.ceil(math.log(d / halfwidth) ** 2)))


def chernoff_study(study: SpectralStudy) -> list[StudyRow]:
    """Spectral concentration table over (dimension, sample-factor) cells.

    A trial exceeds when the empirical top eigenvalue is more than twice the
    population value (the alpha = 1 tail of the matrix Chernoff bound); the
    population term is estimated once per cell from pop_factor times as many
    draws.
    """
    rows: list[StudyRow] = []
    for d in study.dims:
        spec = DistributionSpec(study.kind, d)
        direction = np.zeros(d)
        direction[0] = 1.0
        band = BandSpec(direction, study.halfwidth)
        for n_factor in study.n_factors:
            n = study_sample_size(d, n_factor, study.halfwidth)
            # slab acceptance is at least ~0.25 * halfwidth for every family
            budget = max(10_000_000, math.ceil(40 * study.pop_factor * n / study.halfwidth))
            pop_seed = derive_seed(study.seed, "spectral", "pop", d, n_factor)
            pop = lambda_max(
                sample_band(spec, band, study.pop_factor * n, pop_seed, max_attempts=budget)
            )
            for trial in range(study.trials):
                trial_seed = derive_seed(study.seed, "spectral", d, n_factor, trial)
                lam = lambda_max(sample_band(spec, band, n, trial_seed, max_attempts=budget))
                rows.append(
                    StudyRow(
                        d=d,
                        n_factor=n_factor,
                        n=n,
                        trial=trial,
                        lambda_max=lam,
                        pop_bound=pop,
                        exceeded=bool(lam > 2.0 * pop),
                    )
                )
    return rows


def exceedance_frequency(rows, d: int | None = None, n_factor: float | None = None) -> float:
    picked = [
        r
        for r in rows
        if (d is None or r.d == d) and (n_factor is None or r.n_factor == n_factor)
    ]
    if not picked:
        raise ValueError("no study rows match the requested cell")
    return sum(r.exceeded for r in picked) / len(picked)


def write_study_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "n_factor", "n", "trial", "lambda_max", "pop_bound", "exceeded"])
        for r in rows:
            writer.writerow(
                [r.d, repr(float(r.n_factor)), r.n, r.trial, repr(r.lambda_max), repr(r.pop_bound), int(r.exceeded)]
            )


def max_norm_check(spec: DistributionSpec, band: BandSpec, n: int, seed) -> float:
    """Largest Euclidean norm among n slab-conditioned draws."""
    if n < 1:
        raise ValueError("need at least one draw")
    x = sample_band(spec, band, n, seed)
    return float(np.linalg.norm(x, axis=1).max())
