"""Samplers for isotropic log-concave product distributions.

Four families, all with zero mean and identity covariance: Gaussian,
centered exponential, logistic, and the uniform cube. Slab-conditioned
sampling is exact rejection; error rates and slab masses come with Monte
Carlo companions used as oracles by the tests.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import BandSpec, angle, unit_vector
from .rng import as_generator

LOGISTIC_SCALE = math.sqrt(3.0) / math.pi
CUBE_HALFWIDTH = math.sqrt(3.0)

DEFAULT_MAX_ATTEMPTS = 10_000_000


class Kind(enum.Enum):
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"
    CUBE = "cube"


_ALIASES = {
    "gaussian": Kind.GAUSSIAN,
    "normal": Kind.GAUSSIAN,
    "exponential": Kind.EXPONENTIAL,
    "explog": Kind.EXPONENTIAL,
    "logistic": Kind.LOGISTIC,
    "cube": Kind.CUBE,
    "uniform": Kind.CUBE,
}


@dataclass(frozen=True)
class DistributionSpec:
    kind: Kind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    @classmethod
    def parse(cls, token: str) -> "DistributionSpec":
        """Parse tokens like ``gaussian:d=20`` or ``explog:d=50``."""
        name, _, rest = token.strip().lower().partition(":")
        if name not in _ALIASES:
            raise ValueError(f"unknown distribution: {name!r}")
        if not rest.startswith("d="):
            raise ValueError(f"distribution token needs a d= part: {token!r}")
        return cls(kind=_ALIASES[name], dim=int(rest[2:]))

    def token(self) -> str:
        return f"{self.kind.value}:d={self.dim}"


class MonteCarloEstimate(NamedTuple):
    value: float
    stderr: float


class RejectionBudgetError(RuntimeError):
    """Slab acceptance too low to gather the requested draws."""


def sign_labels(values) -> np.ndarray:
    """Labels in {-1, +1} with sign(0) = +1."""
    return np.where(np.asarray(values) >= 0.0, 1.0, -1.0)


def sample(spec: DistributionSpec, n: int, seed) -> np.ndarray:
    """n i.i.d. rows from the distribution; deterministic given the seed."""
    if n < 1:
        raise ValueError("need at least one draw")
    rng = as_generator(seed)
    shape = (n, spec.dim)
    if spec.kind is Kind.GAUSSIAN:
        return rng.standard_normal(shape)
    if spec.kind is Kind.EXPONENTIAL:
        return rng.standard_exponential(shape) - 1.0
    if spec.kind is Kind.LOGISTIC:
        return rng.logistic(loc=0.0, scale=LOGISTIC_SCALE, size=shape)
    return rng.uniform(-CUBE_HALFWIDTH, CUBE_HALFWIDTH, size=shape)


def sample_band(
    spec: DistributionSpec,
    band: BandSpec,
    n: int,
    seed,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> np.ndarray:
    """n draws conditioned on the slab, by rejection.

    Every returned row satisfies the slab predicate exactly. Raises
    RejectionBudgetError once ``max_attempts`` raw draws have been consumed,
    which signals a halfwidth too small for the requested count.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    rng = as_generator(seed)
    out = np.empty((n, spec.dim))
    got = 0
    attempts = 0
    chunk = max(1024, 2 * n)
    while got < n:
        if attempts >= max_attempts:
            raise RejectionBudgetError(
                f"gave up after {attempts} draws with {got}/{n} in the slab "
                f"(halfwidth={band.halfwidth})"
            )
        take = min(chunk, max_attempts - attempts)
        raw = sample(spec, take, rng)
        attempts += take
        hits = raw[band.contains(raw)]
        keep = min(n - got, hits.shape[0])
        out[got : got + keep] = hits[:keep]
        got += keep
    return out


def band_mass(spec: DistributionSpec, halfwidth: float, n: int, seed, direction=None) -> MonteCarloEstimate:
    """Monte Carlo estimate of the slab mass, with its standard error."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    u = _default_direction(spec) if direction is None else unit_vector(direction)
    x = sample(spec, n, seed)
    hits = np.abs(x @ u) <= halfwidth
    p = float(hits.mean())
    return MonteCarloEstimate(p, math.sqrt(max(p * (1.0 - p), 1e-300) / n))


def err_rate_mc(spec: DistributionSpec, u, v, n: int, seed) -> float:
    """Fraction of draws on which the two halfspaces disagree."""
    uu = unit_vector(u)
    vv = unit_vector(v)
    x = sample(spec, n, seed)
    return float(np.mean(sign_labels(x @ uu) != sign_labels(x @ vv)))


def err_rate_rotational(u, v) -> float:
    """Exact disagreement angle/pi; an exact oracle for the Gaussian family."""
    return angle(u, v) / math.pi


def _default_direction(spec: DistributionSpec) -> np.ndarray:
    e1 = np.zeros(spec.dim)
    e1[0] = 1.0
    return e1
