"""Finite-support nonnegative distributions and exact order statistics of
independent families of them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PROB_TOL = 1e-12


class SupportExplosionError(RuntimeError):
    """Raised when an exact enumeration would exceed its configured cap."""


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A nonnegative random variable with finitely many atoms.

    ``values`` are strictly increasing and nonnegative, ``probs`` are in
    (0, 1] and sum to one within ``PROB_TOL``.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        probs = np.array(self.probs, dtype=float).ravel()
        if values.size == 0 or values.shape != probs.shape:
            raise ValueError("values and probs must be nonempty and of equal length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("support values must be finite and nonnegative")
        if np.any(np.diff(values) <= 0):
            raise ValueError("support values must be distinct and sorted ascending")
        if np.any(probs <= 0) or np.any(probs > 1):
            raise ValueError("probabilities must lie in (0, 1]")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        values.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "DiscreteDistribution":
        """Build from (value, prob) pairs; merges repeated values and drops
        zero-probability atoms."""
        merged: dict[float, float] = {}
        for value, prob in pairs:
            if prob < 0:
                raise ValueError("negative probability")
            if prob == 0:
                continue
            merged[float(value)] = merged.get(float(value), 0.0) + float(prob)
        keys = sorted(merged)
        return cls(np.array(keys), np.array([merged[k] for k in keys]))

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def bernoulli(cls, p: float, value: float = 1.0) -> "DiscreteDistribution":
        if p >= 1:
            return cls.point(value)
        if p <= 0:
            return cls.point(0.0)
        return cls(np.array([0.0, float(value)]), np.array([1.0 - p, float(p)]))

    @property
    def size(self) -> int:
        return self.values.size

    def pairs(self) -> list[list[float]]:
        return [[float(v), float(p)] for v, p in zip(self.values, self.probs)]

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def cdf(self, t) -> np.ndarray | float:
        """Pr[Y <= t]."""
        cum = np.cumsum(self.probs)
        k = np.searchsorted(self.values, t, side="right")
        out = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
        return np.minimum(out, 1.0) if np.ndim(out) else float(min(out, 1.0))

    def sf(self, t) -> np.ndarray | float:
        """Pr[Y > t], summed over atoms rather than as 1 - cdf."""
        tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
        k = np.searchsorted(self.values, t, side="right")
        return tail[k] if np.ndim(k) else float(tail[k])

    def scaled(self, a: float) -> "DiscreteDistribution":
        if a <= 0:
            raise ValueError("scale must be positive")
        return DiscreteDistribution.from_pairs(zip(self.values * a, self.probs))

    def convolve(self, other: "DiscreteDistribution") -> "DiscreteDistribution":
        sums = np.add.outer(self.values, other.values).ravel()
        probs = np.multiply.outer(self.probs, other.probs).ravel()
        return DiscreteDistribution.from_pairs(zip(sums, probs))

    def conditional(self, mask) -> "DiscreteDistribution":
        """Distribution conditioned on the atoms selected by ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        mass = self.probs[mask].sum()
        if mass <= 0:
            raise ValueError("conditioning event has zero probability")
        probs = self.probs[mask] / mass
        probs = probs / math.fsum(probs)
        return DiscreteDistribution(self.values[mask], probs)

    def truncated_above(self, t: float) -> "DiscreteDistribution":
        """Y conditioned on Y <= t."""
        return self.conditional(self.values <= t)

    def tail_mass(self, t: float) -> float:
        """E[Y * 1{Y > t}]."""
        keep = self.values > t
        return float(np.dot(self.values[keep], self.probs[keep]))

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of uniforms in [0, 1)."""
        cum = np.cumsum(self.probs)
        k = np.searchsorted(cum, u, side="right")
        return self.values[np.minimum(k, self.size - 1)]

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.probs, other.probs
        )

    def __hash__(self):
        return hash((self.values.tobytes(), self.probs.tobytes()))

    def __repr__(self):
        return f"DiscreteDistribution({self.pairs()})"


def tower_feature(eps: float, level: int) -> DiscreteDistribution:
    """Value (1/eps)**level with probability eps**level, else zero."""
    return DiscreteDistribution.bernoulli(eps**level, (1.0 / eps) ** level)


def linear_combination(
    terms: Sequence[tuple[float, DiscreteDistribution]], cap: int = 2**20
) -> DiscreteDistribution:
    """Exact law of sum(a * Y) for independent Y; raises past ``cap`` atoms."""
    size = 1
    for _, dist in terms:
        size *= dist.size
        if size > cap:
            raise SupportExplosionError(f"linear combination has more than {cap} atoms")
    out = DiscreteDistribution.point(0.0)
    for a, dist in terms:
        out = out.convolve(dist.scaled(a))
    return out


def max_cdf(dists: Sequence[DiscreteDistribution]) -> tuple[np.ndarray, np.ndarray]:
    """Support of max_i Z_i for independent Z_i and its CDF on that support."""
    if not dists:
        return np.array([0.0]), np.array([1.0])
    grid = np.unique(np.concatenate([d.values for d in dists]))
    cdf = np.ones_like(grid)
    for d in dists:
        cdf = cdf * d.cdf(grid)
    return grid, cdf


def expected_max(dists: Sequence[DiscreteDistribution]) -> float:
    """E[max_i Z_i] for independent Z_i (zero for an empty family)."""
    grid, cdf = max_cdf(dists)
    pmf = np.diff(np.concatenate([[0.0], cdf]))
    return float(np.dot(grid, pmf))


def median_of_max(dists: Sequence[DiscreteDistribution]) -> float:
    """Smallest t with Pr[max_i Z_i <= t] >= 1/2."""
    grid, cdf = max_cdf(dists)
    k = int(np.argmax(cdf >= 0.5 - PROB_TOL))
    return float(grid[k])
