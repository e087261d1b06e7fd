"""Augmented arrival streams X_i = Z_i + W_i with adversarial bonuses W_i >= 0.

Adversaries are vectorized over independent trials: ``boost(history, z, i)``
receives the realized X_1..X_{i-1} (shape (trials, i)), the fresh Z_i and the
arrival index, and returns one bonus per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import DiscreteDistribution, expected_max
from .model import independent_instance
from .oracle import Estimate, build_scenarios, top_r_sum
from .seeding import AUGMENTED, BLOCK_SIZE, blocks, rng_for


class AdversaryContractError(RuntimeError):
    """An adversary produced a negative or non-finite bonus."""


class Adversary:
    name = "adversary"

    def boost(self, history: np.ndarray, z: np.ndarray, i: int) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class ZeroAdversary(Adversary):
    name = "zero"

    def boost(self, history, z, i):
        return np.zeros_like(z)


class TinyBoostFirst(Adversary):
    """Adds ``delta`` to the first arrival only."""

    name = "tiny-boost-first"

    def __init__(self, delta: float = 1e-6):
        self.delta = delta

    def boost(self, history, z, i):
        return np.full_like(z, self.delta if i == 0 else 0.0)


class JustBelowThreshold(Adversary):
    """Lifts every arrival below the threshold to the largest float under it."""

    name = "just-below-threshold"

    def __init__(self, threshold: float):
        self.threshold = threshold

    def boost(self, history, z, i):
        target = np.nextafter(self.threshold, -np.inf)
        return np.where(z < target, target - z, 0.0).clip(min=0.0)


class JustAboveFirst(Adversary):
    """Lifts a low first arrival to just above the threshold, baiting an
    early stop on a small value."""

    name = "just-above-first"

    def __init__(self, threshold: float):
        self.threshold = threshold

    def boost(self, history, z, i):
        if i != 0:
            return np.zeros_like(z)
        target = np.nextafter(self.threshold, np.inf)
        return np.where(z < target, target - z, 0.0).clip(min=0.0)


class HistoryTriggered(Adversary):
    """Adds ``bonus`` to every arrival once some earlier X reached ``trigger``."""

    name = "history-triggered"

    def __init__(self, trigger: float, bonus: float):
        self.trigger = trigger
        self.bonus = bonus

    def boost(self, history, z, i):
        if i == 0:
            return np.zeros_like(z)
        fired = (history >= self.trigger).any(axis=1)
        return np.where(fired, self.bonus, 0.0)


def adversary_suite(threshold: float, delta: float = 1e-6) -> dict[str, Adversary]:
    """The five shipped adversaries, tuned against a given threshold."""
    advs = [
        ZeroAdversary(),
        TinyBoostFirst(delta),
        JustBelowThreshold(threshold),
        JustAboveFirst(threshold),
        HistoryTriggered(trigger=threshold, bonus=max(threshold, delta)),
    ]
    return {a.name: a for a in advs}


class AugmentedStream:
    """Independent Z_i plus adversarial bonuses; draw k depends only on (seed, k)."""

    def __init__(self, z_dists: Sequence[DiscreteDistribution], adversary: Adversary | None = None):
        if not z_dists:
            raise ValueError("need at least one arrival")
        self.z_dists = list(z_dists)
        self.adversary = adversary if adversary is not None else ZeroAdversary()
        self.n = len(self.z_dists)

    def benchmark(self, r: int = 1) -> float | None:
        """Exact E[max Z] for r = 1; None otherwise."""
        return expected_max(self.z_dists) if r == 1 else None

    def _z_block(self, seed, block: int) -> np.ndarray:
        rng = rng_for(seed, AUGMENTED, block)
        u = rng.random((BLOCK_SIZE, self.n))
        return np.column_stack([d.sample(u[:, i]) for i, d in enumerate(self.z_dists)])

    def augment(self, Z: np.ndarray) -> np.ndarray:
        X = np.empty_like(Z)
        for i in range(self.n):
            w = np.asarray(self.adversary.boost(X[:, :i], Z[:, i], i), dtype=float)
            if w.shape != Z[:, i].shape:
                raise AdversaryContractError(f"bonus shape {w.shape} at arrival {i}")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise AdversaryContractError(
                    f"{self.adversary!r} returned a negative or non-finite bonus at arrival {i}"
                )
            X[:, i] = Z[:, i] + w
        return X

    def iter_blocks(self, seed, count: int, start: int = 0):
        """Yield (Z, X) slices covering draws [start, start + count)."""
        for block, lo, hi in blocks(start, count):
            Z = self._z_block(seed, block)[lo:hi]
            yield Z, self.augment(Z)

    def sample(self, seed, count: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
        parts = list(self.iter_blocks(seed, count, start))
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class PairedResult:
    """Moments of (ALG, benchmark) measured on the same draws."""

    count: int
    sum_alg: float
    sum_alg_sq: float
    sum_bench: float
    sum_bench_sq: float
    sum_cross: float

    @property
    def alg(self) -> Estimate:
        return Estimate.from_moments(self.sum_alg, self.sum_alg_sq, self.count)

    @property
    def benchmark(self) -> Estimate:
        return Estimate.from_moments(self.sum_bench, self.sum_bench_sq, self.count)

    def gap(self, weight: float) -> Estimate:
        """Estimate of E[ALG - weight * benchmark] with the paired variance."""
        n = self.count
        mean = (self.sum_alg - weight * self.sum_bench) / n
        if n < 2:
            return Estimate(mean, math.inf, n)
        sq = self.sum_alg_sq - 2 * weight * self.sum_cross + weight**2 * self.sum_bench_sq
        var = max(sq - n * mean * mean, 0.0) / (n - 1)
        return Estimate(mean, math.sqrt(var / n), n)

    def to_dict(self) -> dict:
        return {"alg": self.alg.to_dict(), "benchmark": self.benchmark.to_dict()}


def run_augmented(stream: AugmentedStream, policy, num_samples: int = 10**5, seed=0, r: int = 1) -> PairedResult:
    """Run a fitted policy on augmented draws; the benchmark is the top-r sum of Z."""
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    acc = np.zeros(5)
    for Z, X in stream.iter_blocks(seed, num_samples):
        a = policy.reward(X)
        b = top_r_sum(Z, r)
        acc += [a.sum(), a @ a, b.sum(), b @ b, a @ b]
    return PairedResult(num_samples, *map(float, acc))


def exact_augmented_value(stream: AugmentedStream, policy, r: int = 1, cap: int = 2**20) -> tuple[Estimate, Estimate]:
    """Exact (E[ALG], E[top-r Z]) by enumerating every Z outcome.

    Valid for adversaries that are deterministic functions of what they see,
    which covers every shipped adversary.
    """
    table = build_scenarios(independent_instance(stream.z_dists), cap)
    Z = table.Y
    alg = float(table.prob @ policy.reward(stream.augment(Z)))
    bench = float(table.prob @ top_r_sum(Z, r))
    return Estimate.exact_value(alg), Estimate.exact_value(bench)
