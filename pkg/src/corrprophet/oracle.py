"""Exact scenario enumeration, online-optimum dynamic program, and Monte
Carlo estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import SupportExplosionError
from .model import JointSampler, LinearInstance
from .seeding import ORACLE_MC, derive_seed

ENUMERATION_CAP = 2**20
DP_CAP = 2**16
BRUTE_FORCE_CAP = 2**22
_CHUNK = 2**16


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float = 0.0
    num_samples: int = 0
    exact: bool = False

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be nonnegative")
        if self.exact and self.std_error != 0:
            raise ValueError("exact estimates carry zero std_error")

    @classmethod
    def exact_value(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0, True)

    @classmethod
    def from_moments(cls, total: float, total_sq: float, count: int) -> "Estimate":
        mean = total / count
        if count < 2:
            return cls(mean, math.inf, count, False)
        var = max(total_sq - count * mean * mean, 0.0) / (count - 1)
        return cls(mean, math.sqrt(var / count), count, False)

    @classmethod
    def from_samples(cls, values) -> "Estimate":
        values = np.asarray(values, dtype=float)
        return cls.from_moments(float(values.sum()), float(np.dot(values, values)), values.size)

    @property
    def reliable(self) -> bool:
        return self.exact or (self.num_samples >= 2 and math.isfinite(self.std_error))

    def __float__(self):
        return self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "num_samples": self.num_samples,
            "exact": self.exact,
        }


@dataclass(frozen=True)
class ScenarioTable:
    """Full joint support: feature draws ``Y``, arrivals ``X``, and probabilities."""

    X: np.ndarray
    prob: np.ndarray
    Y: np.ndarray | None = None

    def __post_init__(self):
        if abs(math.fsum(self.prob) - 1.0) > 1e-9:
            raise ValueError("scenario probabilities must sum to one")

    @property
    def size(self) -> int:
        return self.prob.size

    @property
    def n(self) -> int:
        return self.X.shape[1]


def build_scenarios(instance: LinearInstance, cap: int = ENUMERATION_CAP) -> ScenarioTable:
    """Enumerate every joint feature outcome (feature 0 varies slowest)."""
    total = instance.support_size
    if total > cap:
        raise SupportExplosionError(
            f"joint support has about 2^{math.log2(total):.1f} scenarios (cap {cap}); "
            "use the Monte Carlo path"
        )
    sizes = [f.size for f in instance.features]
    k = np.arange(total)
    Y = np.empty((total, instance.m))
    prob = np.ones(total)
    stride = total
    for j, f in enumerate(instance.features):
        stride //= sizes[j]
        digit = (k // stride) % sizes[j]
        Y[:, j] = f.values[digit]
        prob *= f.probs[digit]
    return ScenarioTable(instance.compute_x(Y), prob, Y)


def as_table(source, cap: int = ENUMERATION_CAP) -> ScenarioTable:
    if isinstance(source, ScenarioTable):
        return source
    if isinstance(source, LinearInstance):
        return build_scenarios(source, cap)
    if isinstance(source, JointSampler):
        exact = source.scenarios()
        if exact is None:
            raise SupportExplosionError(f"{type(source).__name__} has no exact enumeration")
        X, prob = exact
        if prob.size > cap:
            raise SupportExplosionError(f"{prob.size} scenarios exceed cap {cap}")
        return ScenarioTable(X, prob)
    raise TypeError(f"cannot enumerate {type(source).__name__}")


def top_r_sum(X: np.ndarray, r: int) -> np.ndarray:
    if r >= X.shape[1]:
        return X.sum(axis=1)
    return -np.partition(-X, r - 1, axis=1)[:, :r].sum(axis=1)


def exact_prophet_value(source, r: int = 1, cap: int = ENUMERATION_CAP) -> Estimate:
    """E[sum of the r largest arrivals] by full enumeration."""
    if r < 1:
        raise ValueError("r must be at least 1")
    table = as_table(source, cap)
    total = 0.0
    for lo in range(0, table.size, _CHUNK):
        hi = lo + _CHUNK
        total += float(np.dot(table.prob[lo:hi], top_r_sum(table.X[lo:hi], r)))
    return Estimate.exact_value(total)


def exact_policy_value(source, policy, r: int | None = None, cap: int = ENUMERATION_CAP) -> Estimate:
    """E[reward] of a policy whose randomness is already fixed."""
    table = as_table(source, cap)
    budget = getattr(policy, "budget_", 1)
    if r is not None and budget > r:
        raise ValueError(f"policy may take {budget} arrivals but r = {r}")
    total = 0.0
    for lo in range(0, table.size, _CHUNK):
        hi = lo + _CHUNK
        total += float(np.dot(table.prob[lo:hi], policy.reward(table.X[lo:hi])))
    return Estimate.exact_value(total)


def exact_mixture_value(source, weighted_policies, cap: int = ENUMERATION_CAP) -> Estimate:
    """Exact value of a randomized policy given as (weight, fitted policy) pairs."""
    table = as_table(source, cap)
    total = 0.0
    mass = 0.0
    for weight, policy in weighted_policies:
        if weight == 0:
            continue
        total += weight * exact_policy_value(table, policy).mean
        mass += weight
    if abs(mass - 1.0) > 1e-9:
        raise ValueError(f"mixture weights sum to {mass}, not 1")
    return Estimate.exact_value(total)


def _suffix_top(x_row: np.ndarray, r: int) -> np.ndarray:
    """Best deterministic future: value[k] = sum of the k largest remaining."""
    srt = np.sort(x_row)[::-1]
    out = np.zeros(r + 1)
    out[1:] = np.cumsum(np.concatenate([srt, np.zeros(max(0, r - srt.size))]))[:r]
    return out


def exact_online_optimum(source, r: int = 1, cap: int = DP_CAP) -> Estimate:
    """Value of the best online policy that sees X_1..X_i before deciding on X_i.

    Backward induction over (arrival index, consistent scenario set,
    remaining budget).  Scenario sets split on the observed value; the
    recursion returns probability-weighted values for every budget at once.
    Ties between stopping and continuing resolve to stopping.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    table = as_table(source, cap)
    X, prob = table.X, table.prob
    n = X.shape[1]

    def solve(idx: np.ndarray, i: int) -> np.ndarray:
        if i == n:
            return np.zeros(r + 1)
        if idx.size == 1:
            s = idx[0]
            return prob[s] * _suffix_top(X[s, i:], r)
        keys, inverse = np.unique(X[idx, i], return_inverse=True)
        total = np.zeros(r + 1)
        for g, x in enumerate(keys):
            sub = idx[inverse == g]
            cont = solve(sub, i + 1)
            stop = np.empty(r + 1)
            stop[0] = -np.inf
            stop[1:] = prob[sub].sum() * x + cont[:-1]
            total += np.maximum(stop, cont)
        return total

    return Estimate.exact_value(float(solve(np.arange(prob.size), 0)[r]))


def brute_force_online_optimum(source, cap: int = 2**10, policy_cap: int = BRUTE_FORCE_CAP) -> Estimate:
    """Single-item online optimum by listing every prefix-keyed stopping rule.

    Each decision node is an observed prefix; a deterministic rule either
    stops there or continues into every child prefix.  The values of all
    such rules are materialized and the largest is returned.
    """
    table = as_table(source, cap)
    X, prob = table.X, table.prob
    n = X.shape[1]

    def count(idx, i):
        if i == n:
            return 1
        keys, inverse = np.unique(X[idx, i], return_inverse=True)
        prod = 1
        for g in range(keys.size):
            prod *= 1 + count(idx[inverse == g], i + 1)
            if prod > policy_cap:
                return policy_cap + 1
        return prod

    if count(np.arange(prob.size), 0) > policy_cap:
        raise SupportExplosionError(f"more than {policy_cap} stopping rules to enumerate")

    def values(idx, i):
        """All achievable values of rules restricted to this node's subtree."""
        if i == n:
            return np.zeros(1)
        keys, inverse = np.unique(X[idx, i], return_inverse=True)
        out = []
        for g, x in enumerate(keys):
            sub = idx[inverse == g]
            here_stop = np.array([float(np.dot(prob[sub], X[sub, i]))])
            go_on = values(sub, i + 1)
            out.append(np.concatenate([here_stop, go_on]))
        combined = out[0]
        for vals in out[1:]:
            combined = np.add.outer(combined, vals).ravel()
        return combined

    return Estimate.exact_value(float(values(np.arange(prob.size), 0).max()))


def achievable_values(source, cap: int = ENUMERATION_CAP) -> np.ndarray:
    return np.unique(as_table(source, cap).X)


def threshold_values(source, thresholds, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact E[ALG_tau] (take first X_i >= tau) for each tau."""
    table = as_table(source, cap)
    thresholds = np.asarray(thresholds, dtype=float)
    out = np.zeros(thresholds.size)
    rows_all = np.arange(min(_CHUNK, table.size))
    for lo in range(0, table.size, _CHUNK):
        X = table.X[lo : lo + _CHUNK]
        p = table.prob[lo : lo + _CHUNK]
        rows = rows_all[: X.shape[0]]
        for k, tau in enumerate(thresholds):
            ok = X >= tau
            idx = np.argmax(ok, axis=1)
            got = np.where(ok[rows, idx], X[rows, idx], 0.0)
            out[k] += float(np.dot(p, got))
    return out


def best_fixed_threshold(source, cap: int = ENUMERATION_CAP) -> tuple[float, Estimate]:
    """Best take-on->= fixed threshold over all achievable values plus +inf.

    E[ALG_tau] is constant for tau between consecutive achievable values, so
    this candidate set contains a maximizer; ties go to the smallest tau.
    """
    table = as_table(source, cap)
    candidates = np.concatenate([np.unique(table.X), [np.inf]])
    vals = threshold_values(table, candidates)
    k = int(np.argmax(vals))
    return float(candidates[k]), Estimate.exact_value(vals[k])


def mc_value(sampler: JointSampler, policy, r: int | None = None, num_samples: int = 10**5, seed=0) -> Estimate:
    """Monte Carlo mean and standard error of ``policy.reward``."""
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    budget = getattr(policy, "budget_", 1)
    if r is not None and budget > r:
        raise ValueError(f"policy may take {budget} arrivals but r = {r}")
    total = total_sq = 0.0
    for X in sampler.iter_blocks(derive_seed(seed, ORACLE_MC), num_samples):
        v = policy.reward(X)
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
    return Estimate.from_moments(total, total_sq, num_samples)


def mc_prophet_value(sampler: JointSampler, r: int = 1, num_samples: int = 10**5, seed=0) -> Estimate:
    total = total_sq = 0.0
    for X in sampler.iter_blocks(derive_seed(seed, ORACLE_MC), num_samples):
        v = top_r_sum(X, r)
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
    return Estimate.from_moments(total, total_sq, num_samples)
