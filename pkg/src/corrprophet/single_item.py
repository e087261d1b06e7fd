"""Single-selection policies: fixed and distribution-derived thresholds,
column- and row-sparsity inclusion-threshold algorithms, the unweighted
best-of-three rule and the negatively-associated threshold rule."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .base import InclusionThresholdPolicy, _jsonable
from .distributions import (
    DiscreteDistribution,
    SupportExplosionError,
    expected_max,
    linear_combination,
    median_of_max,
)
from .model import (
    JointSampler,
    LinearInstance,
    col_sparsity,
    is_column_normalized,
    normalize_columns,
    row_sparsity,
)
from .oracle import ENUMERATION_CAP, Estimate, exact_prophet_value, mc_prophet_value
from .seeding import CONSTRUCTION, INCLUSION, ORACLE_MC, rng_for

DEFAULT_MC_SAMPLES = 10**5


def half_expected_max_threshold(z_dists: Sequence[DiscreteDistribution]) -> float:
    """Half of E[max_i Z_i] for independent Z_i."""
    return 0.5 * expected_max(z_dists)


def median_of_max_threshold(z_dists: Sequence[DiscreteDistribution]) -> float:
    """Smallest t with Pr[max_i Z_i <= t] >= 1/2."""
    return median_of_max(z_dists)


def expected_max_of_forms(
    forms: Sequence[Sequence[tuple[float, DiscreteDistribution]]],
    cap: int = ENUMERATION_CAP,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed=0,
) -> tuple[Estimate, list[DiscreteDistribution] | None]:
    """E[max_i Z_i] where Z_i = sum(a * Y) over pairwise disjoint features.

    Exact through each Z_i's own law when every law fits under ``cap``;
    otherwise a Monte Carlo estimate.  Returns the estimate and the laws
    (None on the Monte Carlo path).
    """
    try:
        laws = [linear_combination(form, cap) for form in forms]
    except SupportExplosionError:
        laws = None
    if laws is not None:
        return Estimate.exact_value(expected_max(laws)), laws
    rng = rng_for(seed, ORACLE_MC)
    best = np.zeros(mc_samples)
    for form in forms:
        z = np.zeros(mc_samples)
        for a, dist in form:
            z += a * dist.sample(rng.random(mc_samples))
        np.maximum(best, z, out=best)
    return Estimate.from_samples(best), None


class ThresholdPolicy(InclusionThresholdPolicy):
    """Take the first arrival (in ``inclusion_set`` if given) that is >= the
    threshold, or > it when ``strict``."""

    def __init__(self, threshold=0.0, inclusion_set=None, strict=False):
        self.threshold = threshold
        self.inclusion_set = inclusion_set
        self.strict = strict

    def fit(self, source=None):
        return self

    def __sklearn_is_fitted__(self):
        return True

    @property
    def threshold_(self):
        return float(self.threshold)

    @property
    def inclusion_set_(self):
        return None if self.inclusion_set is None else tuple(sorted(self.inclusion_set))

    @property
    def n_arrivals_(self):
        return None


class HalfMaxPolicy(InclusionThresholdPolicy):
    """Threshold at half the expected maximum of independent Z_i, the rule
    that stays 2-competitive under nonnegative augmentations."""

    def __init__(self, strict=False):
        self.strict = strict

    def fit(self, z_dists):
        self.expected_max_ = Estimate.exact_value(expected_max(z_dists))
        self.threshold_ = 0.5 * self.expected_max_.mean
        self.inclusion_set_ = None
        self.n_arrivals_ = len(z_dists)
        return self


class MedianPolicy(InclusionThresholdPolicy):
    """Threshold at the median of max_i Z_i; fragile under augmentation."""

    def __init__(self, strict=False):
        self.strict = strict

    def fit(self, z_dists):
        self.threshold_ = median_of_max_threshold(z_dists)
        self.inclusion_set_ = None
        self.n_arrivals_ = len(z_dists)
        return self


class ProphetHalfPolicy(InclusionThresholdPolicy):
    """Threshold at half of E[max_i X_i] of a (possibly correlated) instance."""

    def __init__(self, support_cap=ENUMERATION_CAP, mc_samples=DEFAULT_MC_SAMPLES, random_state=0):
        self.support_cap = support_cap
        self.mc_samples = mc_samples
        self.random_state = random_state

    def fit(self, instance: LinearInstance):
        try:
            est = exact_prophet_value(instance, 1, self.support_cap)
        except SupportExplosionError:
            est = mc_prophet_value(instance.sampler(), 1, self.mc_samples, self.random_state)
        self.expected_max_ = est
        self.threshold_ = 0.5 * est.mean
        self.inclusion_set_ = None
        self.n_arrivals_ = instance.n
        return self


def _first_claim_sets(instance: LinearInstance, arrivals: Sequence[int]) -> dict[int, tuple[int, ...]]:
    """Give each feature to the first listed arrival that includes it."""
    claimed: set[int] = set()
    out = {}
    for i in sorted(arrivals):
        cols, _ = instance.row(i)
        mine = tuple(int(j) for j in cols if int(j) not in claimed)
        claimed.update(mine)
        out[i] = mine
    return out


def _forms(instance: LinearInstance, feature_sets: dict[int, tuple[int, ...]]):
    forms = []
    for i, T in feature_sets.items():
        cols, vals = instance.row(i)
        coef = dict(zip(cols.tolist(), vals.tolist()))
        forms.append([(coef[j], instance.features[j]) for j in T])
    return forms


class ColumnSparsePolicy(InclusionThresholdPolicy):
    """Inclusion-threshold rule for bounded column sparsity.

    Each arrival joins the inclusion set independently with probability
    1/s_col.  Every feature is credited to the first included arrival that
    uses it; Z_i is the credited part of X_i and the threshold is half of
    E[max Z].  Pass ``inclusion_set`` to fix the set instead of drawing it.
    """

    def __init__(self, inclusion_set=None, random_state=None, support_cap=ENUMERATION_CAP,
                 mc_samples=DEFAULT_MC_SAMPLES):
        self.inclusion_set = inclusion_set
        self.random_state = random_state
        self.support_cap = support_cap
        self.mc_samples = mc_samples

    def fit(self, instance: LinearInstance):
        s = max(col_sparsity(instance), 1)
        if self.inclusion_set is None:
            coins = rng_for(self.random_state, INCLUSION).random(instance.n)
            S = tuple(int(i) for i in np.flatnonzero(coins < 1.0 / s))
        else:
            S = tuple(sorted(int(i) for i in self.inclusion_set))
        self.s_col_ = s
        self.inclusion_set_ = S
        self.feature_sets_ = _first_claim_sets(instance, S)
        self.expected_max_, self.z_dists_ = expected_max_of_forms(
            _forms(instance, self.feature_sets_), self.support_cap, self.mc_samples,
            self.random_state,
        )
        self.threshold_ = 0.5 * self.expected_max_.mean
        self.n_arrivals_ = instance.n
        return self

    def transcript(self) -> dict:
        return {
            "policy": "col-sparse",
            "s_col": self.s_col_,
            "S": list(self.inclusion_set_),
            "T": {str(i): list(T) for i, T in self.feature_sets_.items()},
            "tau": self.threshold_,
            "expected_max_z": self.expected_max_.to_dict(),
        }


def enumerate_inclusion_sets(n: int, s_col: int):
    """Every inclusion set with its probability under the 1/s_col coin flips."""
    p = 1.0 / max(s_col, 1)
    for bits in itertools.product((0, 1), repeat=n):
        k = sum(bits)
        weight = p**k * (1.0 - p) ** (n - k)
        if weight > 0:
            yield weight, tuple(i for i, b in enumerate(bits) if b)


@dataclass
class RepresentativeConstruction:
    """One draw of the feature/arrival matching.

    ``matching`` maps each chosen arrival to its feature; ``primaries[j]`` is
    the arrival whose coefficient on feature j equals 1; ``order`` is the
    peeling order used for the sweep.
    """

    S: tuple[int, ...]
    T: tuple[int, ...]
    matching: dict[int, int]
    primaries: tuple[int, ...]
    order: tuple[int, ...]
    s_row: int
    out_edges: tuple[tuple[int, ...], ...] = field(repr=False)

    def to_dict(self) -> dict:
        return _jsonable({
            "S": self.S, "T": self.T,
            "matching": {str(i): j for i, j in self.matching.items()},
            "primaries": self.primaries, "order": self.order, "s_row": self.s_row,
        })


class RepresentativeSampler:
    """Precomputed graph and peeling order for drawing representative sets.

    Feature j points to every other feature used by its primary arrival.
    The order is built back to front by repeatedly removing a vertex of
    minimum in-degree (lowest index on ties), so each vertex has at most
    s_row - 1 in-edges from vertices placed before it.
    """

    def __init__(self, instance: LinearInstance):
        if not is_column_normalized(instance):
            raise ValueError("representative construction needs a column-normalized instance")
        self.instance = instance
        self.s_row = max(row_sparsity(instance), 1)
        m = instance.m
        prim = []
        for j in range(m):
            rows, vals = instance.column(j)
            prim.append(int(rows[vals == 1.0].min()))
        self.primaries = tuple(prim)
        self.out_edges = tuple(
            tuple(int(k) for k in instance.row(prim[j])[0] if k != j) for j in range(m)
        )
        self.order = self._peel()
        self.neighbors = tuple(
            tuple(sorted(set(self.out_edges[j]) | {k for k in range(m) if j in self.out_edges[k]}))
            for j in range(m)
        )

    def _peel(self) -> tuple[int, ...]:
        remaining = set(range(self.instance.m))
        indeg = np.zeros(self.instance.m, dtype=int)
        for j in remaining:
            for k in self.out_edges[j]:
                indeg[k] += 1
        back = []
        while remaining:
            j = min(remaining, key=lambda v: (indeg[v], v))
            back.append(j)
            remaining.remove(j)
            for k in self.out_edges[j]:
                indeg[k] -= 1
        return tuple(reversed(back))

    def peeling_in_degrees(self) -> list[int]:
        """In-degree of each order[k] within the subgraph on order[:k+1]."""
        out = []
        for k, j in enumerate(self.order):
            out.append(sum(1 for v in self.order[:k] if j in self.out_edges[v]))
        return out

    def sample_many(self, num: int, seed=0) -> np.ndarray:
        """Boolean (num, m) matrix; row k marks the features chosen in draw k."""
        m = self.instance.m
        coins = rng_for(seed, CONSTRUCTION).random((num, m))
        T = np.zeros((num, m), dtype=bool)
        blocked = np.zeros((num, m), dtype=bool)
        p = 1.0 / self.s_row
        for j in self.order:
            inc = ~blocked[:, j] & (coins[:, j] < p)
            T[:, j] = inc
            for k in self.neighbors[j]:
                blocked[inc, k] = True
        return T

    def build(self, T) -> RepresentativeConstruction:
        T = tuple(sorted(int(j) for j in T))
        matching = {self.primaries[j]: j for j in T}
        if len(matching) != len(T):
            raise ValueError("two chosen features share a primary arrival")
        return RepresentativeConstruction(
            S=tuple(sorted(matching)), T=T, matching=matching, primaries=self.primaries,
            order=self.order, s_row=self.s_row, out_edges=self.out_edges,
        )

    def sample(self, seed=0) -> RepresentativeConstruction:
        return self.build(np.flatnonzero(self.sample_many(1, seed)[0]))

    def enumerate(self, cap: int = 2**16):
        """All reachable feature sets with their probabilities."""
        p = 1.0 / self.s_row
        out = []

        def walk(k, chosen, blocked, weight):
            if len(out) > cap:
                raise SupportExplosionError(f"more than {cap} representative sets")
            if k == len(self.order):
                out.append((weight, tuple(sorted(chosen))))
                return
            j = self.order[k]
            if j in blocked:
                walk(k + 1, chosen, blocked, weight)
                return
            if p < 1:
                walk(k + 1, chosen, blocked, weight * (1 - p))
            walk(k + 1, chosen | {j}, blocked | set(self.neighbors[j]), weight * p)

        walk(0, frozenset(), frozenset(), 1.0)
        return out

    def independence_violations(self, T: np.ndarray) -> np.ndarray:
        """Per draw, whether some chosen primary arrival uses another chosen
        feature, read straight off the coefficient matrix."""
        A = self.instance.dense()
        M = A[list(self.primaries), :] > 0
        np.fill_diagonal(M, False)
        hits = (T.astype(np.int64) @ M.astype(np.int64)) > 0
        return (hits & T).any(axis=1)


def representative_construction(instance_normalized: LinearInstance, seed=0) -> RepresentativeConstruction:
    return RepresentativeSampler(instance_normalized).sample(seed)


class RowSparsePolicy(InclusionThresholdPolicy):
    """Inclusion-threshold rule for bounded row sparsity.

    Normalizes columns, draws a representative construction, includes the
    matched arrivals and sets the threshold to half the expected maximum of
    their matched (rescaled) features.  ``representative_set`` fixes the
    chosen features instead of sampling them.
    """

    def __init__(self, representative_set=None, random_state=None):
        self.representative_set = representative_set
        self.random_state = random_state

    def fit(self, instance: LinearInstance):
        normalized = normalize_columns(instance)
        sampler = RepresentativeSampler(normalized)
        if self.representative_set is None:
            construction = sampler.sample(self.random_state)
        else:
            construction = sampler.build(self.representative_set)
        self.construction_ = construction
        self.inclusion_set_ = construction.S
        self.z_dists_ = [normalized.features[construction.matching[i]] for i in construction.S]
        self.expected_max_ = Estimate.exact_value(expected_max(self.z_dists_))
        self.threshold_ = 0.5 * self.expected_max_.mean
        self.n_arrivals_ = instance.n
        return self

    def transcript(self) -> dict:
        return {
            "policy": "row-sparse",
            "construction": self.construction_.to_dict(),
            "tau": self.threshold_,
            "expected_max_z": self.expected_max_.to_dict(),
        }


@dataclass
class UnweightedThresholds:
    boundary: float
    p: list[float]
    tail_mass: float
    core_value: Estimate
    tau_tail: float
    tau_core: float
    chosen: float
    chosen_name: str
    tail_estimate: Estimate

    def candidates(self) -> dict[str, float]:
        return {"boundary": self.boundary, "tail": self.tau_tail, "core": self.tau_core}

    def to_dict(self) -> dict:
        return _jsonable({
            "boundary": self.boundary, "p": self.p, "tail_mass": self.tail_mass,
            "core_value": self.core_value.to_dict(), "tau_tail": self.tau_tail,
            "tau_core": self.tau_core, "chosen": self.chosen, "chosen_name": self.chosen_name,
            "expected_max_new_features": self.tail_estimate.to_dict(),
        })


def unweighted_thresholds(instance: LinearInstance, support_cap=ENUMERATION_CAP,
                          mc_samples=DEFAULT_MC_SAMPLES, seed=0) -> UnweightedThresholds:
    if np.any(instance.vals != 1.0):
        raise ValueError("unweighted policy needs a 0/1 coefficient matrix")
    feats = instance.features
    if feats:
        grid = np.unique(np.concatenate([f.values for f in feats]))
        below = np.ones_like(grid)
        for f in feats:
            below *= f.cdf(grid)
        boundary = float(grid[int(np.argmax(below >= 0.5))])
    else:
        boundary = 0.0
    p = [f.sf(boundary) for f in feats]
    tail = math.fsum(f.tail_mass(boundary) for f in feats)

    core = LinearInstance(instance.n, instance.m, instance.entries,
                          [f.truncated_above(boundary) for f in feats])
    try:
        V = exact_prophet_value(core, 1, support_cap)
    except SupportExplosionError:
        V = mc_prophet_value(core.sampler(), 1, mc_samples, seed)

    new_parts = _first_claim_sets(instance, range(instance.n))
    tail_est, _ = expected_max_of_forms(_forms(instance, new_parts), support_cap, mc_samples, seed)
    tau_tail = 0.5 * tail_est.mean
    tau_core = 0.5 * V.mean
    if tail >= V.mean:
        chosen, name = tau_tail, "tail"
    elif boundary > V.mean / 10:
        chosen, name = boundary, "boundary"
    else:
        chosen, name = tau_core, "core"
    return UnweightedThresholds(boundary, p, tail, V, tau_tail, tau_core, chosen, name, tail_est)


class UnweightedPolicy(InclusionThresholdPolicy):
    """Fixed threshold for 0/1 matrices, picked among a boundary, a core
    and a tail candidate."""

    def __init__(self, support_cap=ENUMERATION_CAP, mc_samples=DEFAULT_MC_SAMPLES, random_state=0):
        self.support_cap = support_cap
        self.mc_samples = mc_samples
        self.random_state = random_state

    def fit(self, instance: LinearInstance):
        self.thresholds_ = unweighted_thresholds(
            instance, self.support_cap, self.mc_samples, self.random_state
        )
        self.threshold_ = self.thresholds_.chosen
        self.inclusion_set_ = None
        self.n_arrivals_ = instance.n
        return self

    def transcript(self) -> dict:
        return {"policy": "unweighted", **self.thresholds_.to_dict()}


class NAThresholdPolicy(InclusionThresholdPolicy):
    """Half of E[max X] for a joint sampler (exact when the sampler knows it)."""

    def __init__(self, num_samples=DEFAULT_MC_SAMPLES, random_state=0):
        self.num_samples = num_samples
        self.random_state = random_state

    def fit(self, sampler: JointSampler):
        exact = getattr(sampler, "exact_expected_max", None)
        if exact is not None:
            self.expected_max_ = Estimate.exact_value(exact())
        else:
            self.expected_max_ = mc_prophet_value(sampler, 1, self.num_samples, self.random_state)
        self.threshold_ = 0.5 * self.expected_max_.mean
        self.inclusion_set_ = None
        self.n_arrivals_ = sampler.n
        return self


def col_sparse_policy(instance: LinearInstance, seed=0, **kwargs) -> ColumnSparsePolicy:
    return ColumnSparsePolicy(random_state=seed, **kwargs).fit(instance)


def row_sparse_policy(instance: LinearInstance, seed=0) -> RowSparsePolicy:
    return RowSparsePolicy(random_state=seed).fit(instance)


def unweighted_policy(instance: LinearInstance, seed=0, **kwargs) -> UnweightedPolicy:
    return UnweightedPolicy(random_state=seed, **kwargs).fit(instance)


def na_threshold_policy(sampler: JointSampler, num_samples=DEFAULT_MC_SAMPLES, seed=0) -> NAThresholdPolicy:
    return NAThresholdPolicy(num_samples, seed).fit(sampler)


def col_sparse_fits(instance: LinearInstance, support_cap=ENUMERATION_CAP, max_arrivals=16):
    """(probability, fitted policy) for every inclusion set; the policy's
    internal randomness then averages out exactly."""
    if instance.n > max_arrivals:
        raise SupportExplosionError(f"2^{instance.n} inclusion sets exceed the enumeration limit")
    s = max(col_sparsity(instance), 1)
    for weight, S in enumerate_inclusion_sets(instance.n, s):
        yield weight, ColumnSparsePolicy(inclusion_set=S, support_cap=support_cap).fit(instance)


def row_sparse_fits(instance: LinearInstance, cap: int = 2**16):
    """(probability, fitted policy) for every reachable representative set."""
    sampler = RepresentativeSampler(normalize_columns(instance))
    for weight, T in sampler.enumerate(cap):
        yield weight, RowSparsePolicy(representative_set=T).fit(instance)
