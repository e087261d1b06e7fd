"""Selection of up to r arrivals: the bucket algorithm for augmented
streams and three reductions from correlated instances to it or to
single-slot rules."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .augmented import AugmentedStream
from .base import OnlinePolicy, _jsonable, check_arrivals
from .distributions import DiscreteDistribution, SupportExplosionError
from .model import (
    LinearInstance,
    col_sparsity,
    independent_instance,
    restrict_rows,
)
from .oracle import ENUMERATION_CAP, Estimate, as_table, exact_policy_value
from .seeding import ASSIGNMENT, BLOCK_SIZE, DISCARD, ORACLE_MC, blocks, derive_seed, rng_for
from .single_item import ColumnSparsePolicy, RowSparsePolicy, ThresholdPolicy

# event codes, one per (trial, arrival)
BELOW_LAST = 0  # under the smallest threshold
NO_ROOM = 1  # every eligible bucket is full
TAKEN = 2
THINNED = 3  # bucket accepted it, then the epsilon coin dropped it
OVER_BUDGET = 4  # bucket accepted it, but r items were already kept

EVENT_NAMES = {BELOW_LAST: "below-last", NO_ROOM: "no-room", TAKEN: "taken",
               THINNED: "thinned", OVER_BUDGET: "over-budget"}


def epsilon_floor(r: int) -> float:
    """Smallest epsilon for which the bucket algorithm's guarantee applies."""
    return 9.0 * math.log(r) ** 1.5 / r**0.25 if r > 1 else 0.0


@dataclass
class BucketConfig:
    r: int
    epsilon: float
    last_level: int
    thresholds: np.ndarray
    capacities: np.ndarray
    slack: float
    bucket_mass: list[Estimate]
    expected_opt: Estimate
    requested_epsilon: float = field(default=None)

    def __post_init__(self):
        if self.requested_epsilon is None:
            self.requested_epsilon = self.epsilon

    def bucket_of(self, x: np.ndarray) -> np.ndarray:
        """Smallest level j with x >= thresholds[j]; last_level + 1 when x is under all of them."""
        return np.searchsorted(-self.thresholds, -np.asarray(x, dtype=float), side="left")

    def to_dict(self) -> dict:
        return _jsonable({
            "r": self.r, "epsilon": self.epsilon, "requested_epsilon": self.requested_epsilon,
            "last_level": self.last_level, "thresholds": self.thresholds, "capacities": self.capacities,
            "slack": self.slack, "bucket_mass": [e.to_dict() for e in self.bucket_mass],
            "expected_opt": self.expected_opt.to_dict(),
        })


def _bucket_counts_exact(table, r, thresholds):
    c = thresholds.size - 1
    total_opt = 0.0
    counts = np.zeros(c + 2)
    for lo in range(0, table.size, 2**14):
        X = table.X[lo : lo + 2**14]
        p = table.prob[lo : lo + 2**14]
        top = -np.sort(-X, axis=1)[:, :r]
        total_opt += float(p @ top.sum(axis=1))
        b = np.searchsorted(-thresholds, -top, side="left")
        for j in range(c + 2):
            counts[j] += float(p @ (b == j).sum(axis=1))
    return Estimate.exact_value(total_opt), [Estimate.exact_value(v) for v in counts[: c + 1]]


def _bucket_counts_mc(sampler, r, thresholds_of, samples, seed):
    """Two passes on the same draws: E[OPT] first, then bucket counts
    against thresholds that depend on it."""
    tops = []
    for X in sampler.iter_blocks(derive_seed(seed, ORACLE_MC), samples):
        tops.append(-np.sort(-X, axis=1)[:, :r])
    top = np.concatenate(tops)
    opt = Estimate.from_samples(top.sum(axis=1))
    thresholds = thresholds_of(opt.mean)
    b = np.searchsorted(-thresholds, -top, side="left")
    c = thresholds.size - 1
    counts = [Estimate.from_samples((b == j).sum(axis=1)) for j in range(c + 1)]
    return opt, counts


def compute_bucket_config(z_source, r: int, epsilon: float, oracle_budget: int = 10**5, seed=0,
                          clamp_epsilon: bool = True, cap: int = ENUMERATION_CAP) -> BucketConfig:
    """Thresholds, capacities and slack for the bucket algorithm.

    ``z_source`` is a list of independent laws or a LinearInstance whose
    arrivals play the role of Z.  E[OPT] and the per-bucket counts are exact
    when the joint support fits under ``cap``, Monte Carlo otherwise.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    if not 0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    requested = epsilon
    if clamp_epsilon:
        floor = epsilon_floor(r)
        if min(floor, 0.5) > epsilon:
            epsilon = min(floor, 0.5)
            warnings.warn(
                f"epsilon raised from {requested} to {epsilon} (guarantee needs >= {floor:.3g})",
                stacklevel=2,
            )
    c = math.ceil(math.log(r / epsilon**2) / epsilon)
    slack = 3.0 * math.sqrt(r * math.log(c / epsilon))
    ratios = (1.0 - epsilon) ** np.arange(c + 1)

    def thresholds_of(opt):
        return ratios * (opt / epsilon)

    source = z_source if isinstance(z_source, LinearInstance) else independent_instance(list(z_source))
    try:
        table = as_table(source, cap)
    except SupportExplosionError:
        table = None
    if table is not None:
        opt = Estimate.exact_value(
            float(table.prob @ -np.sort(-table.X, axis=1)[:, :r].sum(axis=1))
        )
        thresholds = thresholds_of(opt.mean)
        _, mass = _bucket_counts_exact(table, r, thresholds)
    else:
        opt, mass = _bucket_counts_mc(source.sampler(), r, thresholds_of, oracle_budget, seed)
        thresholds = thresholds_of(opt.mean)
    capacities = np.array([1.0] + [m.mean + slack for m in mass[1:]])
    return BucketConfig(r, epsilon, c, thresholds, capacities, slack, mass, opt, requested)


@dataclass
class SelectionTranscript:
    """One run: what was taken, into which bucket, and every event."""

    taken: list[int]
    buckets: list[int]
    values: list[float]
    fills: list[int]
    events: list[tuple[int, str, int]]

    def to_dict(self) -> dict:
        return _jsonable({
            "taken": self.taken, "buckets": self.buckets, "values": self.values,
            "fills": self.fills, "events": [list(e) for e in self.events],
        })


@dataclass
class BucketRun:
    """Vectorized outcome over many trials, one row per trial."""

    X: np.ndarray
    codes: np.ndarray
    bucket: np.ndarray
    fills: np.ndarray
    peak_fill_ratio: np.ndarray

    @property
    def take(self) -> np.ndarray:
        return self.codes == TAKEN

    def values(self) -> np.ndarray:
        return np.where(self.take, self.X, 0.0).sum(axis=1)

    def transcript(self, k: int, offset: int = 0) -> SelectionTranscript:
        taken = np.flatnonzero(self.take[k])
        events = [(int(i) + offset, EVENT_NAMES[int(code)], int(self.bucket[k, i]))
                  for i, code in enumerate(self.codes[k])]
        return SelectionTranscript(
            taken=[int(i) + offset for i in taken],
            buckets=[int(self.bucket[k, i]) for i in taken],
            values=[float(self.X[k, i]) for i in taken],
            fills=[int(v) for v in self.fills[k]],
            events=events,
        )


def _run_block(config: BucketConfig, X: np.ndarray, coins: np.ndarray) -> BucketRun:
    trials, n = X.shape
    width = config.last_level + 1
    fills = np.zeros((trials, width), dtype=np.int64)
    kept = np.zeros(trials, dtype=np.int64)
    codes = np.empty((trials, n), dtype=np.int8)
    bucket = np.full((trials, n), -1, dtype=np.int64)
    peak = np.zeros(trials)
    cols = np.arange(width)
    rows = np.arange(trials)
    for i in range(n):
        start = config.bucket_of(X[:, i])
        room = (fills + 1 <= config.capacities) & (cols[None, :] >= start[:, None])
        has_room = room.any(axis=1)
        j = np.argmax(room, axis=1)
        accepted = has_room & (start <= config.last_level)
        codes[:, i] = np.where(start > config.last_level, BELOW_LAST, NO_ROOM)
        acc_rows = rows[accepted]
        fills[acc_rows, j[accepted]] += 1
        bucket[acc_rows, i] = j[accepted]
        thin = coins[:, i] < config.epsilon
        full = kept >= config.r
        code = np.where(thin, THINNED, np.where(full, OVER_BUDGET, TAKEN))
        codes[accepted, i] = code[accepted]
        kept += accepted & (code == TAKEN)
        np.maximum(peak, (fills / config.capacities).max(axis=1), out=peak)
    return BucketRun(X, codes, bucket, fills, peak)


def run_bucket_algorithm(config: BucketConfig, stream, seed=0, num_trials: int | None = None,
                         stream_seed=None, start: int = 0) -> BucketRun:
    """Run the bucket algorithm on an arrival matrix or an AugmentedStream.

    The thinning coin for trial k comes from (seed, k) alone, so a trial's
    transcript does not depend on how many other trials run with it.
    """
    if isinstance(stream, AugmentedStream):
        if num_trials is None:
            raise ValueError("num_trials is required for a stream")
        X = stream.sample(seed if stream_seed is None else stream_seed, num_trials, start)[1]
    else:
        X = check_arrivals(stream)
    return _run_block(config, X, _coins(seed, start, X.shape))


def _coins(seed, start, shape):
    trials, n = shape
    parts = [rng_for(seed, DISCARD, b).random((BLOCK_SIZE, n))[lo:hi]
             for b, lo, hi in blocks(start, trials)]
    return np.concatenate(parts) if parts else np.zeros((0, n))


def check_bucket_invariants(config: BucketConfig, run: BucketRun) -> None:
    """Assert the transcript contract on every trial of a run."""
    take = run.take
    assert (take.sum(axis=1) <= config.r).all(), "more than r arrivals kept"
    assert (run.peak_fill_ratio <= 1.0).all(), "a bucket exceeded its capacity"
    accepted = run.bucket >= 0
    j = np.where(accepted, run.bucket, 0)
    assert (run.X[accepted] >= config.thresholds[j[accepted]]).all(), "kept below its bucket threshold"
    assert (run.X[take] >= config.thresholds[-1]).all(), "kept below the last threshold"
    for b in range(config.last_level + 1):
        assert ((accepted & (run.bucket == b)).sum(axis=1) == run.fills[:, b]).all(), "fill mismatch"


class BucketSelector(OnlinePolicy):
    """Estimator wrapper: ``fit`` on the Z laws, ``select`` on arrival rows."""

    def __init__(self, r=1, epsilon=0.2, oracle_budget=10**5, clamp_epsilon=True, random_state=0):
        self.r = r
        self.epsilon = epsilon
        self.oracle_budget = oracle_budget
        self.clamp_epsilon = clamp_epsilon
        self.random_state = random_state

    @property
    def budget_(self):
        return self.r

    def fit(self, z_source):
        self.config_ = compute_bucket_config(
            z_source, self.r, self.epsilon, self.oracle_budget, self.random_state, self.clamp_epsilon
        )
        return self

    def run(self, X, start: int = 0) -> BucketRun:
        check_is_fitted(self, "config_")
        X = check_arrivals(X)
        return _run_block(self.config_, X, _coins(self.random_state, start, X.shape))

    def select(self, X) -> np.ndarray:
        return self.run(X).take

    def transcript(self) -> dict:
        return {"policy": "bucket", "config": self.config_.to_dict()}


def _unique_feature_instance(instance: LinearInstance, rows: Sequence[int]) -> LinearInstance:
    """Arrivals ``rows`` keeping only features that no other row in the group uses."""
    rows = list(rows)
    pos = {i: k for k, i in enumerate(rows)}
    uses: dict[int, int] = {}
    for i in rows:
        for j in instance.row(i)[0]:
            uses[int(j)] = uses.get(int(j), 0) + 1
    unique = sorted(j for j, k in uses.items() if k == 1)
    fpos = {j: k for k, j in enumerate(unique)}
    entries = [(pos[i], fpos[j], a) for i, j, a in instance.entries if i in pos and j in fpos]
    if not unique:
        return LinearInstance(len(rows), 1, [], [DiscreteDistribution.point(0.0)])
    return LinearInstance(len(rows), len(unique), entries, [instance.features[j] for j in unique])


class ColSparseMulti(OnlinePolicy):
    """Random groups, each running the bucket algorithm on its own budget.

    Arrivals fall into ceil(s_col / eps_prime) groups uniformly.  Inside a
    group, the Z part of an arrival is its share of the features used by no
    other arrival of that group.  Leftover global budget goes unused.
    """

    def __init__(self, r=1, eps_prime=0.9, epsilon=0.2, oracle_budget=10**5, clamp_epsilon=True,
                 random_state=0):
        self.r = r
        self.eps_prime = eps_prime
        self.epsilon = epsilon
        self.oracle_budget = oracle_budget
        self.clamp_epsilon = clamp_epsilon
        self.random_state = random_state

    @property
    def budget_(self):
        return self.r

    def fit(self, instance: LinearInstance):
        if not 0 < self.eps_prime <= 1:
            raise ValueError(f"eps_prime must lie in (0, 1], got {self.eps_prime}")
        s = max(col_sparsity(instance), 1)
        groups = math.ceil(s / self.eps_prime)
        per_group = math.floor(self.eps_prime * self.r / s)
        if per_group < 1:
            need = math.ceil(s / self.eps_prime)
            raise ValueError(
                f"per-group budget floor({self.eps_prime} * {self.r} / {s}) is 0; "
                f"use r >= {need} or a larger eps_prime"
            )
        label = rng_for(self.random_state, ASSIGNMENT).integers(groups, size=instance.n)
        self.num_groups_ = groups
        self.group_budget_ = per_group
        self.assignment_ = label
        self.groups_ = [np.flatnonzero(label == g) for g in range(groups)]
        self.selectors_ = []
        for g, rows in enumerate(self.groups_):
            if rows.size == 0:
                self.selectors_.append(None)
                continue
            z = _unique_feature_instance(instance, rows)
            sel = BucketSelector(per_group, self.epsilon, self.oracle_budget, self.clamp_epsilon,
                                 derive_seed(self.random_state, g))
            self.selectors_.append(sel.fit(z))
        self.n_arrivals_ = instance.n
        return self

    def select(self, X) -> np.ndarray:
        return self.run(X)[0]

    def run(self, X, start: int = 0):
        """Take mask plus the per-group runs (arrival indices are group-local)."""
        check_is_fitted(self, "groups_")
        X = check_arrivals(X, self.n_arrivals_)
        mask = np.zeros(X.shape, dtype=bool)
        runs = {}
        for g, (rows, sel) in enumerate(zip(self.groups_, self.selectors_)):
            if sel is None:
                continue
            out = sel.run(X[:, rows], start)
            mask[:, rows] = out.take
            runs[g] = out
        return mask, runs

    def transcript(self) -> dict:
        return _jsonable({
            "policy": "col-sparse-multi", "groups": self.num_groups_,
            "group_budget": self.group_budget_, "assignment": self.assignment_,
            "configs": {str(g): s.config_.to_dict() for g, s in enumerate(self.selectors_) if s},
        })


class RowSparseMulti(OnlinePolicy):
    """r uniform buckets, each running the single-slot row-sparse rule."""

    def __init__(self, r=1, random_state=0):
        self.r = r
        self.random_state = random_state

    @property
    def budget_(self):
        return self.r

    def fit(self, instance: LinearInstance, assignment=None):
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if assignment is None:
            assignment = rng_for(self.random_state, ASSIGNMENT).integers(self.r, size=instance.n)
        self.assignment_ = np.asarray(assignment)
        self.buckets_ = [np.flatnonzero(self.assignment_ == b) for b in range(self.r)]
        self.policies_ = []
        for b, rows in enumerate(self.buckets_):
            if rows.size == 0:
                self.policies_.append(None)
                continue
            sub, _ = restrict_rows(instance, rows)
            if sub.m == 0:
                self.policies_.append(ThresholdPolicy(np.inf))
                continue
            self.policies_.append(RowSparsePolicy(random_state=derive_seed(self.random_state, b)).fit(sub))
        self.n_arrivals_ = instance.n
        return self

    def select(self, X) -> np.ndarray:
        check_is_fitted(self, "buckets_")
        X = check_arrivals(X, self.n_arrivals_)
        mask = np.zeros(X.shape, dtype=bool)
        for rows, pol in zip(self.buckets_, self.policies_):
            if pol is not None:
                mask[:, rows] = pol.select(X[:, rows])
        return mask

    def transcript(self) -> dict:
        per_bucket = {}
        for b, (rows, pol) in enumerate(zip(self.buckets_, self.policies_)):
            if pol is None:
                continue
            t = pol.transcript() if isinstance(pol, RowSparsePolicy) else {"tau": pol.threshold_}
            per_bucket[str(b)] = {"arrivals": rows, **t}
        return _jsonable({"policy": "row-sparse-multi", "assignment": self.assignment_,
                          "buckets": per_bucket})


class SmallRColSparse(OnlinePolicy):
    """max(r, s_col) slots, r of them live; each live slot runs a single-slot
    column-sparse rule over all arrivals sent to it, the rest are dropped."""

    def __init__(self, r=1, support_cap=ENUMERATION_CAP, mc_samples=10**5, random_state=0):
        self.r = r
        self.support_cap = support_cap
        self.mc_samples = mc_samples
        self.random_state = random_state

    @property
    def budget_(self):
        return self.r

    def fit(self, instance: LinearInstance, assignment=None):
        if self.r < 1:
            raise ValueError("r must be at least 1")
        self.s_col_ = max(col_sparsity(instance), 1)
        self.num_slots_ = max(self.r, self.s_col_)
        if assignment is None:
            assignment = rng_for(self.random_state, ASSIGNMENT).integers(self.num_slots_, size=instance.n)
        self.assignment_ = np.where(np.asarray(assignment) < self.r, assignment, -1)
        self.buckets_ = [tuple(np.flatnonzero(self.assignment_ == b)) for b in range(self.r)]
        self.policies_ = [
            ColumnSparsePolicy(inclusion_set=S, random_state=derive_seed(self.random_state, b),
                               support_cap=self.support_cap, mc_samples=self.mc_samples).fit(instance)
            for b, S in enumerate(self.buckets_)
        ]
        self.n_arrivals_ = instance.n
        return self

    def select(self, X) -> np.ndarray:
        check_is_fitted(self, "policies_")
        X = check_arrivals(X, self.n_arrivals_)
        mask = np.zeros(X.shape, dtype=bool)
        for pol in self.policies_:
            mask |= pol.select(X)
        return mask

    def transcript(self) -> dict:
        return _jsonable({
            "policy": "small-r-col-sparse", "slots": self.num_slots_, "assignment": self.assignment_,
            "buckets": {str(b): p.transcript() for b, p in enumerate(self.policies_)},
        })


def col_sparse_multi(instance, r, eps_prime, seed=0, **kwargs) -> ColSparseMulti:
    return ColSparseMulti(r, eps_prime, random_state=seed, **kwargs).fit(instance)


def row_sparse_multi(instance, r, seed=0) -> RowSparseMulti:
    return RowSparseMulti(r, seed).fit(instance)


def small_r_col_sparse(instance, r, seed=0, **kwargs) -> SmallRColSparse:
    return SmallRColSparse(r, random_state=seed, **kwargs).fit(instance)


def small_r_exact_value(instance: LinearInstance, r: int, support_cap=ENUMERATION_CAP,
                        max_arrivals: int = 16) -> Estimate:
    """Exact E[ALG] over values and slot assignments.

    A slot's contribution depends only on which arrivals it received, the
    slots are exchangeable, and each arrival lands in a given slot with
    probability 1/max(r, s_col); so E[ALG] = r * sum_S Pr[slot = S] * V(S).
    """
    if instance.n > max_arrivals:
        raise SupportExplosionError(f"2^{instance.n} slot contents exceed the enumeration limit")
    table = as_table(instance, support_cap)
    p = 1.0 / max(r, max(col_sparsity(instance), 1))
    total = 0.0
    for bits in itertools.product((0, 1), repeat=instance.n):
        S = tuple(i for i, b in enumerate(bits) if b)
        if not S:
            continue
        weight = p ** len(S) * (1 - p) ** (instance.n - len(S))
        pol = ColumnSparsePolicy(inclusion_set=S, support_cap=support_cap).fit(instance)
        total += weight * exact_policy_value(table, pol).mean
    return Estimate.exact_value(r * total)
