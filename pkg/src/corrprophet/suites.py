"""Canned reproduction suites: each yields rows of (check, measured, bound,
margin, verdict).  Exact checks use a 1e-9 margin, Monte Carlo checks four
standard errors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .augmented import AugmentedStream, adversary_suite, exact_augmented_value, run_augmented
from .corpus import (
    small_r_corpus,
    na_multisets,
    smoke_corpus,
    sparse_corpus,
    unweighted_corpus,
)
from .distributions import DiscreteDistribution, SupportExplosionError, tower_feature
from .harness import ALGORITHMS, ExperimentSpec, fit_algorithm, run_experiment
from .model import (
    PermutationSampler,
    col_sparsity,
    gen_tower2,
    gen_tower_general,
    independent_instance,
    normalize_columns,
    row_sparsity,
)
from .multi_item import (
    BucketSelector,
    ColSparseMulti,
    RowSparseMulti,
    check_bucket_invariants,
    compute_bucket_config,
    run_bucket_algorithm,
    small_r_exact_value,
)
from .oracle import (
    BRUTE_FORCE_CAP,
    as_table,
    best_fixed_threshold,
    brute_force_online_optimum,
    exact_mixture_value,
    exact_online_optimum,
    exact_policy_value,
    exact_prophet_value,
    mc_value,
)
from .seeding import derive_seed
from .single_item import (
    HalfMaxPolicy,
    MedianPolicy,
    NAThresholdPolicy,
    RepresentativeSampler,
    RowSparsePolicy,
    UnweightedPolicy,
    col_sparse_fits,
    row_sparse_fits,
)

EXACT_MARGIN = 1e-9
SIGMAS = 4.0
_SENSES = {
    "<=": lambda x, b, m: x <= b + m,
    ">=": lambda x, b, m: x >= b - m,
    "<": lambda x, b, m: x < b - m,
}


@dataclass(frozen=True)
class Check:
    check_id: str
    measured: float
    bound: float
    margin: float
    sense: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(_SENSES[self.sense](self.measured, self.bound, self.margin))

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def row(self) -> dict:
        return {
            "check_id": self.check_id,
            "measured": f"{self.measured:.17g}",
            "sense": self.sense,
            "bound": f"{self.bound:.17g}",
            "margin": f"{self.margin:.17g}",
            "verdict": self.verdict,
            "note": self.note,
        }


def _at_most(cid, measured, bound, margin=EXACT_MARGIN, note=""):
    return Check(cid, float(measured), float(bound), float(margin), "<=", note)


def _at_least(cid, measured, bound, margin=EXACT_MARGIN, note=""):
    return Check(cid, float(measured), float(bound), float(margin), ">=", note)


def fixed_threshold_failure(scale="full"):
    n = 20 if scale == "full" else 8
    table = as_table(gen_tower2(n, 1 / 40))
    tau, best = best_fixed_threshold(table)
    return [
        _at_most(f"tower2-n{n}-best-fixed-threshold", best.mean, 3.0, note=f"tau={tau}"),
        _at_least(f"tower2-n{n}-prophet", exact_prophet_value(table).mean, n / 2),
    ]


def tower_hardness(scale="full"):
    eps = 1e-3
    inst = gen_tower_general(5, eps)
    return [
        _at_most("tower-c5-online-optimum", exact_online_optimum(inst).mean, 1 / (1 - eps) ** 2, 1e-6),
        _at_least("tower-c5-prophet", exact_prophet_value(inst).mean, 4.975),
    ]


def augmentation_families() -> dict[str, list[DiscreteDistribution]]:
    return {
        "bernoulli-100": [DiscreteDistribution.bernoulli(0.001)] * 100,
        "tower-10": [tower_feature(0.05, i + 1) for i in range(10)],
    }


def augmentation_single(scale="full"):
    samples = 10**6 if scale == "full" else 2 * 10**4
    rows = []
    for fam, z in augmentation_families().items():
        policy = HalfMaxPolicy().fit(z)
        half = policy.threshold_
        for k, (name, adv) in enumerate(adversary_suite(half).items()):
            stream = AugmentedStream(z, adv)
            alg = run_augmented(stream, policy, samples, seed=derive_seed(11, k)).alg
            note = f"monte carlo {alg.mean:.6g} +- {alg.std_error:.3g} over {samples} draws"
            try:
                exact, _ = exact_augmented_value(stream, policy)
            except SupportExplosionError:
                rows.append(_at_least(f"{fam}-{name}", alg.mean, half, SIGMAS * alg.std_error))
                continue
            # heavy tails put most of E[ALG] on events rarer than 1/samples,
            # so the enumerable families are judged on the exact value
            rows.append(_at_least(f"{fam}-{name}-exact", exact.mean, half, note=note))
    return rows


def median_failure(scale="full"):
    samples = 10**6 if scale == "full" else 10**5
    z = [DiscreteDistribution.bernoulli(1e-3)] * 100
    policy = MedianPolicy(strict=True).fit(z)
    adv = adversary_suite(policy.threshold_, delta=1e-6)["tiny-boost-first"]
    res = run_augmented(AugmentedStream(z, adv), policy, samples, seed=4)
    alg, bench = res.alg, res.benchmark
    pessimistic = (bench.mean - SIGMAS * bench.std_error) / (alg.mean + SIGMAS * alg.std_error)
    return [_at_least("median-strict-tiny-boost-ratio", bench.mean / alg.mean, 50.0, 0.0,
                      note=f"pessimistic 4-sigma ratio {pessimistic:.4g}")]


def _corpus(scale):
    return sparse_corpus() if scale == "full" else sparse_corpus()[::4]


def col_sparse_ratio(scale="full"):
    rows = []
    for name, inst in _corpus(scale):
        s = col_sparsity(inst)
        alg = exact_mixture_value(inst, col_sparse_fits(inst)).mean
        bench = exact_prophet_value(inst).mean
        rows.append(_at_most(f"{name}-col-sparse-ratio", bench / alg, 2 * math.e * s))
        if s == 1:
            rows.append(_at_least(f"{name}-classic-half", alg, 0.5 * bench))
    return rows


def row_sparse_construction(scale="full"):
    draws = 10**5 if scale == "full" else 10**4
    rows = []
    for k, (name, inst) in enumerate(_corpus(scale)):
        sampler = RepresentativeSampler(normalize_columns(inst))
        s = sampler.s_row
        T = sampler.sample_many(draws, seed=derive_seed(21, k))
        rows.append(_at_most(f"{name}-independence-violations",
                             int(sampler.independence_violations(T).sum()), 0, 0.0))
        rows.append(_at_most(f"{name}-peeling-max-in-degree",
                             max(sampler.peeling_in_degrees(), default=0), s - 1, 0.0))
        freq = T.mean(axis=0)
        se = np.sqrt(freq * (1 - freq) / draws)
        slack = freq - (1 / (math.e**2 * s) - SIGMAS * se)
        worst = int(np.argmin(slack))
        rows.append(_at_least(f"{name}-min-inclusion-rate", freq[worst], 1 / (math.e**2 * s),
                              SIGMAS * se[worst], note=f"feature {worst}"))
        alg = exact_mixture_value(inst, row_sparse_fits(inst)).mean
        rows.append(_at_most(f"{name}-row-sparse-ratio", exact_prophet_value(inst).mean / alg,
                             2 * math.e**3 * row_sparsity(inst)))
    return rows


def uniform_z(support: int = 10) -> DiscreteDistribution:
    return DiscreteDistribution.from_pairs([(k, 1 / support) for k in range(1, support + 1)])


def multi_bucket_invariants(scale="full"):
    trials = 10**5 if scale == "full" else 5 * 10**3
    rows = []
    z = [uniform_z()] * 40
    config = compute_bucket_config(z, 8, 0.2, clamp_epsilon=False)
    # aim the adversaries at the bucket that holds mid-range values
    target = float(config.thresholds[min(config.last_level, int(config.bucket_of(np.array([5.0]))[0]))])
    for k, (name, adv) in enumerate(adversary_suite(target).items()):
        run = run_bucket_algorithm(config, AugmentedStream(z, adv), seed=derive_seed(31, k), num_trials=trials)
        try:
            check_bucket_invariants(config, run)
            broken = 0
        except AssertionError:
            broken = 1
        rows.append(_at_most(f"bucket-invariants-{name}", broken, 0, 0.0,
                             note=f"most kept {int(run.take.sum(axis=1).max())} of r={config.r}"))

    inst = independent_instance([uniform_z()] * 12)
    X = inst.sampler().sample(7, 2000)
    multi = ColSparseMulti(r=4, eps_prime=1.0, epsilon=0.3, clamp_epsilon=False, random_state=5).fit(inst)
    _, runs = multi.run(X)
    plain = compute_bucket_config(inst, 4, 0.3, seed=derive_seed(5, 0), clamp_epsilon=False)
    direct = run_bucket_algorithm(plain, X, seed=derive_seed(5, 0))
    equal = multi.selectors_[0].config_.to_dict() == plain.to_dict() and all(
        runs[0].transcript(t) == direct.transcript(t) for t in range(X.shape[0])
    )
    rows.append(_at_most("col-sparse-multi-equals-bucket", 0 if equal else 1, 0, 0.0))

    sparse = sparse_corpus()[6][1]
    Xs = sparse.sampler().sample(8, 2000)
    a = RowSparseMulti(r=1, random_state=9).fit(sparse)
    b = RowSparsePolicy(random_state=derive_seed(9, 0)).fit(sparse)
    equal = bool((a.select(Xs) == b.select(Xs)).all()) and (
        a.policies_[0].construction_.to_dict() == b.construction_.to_dict()
    )
    rows.append(_at_most("row-sparse-multi-equals-row-sparse", 0 if equal else 1, 0, 0.0))
    return rows


def multi_trend(scale="full"):
    rs = (10, 100, 1000) if scale == "full" else (10, 40, 160)
    trials = 10**4 if scale == "full" else 2000
    ratios = []
    for r in rs:
        z = [uniform_z()] * (5 * r)
        sel = BucketSelector(r, 0.2, oracle_budget=10**4, clamp_epsilon=False, random_state=r).fit(z)
        res = run_augmented(AugmentedStream(z), sel, trials, seed=derive_seed(41, r), r=r)
        ratios.append(res.benchmark.mean / res.alg.mean)
    return [
        Check(f"bucket-ratio-decreases-r{r0}-to-r{r1}", b, a, 0.0, "<", f"ratio at r={r0} is {a:.6g}")
        for r0, r1, a, b in zip(rs, rs[1:], ratios, ratios[1:])
    ]


def unweighted_threshold(scale="full"):
    rows = []
    for name, inst in unweighted_corpus():
        pol = UnweightedPolicy().fit(inst)
        alg = exact_policy_value(inst, pol).mean
        bench = exact_prophet_value(inst).mean
        ratio = bench / alg if alg > 0 else (math.inf if bench > 0 else 1.0)
        rows.append(_at_most(f"{name}-unweighted-ratio", ratio, 40.0, note=f"chose {pol.thresholds_.chosen_name}"))
    return rows


def na_permutations(scale="full"):
    size = 6 if scale == "full" else 4
    worst_gap = math.inf
    count = 0
    for values in na_multisets(size):
        sampler = PermutationSampler(values)
        pol = NAThresholdPolicy().fit(sampler)
        X, _ = sampler.scenarios()
        worst_gap = min(worst_gap, float((pol.reward(X) - pol.threshold_).min()))
        count += 1
    return [_at_least(f"na-permutations-{count}-multisets-min-gap", worst_gap, 0.0, 0.0)]


def small_r_ratio(scale="full"):
    rows = []
    for name, inst, r in small_r_corpus():
        s = col_sparsity(inst)
        ratio = exact_prophet_value(inst, r).mean / small_r_exact_value(inst, r).mean
        rows.append(_at_most(f"{name}-small-r-ratio", ratio, 2 * math.e**2 * max(1.0, s / r)))
    return rows


def smoke_spec(name: str, inst, num_samples: int, seed: int = 0, oracle: str = "auto") -> ExperimentSpec:
    """Parameters that make every registered algorithm legal on ``inst``."""
    params, r = {}, 1
    if name in ("bucket", "row-sparse-multi", "small-r-col-sparse"):
        r = 2
    if name == "col-sparse-multi":
        params = {"eps_prime": 1.0}
        r = max(2, col_sparsity(inst))
    return ExperimentSpec({"instance": inst.to_dict()}, name, params, r, num_samples, seed, oracle)


def oracle_consistency(scale="full"):
    rows = []
    candidates = [("tower2-3", gen_tower2(3, 0.1)), ("tower-3", gen_tower_general(3, 0.1)),
                  ("tower-4", gen_tower_general(4, 0.05))]
    candidates += [(n, i) for n, i in sparse_corpus() + unweighted_corpus() if i.support_size <= 2**10]
    for name, inst in candidates:
        try:
            brute = brute_force_online_optimum(inst, cap=2**10, policy_cap=BRUTE_FORCE_CAP)
        except SupportExplosionError:
            continue
        rows.append(_at_most(f"{name}-dp-vs-brute-force", abs(exact_online_optimum(inst).mean - brute.mean), 0.0))
    samples = 2 * 10**4 if scale == "full" else 4000
    for name, inst in smoke_corpus():
        for k, (algo, meta) in enumerate(ALGORITHMS.items()):
            if not meta.applies(inst):
                continue
            if not meta.randomized:
                spec = smoke_spec(algo, inst, samples)
                pol = fit_algorithm(algo, inst, spec.params, spec.r, spec.seed)
                exact = exact_policy_value(inst, pol).mean
                est = mc_value(inst.sampler(), pol, spec.r, samples, seed=derive_seed(51, k))
                rows.append(_at_most(f"{name}-{algo}-mc-bracket", abs(est.mean - exact), 0.0,
                                     SIGMAS * est.std_error + EXACT_MARGIN))
            rep = run_experiment(smoke_spec(algo, inst, 2000))
            rows.append(_at_least(f"{name}-{algo}-smoke-ratio", rep.ratio, 1.0,
                                  SIGMAS * rep.ratio_std_error + EXACT_MARGIN))
    return rows


SUITES: dict[str, Callable[[str], list[Check]]] = {
    "fixed-threshold-failure": fixed_threshold_failure,
    "tower-hardness": tower_hardness,
    "augmentation-single": augmentation_single,
    "median-failure": median_failure,
    "col-sparse-ratio": col_sparse_ratio,
    "row-sparse-construction": row_sparse_construction,
    "multi-bucket-invariants": multi_bucket_invariants,
    "multi-trend": multi_trend,
    "unweighted-threshold": unweighted_threshold,
    "na-permutations": na_permutations,
    "small-r-ratio": small_r_ratio,
    "oracle-consistency": oracle_consistency,
}


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows(self) -> list[dict]:
        return [{"suite": self.suite, **c.row()} for c in self.checks]


# names the reproduction interface also accepts
SUITE_ALIASES = {
    "appendix-a": "unweighted-threshold",
    "appendix-b": "na-permutations",
    "appendix-c": "small-r-ratio",
}


def reproduce(suite_name: str, scale: str = "full") -> SuiteResult:
    suite_name = SUITE_ALIASES.get(suite_name, suite_name)
    if suite_name not in SUITES:
        raise ValueError(f"unknown suite {suite_name!r}; choose from {sorted(SUITES)}")
    if scale not in ("full", "quick"):
        raise ValueError("scale must be 'full' or 'quick'")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        checks = SUITES[suite_name](scale)
    return SuiteResult(suite_name, checks)
