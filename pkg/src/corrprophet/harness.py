"""Experiment specs, reports and the algorithm registry."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .distributions import DiscreteDistribution, SupportExplosionError
from .model import (
    FeatureSpec,
    JointSampler,
    LinearInstance,
    PermutationSampler,
    col_sparsity,
    gen_random_sparse,
    gen_tower2,
    gen_tower_general,
    gen_unweighted,
    independent_instance,
    row_sparsity,
)
from .multi_item import BucketSelector, ColSparseMulti, RowSparseMulti, SmallRColSparse, small_r_exact_value
from .oracle import (
    DP_CAP,
    ENUMERATION_CAP,
    Estimate,
    as_table,
    exact_mixture_value,
    exact_online_optimum,
    exact_policy_value,
    exact_prophet_value,
    mc_prophet_value,
    mc_value,
    threshold_values,
)
from .seeding import OUTER, derive_seed
from .single_item import (
    ColumnSparsePolicy,
    NAThresholdPolicy,
    ProphetHalfPolicy,
    RowSparsePolicy,
    ThresholdPolicy,
    UnweightedPolicy,
    col_sparse_fits,
    row_sparse_fits,
)

ORACLE_MODES = ("exact", "mc", "auto")


def _dist(pairs) -> DiscreteDistribution:
    return DiscreteDistribution.from_pairs(pairs)


GENERATORS: dict[str, Callable[..., LinearInstance | JointSampler]] = {
    "tower2": lambda n, eps: gen_tower2(int(n), float(eps)),
    "tower": lambda c, eps: gen_tower_general(int(c), float(eps)),
    "random-sparse": lambda n, m, s_row, s_col, seed=0, support_size=2, max_value=100.0: gen_random_sparse(
        int(n), int(m), int(s_row), int(s_col), FeatureSpec(int(support_size), float(max_value)), seed=seed
    ),
    "independent": lambda dists: independent_instance([_dist(d) for d in dists]),
    "unweighted": lambda n, m, sets, features: gen_unweighted(int(n), int(m), sets, [_dist(f) for f in features]),
    "permutation": lambda values: PermutationSampler(values),
}


def build_source(source: dict):
    """Instance (or joint sampler) from ``{"instance": {...}}`` or
    ``{"generator": name, "params": {...}}``."""
    if "instance" in source:
        return LinearInstance.from_dict(source["instance"])
    name = source.get("generator")
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[name](**source.get("params", {}))


@dataclass(frozen=True)
class Algorithm:
    """How to fit one registered algorithm and, if possible, evaluate it exactly."""

    make: Callable[[dict, int, int], object]
    exact: Callable[[object, dict, int, int], Estimate] | None = None
    randomized: bool = False
    needs_instance: bool = True
    applies: Callable[[object], bool] = lambda source: True


def _fit_threshold(source, params, r, seed):
    return ThresholdPolicy(float(params.get("tau", 0.0)), params.get("inclusion_set"), bool(params.get("strict", False)))


def _fit_half_max(source, params, r, seed):
    if isinstance(source, LinearInstance):
        return ProphetHalfPolicy(random_state=seed).fit(source)
    return NAThresholdPolicy(int(params.get("mc_samples", 10**5)), seed).fit(source)


ALGORITHMS: dict[str, Algorithm] = {
    "threshold": Algorithm(_fit_threshold, needs_instance=False),
    "half-max": Algorithm(_fit_half_max, needs_instance=False),
    "na-threshold": Algorithm(
        lambda src, p, r, seed: NAThresholdPolicy(int(p.get("mc_samples", 10**5)), seed).fit(
            src.sampler() if isinstance(src, LinearInstance) else src
        ),
        needs_instance=False,
    ),
    "col-sparse": Algorithm(
        lambda src, p, r, seed: ColumnSparsePolicy(random_state=seed).fit(src),
        exact=lambda src, p, r, seed: exact_mixture_value(src, col_sparse_fits(src)),
        randomized=True,
    ),
    "row-sparse": Algorithm(
        lambda src, p, r, seed: RowSparsePolicy(random_state=seed).fit(src),
        exact=lambda src, p, r, seed: exact_mixture_value(src, row_sparse_fits(src)),
        randomized=True,
    ),
    "unweighted": Algorithm(
        lambda src, p, r, seed: UnweightedPolicy(random_state=seed).fit(src),
        applies=lambda src: isinstance(src, LinearInstance) and bool(np.all(src.vals == 1.0)),
    ),
    "bucket": Algorithm(
        lambda src, p, r, seed: BucketSelector(
            r, float(p.get("epsilon", 0.2)), int(p.get("oracle_budget", 10**4)),
            bool(p.get("clamp_epsilon", True)), seed,
        ).fit(src),
        randomized=True,
    ),
    "col-sparse-multi": Algorithm(
        lambda src, p, r, seed: ColSparseMulti(
            r, float(p.get("eps_prime", 0.9)), float(p.get("epsilon", 0.2)),
            int(p.get("oracle_budget", 10**4)), bool(p.get("clamp_epsilon", True)), seed,
        ).fit(src),
        randomized=True,
    ),
    "row-sparse-multi": Algorithm(lambda src, p, r, seed: RowSparseMulti(r, seed).fit(src), randomized=True),
    "small-r-col-sparse": Algorithm(
        lambda src, p, r, seed: SmallRColSparse(r, random_state=seed).fit(src),
        exact=lambda src, p, r, seed: small_r_exact_value(src, r),
        randomized=True,
    ),
}


def fit_algorithm(name: str, source, params: dict | None = None, r: int = 1, seed=0):
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    algo = ALGORITHMS[name]
    if algo.needs_instance and not isinstance(source, LinearInstance):
        raise ValueError(f"algorithm {name!r} needs a linear instance")
    if not algo.applies(source):
        raise ValueError(f"algorithm {name!r} does not apply to this instance")
    return algo.make(source, params or {}, r, seed)


@dataclass
class ExperimentSpec:
    source: dict
    algorithm: str
    params: dict = field(default_factory=dict)
    r: int = 1
    num_samples: int = 10**5
    seed: int = 0
    oracle: str = "auto"
    fits: int = 32
    online_opt: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(ALGORITHMS)}")
        if self.num_samples < 1:
            raise ValueError("num_samples must be at least 1")
        if self.oracle not in ORACLE_MODES:
            raise ValueError(f"oracle mode must be one of {ORACLE_MODES}")
        if self.r < 1 or self.fits < 1:
            raise ValueError("r and fits must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def ratio_estimate(benchmark: Estimate, alg: Estimate) -> tuple[float, float]:
    """benchmark / alg with a first-order (delta method) standard error."""
    if alg.mean <= 0:
        return (math.inf if benchmark.mean > 0 else 1.0), math.inf
    ratio = benchmark.mean / alg.mean
    rel = 0.0
    if benchmark.mean > 0:
        rel += (benchmark.std_error / benchmark.mean) ** 2
    rel += (alg.std_error / alg.mean) ** 2
    return ratio, ratio * math.sqrt(rel)


_ESTIMATE_FIELDS = ("mean", "std_error", "num_samples", "exact")


@dataclass
class ExperimentReport:
    alg: Estimate
    benchmark: Estimate
    online_opt: Estimate | None
    ratio: float
    ratio_std_error: float
    metadata: dict
    wall_time: float = 0.0

    @property
    def reliable(self) -> bool:
        return self.alg.reliable and self.benchmark.reliable

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "alg": self.alg.to_dict(),
            "benchmark": self.benchmark.to_dict(),
            "online_opt": None if self.online_opt is None else self.online_opt.to_dict(),
            "ratio": self.ratio,
            "ratio_std_error": self.ratio_std_error,
            "reliable": self.reliable,
            "metadata": self.metadata,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)

    def csv_row(self) -> dict:
        row = {}
        for key in ("alg", "benchmark", "online_opt"):
            est = getattr(self, key)
            for f in _ESTIMATE_FIELDS:
                row[f"{key}_{f}"] = "" if est is None else _fmt(getattr(est, f))
        row["ratio"] = _fmt(self.ratio)
        row["ratio_std_error"] = _fmt(self.ratio_std_error)
        row["metadata"] = json.dumps(self.metadata, sort_keys=True)
        return row

    def to_csv(self) -> str:
        return write_csv([self.csv_row()])

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        (row,) = read_csv(text)
        ests = {}
        for key in ("alg", "benchmark", "online_opt"):
            if row[f"{key}_mean"] == "":
                ests[key] = None
                continue
            ests[key] = Estimate(
                float(row[f"{key}_mean"]), float(row[f"{key}_std_error"]),
                int(row[f"{key}_num_samples"]), row[f"{key}_exact"] == "True",
            )
        return cls(ests["alg"], ests["benchmark"], ests["online_opt"], float(row["ratio"]),
                   float(row["ratio_std_error"]), json.loads(row["metadata"]))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def _use_exact(mode: str, source, cap=ENUMERATION_CAP) -> bool:
    if mode == "mc":
        return False
    try:
        as_table(source, cap)
        return True
    except SupportExplosionError:
        if mode == "exact":
            raise
        return False


def _sampler(source) -> JointSampler:
    return source.sampler() if isinstance(source, LinearInstance) else source


def evaluate_alg(spec: ExperimentSpec, source, exact: bool) -> Estimate:
    algo = ALGORITHMS[spec.algorithm]
    if exact:
        if algo.exact is not None:
            try:
                return algo.exact(source, spec.params, spec.r, spec.seed)
            except SupportExplosionError:
                if spec.oracle == "exact":
                    raise
        elif not algo.randomized:
            policy = fit_algorithm(spec.algorithm, source, spec.params, spec.r, spec.seed)
            return exact_policy_value(source, policy)
        elif spec.oracle == "exact":
            raise SupportExplosionError(
                f"{spec.algorithm!r} uses per-trial randomness and has no exact evaluation"
            )
    sampler = _sampler(source)
    if not algo.randomized:
        policy = fit_algorithm(spec.algorithm, source, spec.params, spec.r, spec.seed)
        return mc_value(sampler, policy, spec.r, spec.num_samples, spec.seed)
    # average over independently fitted copies so internal randomness is sampled too
    fits = min(spec.fits, spec.num_samples)
    per_fit = [spec.num_samples // fits + (1 if k < spec.num_samples % fits else 0) for k in range(fits)]
    means, total = [], 0.0
    for k, count in enumerate(per_fit):
        policy = fit_algorithm(spec.algorithm, source, spec.params, spec.r, derive_seed(spec.seed, OUTER, k))
        v = policy.reward(sampler.sample(derive_seed(spec.seed, OUTER, k, 1), count))
        total += float(v.sum())
        means.append(float(v.mean()))
    mean = total / spec.num_samples
    if fits < 2:
        return Estimate(mean, math.inf, spec.num_samples)
    se = float(np.std(means, ddof=1) / math.sqrt(fits))
    return Estimate(mean, se, spec.num_samples)


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    started = time.perf_counter()
    source = build_source(spec.source)
    exact = _use_exact(spec.oracle, source)
    alg = evaluate_alg(spec, source, exact)
    if exact:
        bench = exact_prophet_value(source, spec.r)
    else:
        bench = mc_prophet_value(_sampler(source), spec.r, spec.num_samples, spec.seed)
    online = None
    if spec.online_opt:
        online = exact_online_optimum(source, spec.r, DP_CAP)
    ratio, ratio_se = ratio_estimate(bench, alg)
    meta = {"spec": spec.to_dict(), "oracle_path": "exact" if exact else "mc"}
    if isinstance(source, LinearInstance):
        meta.update(n=source.n, m=source.m, s_row=row_sparsity(source), s_col=col_sparsity(source))
    return ExperimentReport(alg, bench, online, ratio, ratio_se, meta, time.perf_counter() - started)


def scan_thresholds(source, thresholds=None, mode: str = "auto", num_samples: int = 10**5,
                    seed=0) -> list[tuple[float, Estimate]]:
    """E[take first X_i >= tau] for each tau; defaults to every achievable value plus +inf."""
    exact = _use_exact(mode, source)
    if thresholds is None:
        if not exact:
            raise ValueError("the achievable-value grid needs exact enumeration; pass thresholds")
        thresholds = np.concatenate([np.unique(as_table(source).X), [np.inf]])
    thresholds = np.asarray(thresholds, dtype=float)
    if exact:
        return [(float(t), Estimate.exact_value(v)) for t, v in zip(thresholds, threshold_values(source, thresholds))]
    sampler = _sampler(source)
    return [(float(t), mc_value(sampler, ThresholdPolicy(t), 1, num_samples, seed)) for t in thresholds]


def scan_csv(rows: list[tuple[float, Estimate]]) -> str:
    return write_csv([
        {"tau": _fmt(t), "value": _fmt(e.mean), "std_error": _fmt(e.std_error), "exact": str(e.exact)}
        for t, e in rows
    ])
