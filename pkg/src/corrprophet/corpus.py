"""Fixed instance families used by the reproduction suites and the smoke matrix."""

from __future__ import annotations

import itertools

from .distributions import DiscreteDistribution, tower_feature
from .model import (
    FeatureSpec,
    LinearInstance,
    col_sparsity,
    gen_random_sparse,
    gen_tower2,
    gen_tower_general,
    gen_unweighted,
    independent_instance,
    row_sparsity,
)


def exact_sparse(n, m, s_row, s_col, spec=None, first_seed=0, tries=1000) -> LinearInstance:
    """First seeded random instance whose sparsities equal the targets exactly."""
    for seed in range(first_seed, first_seed + tries):
        inst = gen_random_sparse(n, m, s_row, s_col, spec, seed=seed)
        if col_sparsity(inst) == s_col and row_sparsity(inst) == s_row:
            return inst
    raise RuntimeError(f"no instance with s_row={s_row}, s_col={s_col} in {tries} seeds")


def sparse_corpus() -> list[tuple[str, LinearInstance]]:
    """Twenty small random instances, four for each s_col in 1..5."""
    out = []
    for s_col in range(1, 6):
        # one feature per arrival leaves too few spare slots for wide columns
        row_targets = (1, 2, 3, 2) if s_col <= 3 else (2, 3, 2, 3)
        for k, s_row in enumerate(row_targets):
            inst = exact_sparse(8, 6, s_row, s_col, first_seed=100 * s_col + 10 * k)
            out.append((f"sparse-c{s_col}-r{s_row}-{k}", inst))
    return out


def small_r_corpus() -> list[tuple[str, LinearInstance, int]]:
    out = []
    for s_col, r in ((2, 1), (4, 2), (4, 4)):
        for k in range(2):
            inst = exact_sparse(7, 7, 2, s_col, first_seed=1000 + 50 * s_col + 10 * r + k * 3)
            out.append((f"smallr-c{s_col}-r{r}-{k}", inst, r))
    return out


def unweighted_corpus() -> list[tuple[str, LinearInstance]]:
    """Ten 0/1 instances: nested tower-like sets, disjoint sets, overlaps."""
    out = []
    for c, eps in ((3, 0.1), (4, 0.05), (5, 0.1)):
        sets = [list(range(i, c)) for i in range(c)]
        out.append((f"nested-tower-{c}", gen_unweighted(c, c, sets, [tower_feature(eps, j + 1) for j in range(c)])))
    out.append(("disjoint-rare-10", gen_unweighted(
        10, 10, [[i] for i in range(10)], [DiscreteDistribution.bernoulli(0.01)] * 10)))
    out.append(("pairs-tower-6", gen_unweighted(
        6, 6, [[i, (i + 1) % 6] for i in range(6)], [tower_feature(0.2, j % 3 + 1) for j in range(6)])))
    out.append(("star-5", gen_unweighted(
        5, 5, [[0, i] for i in range(1, 5)] + [[0]], [tower_feature(0.1, 2)] + [DiscreteDistribution.bernoulli(0.5)] * 4)))
    out.append(("heavy-common", gen_unweighted(
        4, 3, [[0, 1], [0, 2], [1, 2], [0, 1, 2]], [DiscreteDistribution.from_pairs([(0, 0.9), (50, 0.1)])] * 3)))
    ones = FeatureSpec(support_size=3, max_value=50.0, coefficient="ones")
    for k, (s_row, s_col) in enumerate(((2, 2), (3, 2), (2, 3))):
        out.append((f"random-01-{k}", exact_sparse(7, 7, s_row, s_col, ones, first_seed=2000 + 20 * k)))
    return out


def na_multisets(max_size: int = 6, alphabet=(0.0, 1.0, 2.0, 5.0)):
    """Every multiset over ``alphabet`` with 1..max_size elements."""
    for size in range(1, max_size + 1):
        yield from itertools.combinations_with_replacement(alphabet, size)


def smoke_corpus() -> list[tuple[str, LinearInstance]]:
    """Small instances every registered algorithm must handle."""
    bern = DiscreteDistribution.from_pairs([(0.0, 0.6), (1.0, 0.3), (4.0, 0.1)])
    return [
        ("tower2-3", gen_tower2(3, 0.1)),
        ("tower-3", gen_tower_general(3, 0.1)),
        ("independent-5", independent_instance([bern] * 5)),
        *sparse_corpus()[::5],
        *unweighted_corpus()[::3],
    ]
