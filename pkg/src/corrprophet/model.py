"""Linearly correlated instances X = A @ Y, joint samplers and generators."""

from __future__ import annotations

import itertools
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import DiscreteDistribution, tower_feature
from .seeding import BLOCK_SIZE, Y_DRAWS, blocks, rng_for

# x values are rounded to this many mantissa bits after the canonical sum so
# scenarios that agree up to rounding noise produce identical observations
X_MANTISSA_BITS = 40


def snap(x: np.ndarray, bits: int | None = X_MANTISSA_BITS) -> np.ndarray:
    if bits is None:
        return x
    mant, expo = np.frexp(x)
    return np.ldexp(np.round(mant * 2.0**bits) / 2.0**bits, expo)


class LinearInstance:
    """Sparse nonnegative matrix ``A`` (n x m) with independent features.

    Entries are kept as coordinate triples sorted by (row, column), with a
    row-major view (``row_ptr``) and a column-major view (``col_order``).
    Instances are immutable.
    """

    def __init__(self, n: int, m: int, entries, features: Sequence[DiscreteDistribution]):
        n, m = int(n), int(m)
        if n < 1 or m < 0:
            raise ValueError("need n >= 1 arrivals and m >= 0 features")
        features = tuple(features)
        if len(features) != m:
            raise ValueError(f"expected {m} feature distributions, got {len(features)}")
        for f in features:
            if not isinstance(f, DiscreteDistribution):
                raise TypeError("features must be DiscreteDistribution instances")
        triples = sorted((int(i), int(j), float(a)) for i, j, a in entries)
        seen = set()
        for i, j, a in triples:
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError(f"entry ({i}, {j}) out of range for a {n}x{m} matrix")
            if not (a > 0 and math.isfinite(a)):
                raise ValueError(f"entry ({i}, {j}) must be positive and finite, got {a}")
            if (i, j) in seen:
                raise ValueError(f"duplicate entry ({i}, {j})")
            seen.add((i, j))
        self.n, self.m = n, m
        self.features = features
        self.rows = np.array([t[0] for t in triples], dtype=np.int64)
        self.cols = np.array([t[1] for t in triples], dtype=np.int64)
        self.vals = np.array([t[2] for t in triples], dtype=float)
        self.row_ptr = np.searchsorted(self.rows, np.arange(n + 1))
        self.col_order = np.lexsort((self.rows, self.cols))
        self.col_ptr = np.searchsorted(self.cols[self.col_order], np.arange(m + 1))
        for arr in (self.rows, self.cols, self.vals, self.row_ptr, self.col_order, self.col_ptr):
            arr.flags.writeable = False

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(a)) for i, j, a in zip(self.rows, self.cols, self.vals)]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(feature indices, coefficients) of arrival ``i``."""
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.cols[lo:hi], self.vals[lo:hi]

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(arrival indices, coefficients) of feature ``j``."""
        idx = self.col_order[self.col_ptr[j] : self.col_ptr[j + 1]]
        return self.rows[idx], self.vals[idx]

    def dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.m))
        A[self.rows, self.cols] = self.vals
        return A

    @property
    def support_size(self) -> int:
        return math.prod(f.size for f in self.features)

    def compute_x(self, Y: np.ndarray) -> np.ndarray:
        """Arrival values for feature draws ``Y`` (rows are realizations).

        Summation order is fixed (row-major, ascending feature index), then
        the result is snapped to ``X_MANTISSA_BITS``.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        X = np.zeros((Y.shape[0], self.n))
        for i, j, a in zip(self.rows, self.cols, self.vals):
            X[:, i] += a * Y[:, j]
        return snap(X)

    def sample_y(self, rng: np.random.Generator, size: int) -> np.ndarray:
        U = rng.random((size, self.m))
        Y = np.empty((size, self.m))
        for j, f in enumerate(self.features):
            Y[:, j] = f.sample(U[:, j])
        return Y

    def realize(self, seed, index: int) -> "Realization":
        return InstanceSampler(self).realization(seed, index)

    def sampler(self) -> "InstanceSampler":
        return InstanceSampler(self)

    def __eq__(self, other):
        if not isinstance(other, LinearInstance):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and self.entries == other.entries
            and self.features == other.features
        )

    def __repr__(self):
        return f"LinearInstance(n={self.n}, m={self.m}, nnz={self.vals.size})"

    # JSON wire format
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "entries": [[i, j, a] for i, j, a in self.entries],
            "features": [f.pairs() for f in self.features],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearInstance":
        try:
            features = [DiscreteDistribution.from_pairs(f) for f in data["features"]]
            return cls(data["n"], data["m"], data["entries"], features)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LinearInstance":
        return cls.from_dict(json.loads(text))


def save_instance(instance: LinearInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(instance.to_json())
        fh.write("\n")


def load_instance(path) -> LinearInstance:
    with open(path, encoding="utf-8") as fh:
        return LinearInstance.from_json(fh.read())


@dataclass(frozen=True)
class Realization:
    y: np.ndarray
    x: np.ndarray


def row_sparsity(instance: LinearInstance) -> int:
    counts = np.diff(instance.row_ptr)
    return int(counts.max()) if counts.size else 0


def col_sparsity(instance: LinearInstance) -> int:
    counts = np.diff(instance.col_ptr)
    return int(counts.max()) if counts.size else 0


def normalize_columns(instance: LinearInstance) -> LinearInstance:
    """Rescale so every column maximum is 1, moving the scale into Y_j."""
    scale = np.zeros(instance.m)
    np.maximum.at(scale, instance.cols, instance.vals)
    if np.any(scale == 0):
        empty = np.flatnonzero(scale == 0).tolist()
        raise ValueError(f"features {empty} appear in no arrival; drop them before normalizing")
    entries = [(i, j, a / scale[j]) for i, j, a in instance.entries]
    features = [
        f if scale[j] == 1.0 else f.scaled(scale[j]) for j, f in enumerate(instance.features)
    ]
    return LinearInstance(instance.n, instance.m, entries, features)


def is_column_normalized(instance: LinearInstance) -> bool:
    scale = np.zeros(instance.m)
    np.maximum.at(scale, instance.cols, instance.vals)
    return bool(np.all(scale == 1.0))


def restrict_rows(instance: LinearInstance, rows: Sequence[int]):
    """Sub-instance on the given arrivals, keeping only features they use.

    Returns (sub-instance, feature index map from new to old)."""
    rows = list(rows)
    if not rows:
        raise ValueError("cannot restrict to an empty set of arrivals")
    pos = {i: k for k, i in enumerate(rows)}
    used = sorted({int(j) for i in rows for j in instance.row(i)[0]})
    fpos = {j: k for k, j in enumerate(used)}
    entries = [
        (pos[i], fpos[j], a) for i, j, a in instance.entries if i in pos
    ]
    sub = LinearInstance(len(rows), len(used), entries, [instance.features[j] for j in used])
    return sub, np.array(used, dtype=np.int64)


class JointSampler(ABC):
    """Source of i.i.d. arrival vectors; draw k depends only on (seed, k)."""

    n: int

    @abstractmethod
    def _block(self, rng: np.random.Generator, size: int) -> np.ndarray:
        ...

    def sample(self, seed, count: int, start: int = 0) -> np.ndarray:
        return np.concatenate([x for x in self.iter_blocks(seed, count, start)], axis=0)

    def iter_blocks(self, seed, count: int, start: int = 0):
        for block, lo, hi in blocks(start, count):
            yield self._block(rng_for(seed, Y_DRAWS, block), BLOCK_SIZE)[lo:hi]

    def draw(self, seed, index: int) -> np.ndarray:
        return self.sample(seed, 1, start=index)[0]

    def scenarios(self):
        """Exact (X, prob) enumeration when available; None otherwise."""
        return None


class InstanceSampler(JointSampler):
    def __init__(self, instance: LinearInstance):
        self.instance = instance
        self.n = instance.n

    def _y_block(self, rng, size):
        return self.instance.sample_y(rng, size)

    def _block(self, rng, size):
        return self.instance.compute_x(self._y_block(rng, size))

    def realization(self, seed, index: int) -> Realization:
        block, lo = divmod(index, BLOCK_SIZE)
        y = self._y_block(rng_for(seed, Y_DRAWS, block), BLOCK_SIZE)[lo]
        return Realization(y=y, x=self.instance.compute_x(y[None, :])[0])


class PermutationSampler(JointSampler):
    """Uniformly random permutation of a fixed multiset (negatively associated)."""

    def __init__(self, values: Sequence[float]):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("need a nonempty list of values")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite and nonnegative")
        self.values = values
        self.n = values.size

    def _block(self, rng, size):
        perm = np.argsort(rng.random((size, self.n)), axis=1)
        return self.values[perm]

    def exact_expected_max(self) -> float:
        return float(self.values.max())

    def scenarios(self):
        perms = sorted(set(itertools.permutations(self.values.tolist())))
        X = np.array(perms, dtype=float).reshape(len(perms), self.n)
        return X, np.full(len(perms), 1.0 / len(perms))


def gen_na_permutation(values: Sequence[float]) -> PermutationSampler:
    return PermutationSampler(values)


def _check_eps(eps: float) -> None:
    if not (0 < eps < 0.5):
        raise ValueError(f"epsilon must lie in (0, 1/2), got {eps}")


def gen_tower2(n: int, eps: float) -> LinearInstance:
    """X_i = Y_i + eps * Y_{i+1}, X_n = Y_n, over tower features."""
    _check_eps(eps)
    if n < 1:
        raise ValueError("n must be at least 1")
    entries = [(i, i, 1.0) for i in range(n)] + [(i, i + 1, eps) for i in range(n - 1)]
    return LinearInstance(n, n, entries, [tower_feature(eps, i + 1) for i in range(n)])


def gen_tower_general(c: int, eps: float) -> LinearInstance:
    """Upper-triangular A_ij = eps**(j - i) over c tower features."""
    _check_eps(eps)
    if c < 1:
        raise ValueError("c must be at least 1")
    entries = [(i, j, eps ** (j - i)) for i in range(c) for j in range(i, c)]
    return LinearInstance(c, c, entries, [tower_feature(eps, i + 1) for i in range(c)])


def gen_unweighted(n: int, m: int, sets: Sequence[Sequence[int]], features) -> LinearInstance:
    """A_ij = 1 iff j is in sets[i]."""
    if len(sets) != n:
        raise ValueError(f"expected {n} sets, got {len(sets)}")
    entries = []
    for i, s in enumerate(sets):
        for j in sorted(set(int(j) for j in s)):
            if not 0 <= j < m:
                raise ValueError(f"feature index {j} out of range [0, {m})")
            entries.append((i, j, 1.0))
    return LinearInstance(n, m, entries, features)


@dataclass(frozen=True)
class FeatureSpec:
    """Recipe for random features and coefficients.

    Features get ``support_size`` atoms (one of them zero when
    ``zero_atom``) with log-uniform positive values up to ``max_value`` and
    Dirichlet probabilities; coefficients default to uniform on (0, 1].
    """

    support_size: int = 2
    max_value: float = 100.0
    zero_atom: bool = True
    coefficient: str | Callable[[np.random.Generator], float] = "uniform"

    def draw_feature(self, rng: np.random.Generator) -> DiscreteDistribution:
        k = self.support_size - (1 if self.zero_atom else 0)
        positive = np.exp(rng.uniform(0.0, math.log(self.max_value), size=k))
        values = np.concatenate([[0.0], positive]) if self.zero_atom else positive
        probs = rng.dirichlet(np.ones(values.size))
        return DiscreteDistribution.from_pairs(zip(values, probs))

    def draw_coefficient(self, rng: np.random.Generator) -> float:
        if callable(self.coefficient):
            return float(self.coefficient(rng))
        if self.coefficient == "uniform":
            return float(1.0 - rng.random())
        if self.coefficient == "ones":
            return 1.0
        raise ValueError(f"unknown coefficient law {self.coefficient!r}")


def gen_random_sparse(
    n: int,
    m: int,
    target_s_row: int,
    target_s_col: int,
    feature_spec: FeatureSpec | None = None,
    seed=0,
) -> LinearInstance:
    """Random instance with row/column sparsity at most the targets.

    Every feature is placed in between 1 and ``target_s_col`` arrivals that
    still have room, so no column is empty.
    """
    if min(n, m, target_s_row, target_s_col) < 1:
        raise ValueError("n, m and sparsity targets must be positive")
    if m > n * target_s_row:
        raise ValueError(
            f"infeasible: {m} features need a slot each but only {n * target_s_row} exist"
        )
    spec = feature_spec or FeatureSpec()
    rng = rng_for(seed, 0)
    load = np.zeros(n, dtype=int)
    entries = []
    for j in range(m):
        open_rows = np.flatnonzero(load < target_s_row)
        # reserve room so later features still get one slot each
        spare = int((target_s_row - load).sum()) - (m - j)
        want = int(rng.integers(1, target_s_col + 1))
        k = max(1, min(want, open_rows.size, spare + 1))
        chosen = np.sort(rng.choice(open_rows, size=k, replace=False))
        for i in chosen:
            entries.append((int(i), j, spec.draw_coefficient(rng)))
            load[i] += 1
    features = [spec.draw_feature(rng) for _ in range(m)]
    return LinearInstance(n, m, entries, features)


def independent_instance(dists: Sequence[DiscreteDistribution]) -> LinearInstance:
    """Identity-matrix instance, X_i = Z_i."""
    return LinearInstance(len(dists), len(dists), [(i, i, 1.0) for i in range(len(dists))], dists)
