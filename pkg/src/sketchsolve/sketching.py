"""Distributions over sketching matrices S with m rows.

A sketch compresses the system Ax = b to S'Ax = S'b. Each distribution
can draw samples from a seeded counter-based generator and, when its
support is a reasonably small finite set, enumerate that support exactly
(sample, probability) so expectations can be computed without Monte
Carlo.

Streams are keyed by (master seed, stream ids...) through a Philox
counter-based bit generator, so concurrent tasks can own disjoint
streams without coordination and every draw sequence is reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "stream",
    "SketchSample",
    "SketchDistribution",
    "FixedIdentity",
    "Coordinate",
    "Block",
    "Gaussian",
    "CountSketch",
    "CountMin",
    "kaczmarz_distribution",
]

DEFAULT_SUPPORT_CAP = 100_000


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream (master_seed, *key).

    Distinct keys give statistically independent streams; the same key
    always reproduces the same draw sequence regardless of how many
    other streams are in use.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True, eq=False)
class SketchSample:
    """One drawn sketching matrix.

    For structured draws (coordinate, block, count families) the column
    indices and signs are kept alongside the dense matrix; ``key`` is a
    canonical hashable label used to match empirical frequencies against
    an enumerated support. Column order and signs do not affect the
    induced operators, so keys are sorted.
    """

    matrix: np.ndarray
    cols: tuple[int, ...] | None = None
    signs: tuple[int, ...] | None = None

    def __post_init__(self):
        self.matrix.flags.writeable = False

    @property
    def q(self) -> int:
        return self.matrix.shape[1]

    @property
    def key(self):
        if self.cols is None:
            return None
        signs = self.signs if self.signs is not None else (1,) * len(self.cols)
        return tuple(sorted(zip(self.cols, signs)))


def _columns_matrix(m: int, cols, signs=None) -> np.ndarray:
    mat = np.zeros((m, len(cols)))
    for j, i in enumerate(cols):
        mat[i, j] = 1.0 if signs is None else float(signs[j])
    return mat


def _column_sample(m: int, cols, signs=None) -> SketchSample:
    return SketchSample(
        _columns_matrix(m, cols, signs),
        cols=tuple(int(c) for c in cols),
        signs=None if signs is None else tuple(int(s) for s in signs),
    )


def _multiset_probability(counts, alphabet_size: int) -> float:
    q = sum(counts)
    coef = math.factorial(q)
    for c in counts:
        coef //= math.factorial(c)
    return float(coef) / float(alphabet_size) ** q


class SketchDistribution:
    """Base class: a distribution over sketching matrices with m rows."""

    m: int

    def sample(self, rng: np.random.Generator) -> SketchSample:
        raise NotImplementedError

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        """Enumerated support as [(sample, probability), ...], or None.

        None means the support is continuous or larger than ``cap``.
        """
        return None

    def sample_many(self, rng: np.random.Generator, count: int) -> list[SketchSample]:
        return [self.sample(rng) for _ in range(count)]


class FixedIdentity(SketchDistribution):
    """S equals the m-by-m identity with probability one."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("m must be positive")
        self.m = int(m)
        self._atom = SketchSample(np.eye(self.m), cols=tuple(range(self.m)))

    def sample(self, rng):
        return self._atom

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        return [(self._atom, 1.0)]

    def __repr__(self):
        return f"FixedIdentity(m={self.m})"


class Coordinate(SketchDistribution):
    """S is the unit column e_i with probability p_i."""

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=float).reshape(-1)
        if p.size < 1 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
        self.m = int(p.size)
        self.probabilities = p.copy()
        self.probabilities.flags.writeable = False
        cum = np.cumsum(p)
        cum[-1] = 1.0
        self._cum = cum
        self._atoms: dict[int, SketchSample] = {}

    def _atom(self, i: int) -> SketchSample:
        if i not in self._atoms:
            self._atoms[i] = _column_sample(self.m, (i,))
        return self._atoms[i]

    def sample_indices(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` row indices in one call.

        Uses inverse-transform sampling on one uniform per draw, so the
        sequence is identical to ``count`` single draws from the same
        stream state.
        """
        return np.searchsorted(self._cum, rng.random(count), side="right")

    def sample(self, rng):
        i = int(np.searchsorted(self._cum, rng.random(), side="right"))
        return self._atom(i)

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        atoms = [(self._atom(i), float(p)) for i, p in enumerate(self.probabilities) if p > 0.0]
        return atoms if len(atoms) <= cap else None

    def __repr__(self):
        return f"Coordinate(m={self.m})"


class Block(SketchDistribution):
    """S is a random q-column submatrix of the m-by-m identity.

    By default the q columns form a uniformly random q-subset (sampling
    without replacement); with ``with_replacement=True`` the q columns
    are drawn independently and may repeat.
    """

    def __init__(self, m: int, q: int, with_replacement: bool = False):
        if not 1 <= q <= m:
            raise ValueError(f"need 1 <= q <= m, got q={q}, m={m}")
        self.m = int(m)
        self.q = int(q)
        self.with_replacement = bool(with_replacement)

    def sample(self, rng):
        if self.with_replacement:
            cols = np.sort(rng.integers(0, self.m, size=self.q))
        else:
            cols = np.sort(rng.permutation(self.m)[: self.q])
        return _column_sample(self.m, cols)

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        if self.with_replacement:
            count = math.comb(self.m + self.q - 1, self.q)
            if count > cap:
                return None
            out = []
            for cols in itertools.combinations_with_replacement(range(self.m), self.q):
                counts = [cols.count(c) for c in sorted(set(cols))]
                out.append((_column_sample(self.m, cols), _multiset_probability(counts, self.m)))
            return out
        count = math.comb(self.m, self.q)
        if count > cap:
            return None
        prob = 1.0 / count
        return [
            (_column_sample(self.m, cols), prob)
            for cols in itertools.combinations(range(self.m), self.q)
        ]

    def __repr__(self):
        return f"Block(m={self.m}, q={self.q}, with_replacement={self.with_replacement})"


class Gaussian(SketchDistribution):
    """S is m-by-q with independent standard normal entries."""

    def __init__(self, m: int, q: int):
        if m < 1 or q < 1:
            raise ValueError("m and q must be positive")
        self.m = int(m)
        self.q = int(q)

    def sample(self, rng):
        return SketchSample(rng.standard_normal((self.m, self.q)))

    def __repr__(self):
        return f"Gaussian(m={self.m}, q={self.q})"


class CountSketch(SketchDistribution):
    """q columns drawn uniformly with replacement from [I, -I]."""

    def __init__(self, m: int, q: int):
        if m < 1 or q < 1:
            raise ValueError("m and q must be positive")
        self.m = int(m)
        self.q = int(q)

    def sample(self, rng):
        j = rng.integers(0, 2 * self.m, size=self.q)
        cols = j % self.m
        signs = np.where(j < self.m, 1, -1)
        return _column_sample(self.m, cols, signs)

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        count = math.comb(2 * self.m + self.q - 1, self.q)
        if count > cap:
            return None
        out = []
        for js in itertools.combinations_with_replacement(range(2 * self.m), self.q):
            counts = [js.count(j) for j in sorted(set(js))]
            cols = [j % self.m for j in js]
            signs = [1 if j < self.m else -1 for j in js]
            out.append(
                (_column_sample(self.m, cols, signs), _multiset_probability(counts, 2 * self.m))
            )
        return out

    def __repr__(self):
        return f"CountSketch(m={self.m}, q={self.q})"


class CountMin(SketchDistribution):
    """q columns drawn uniformly with replacement from the identity."""

    def __init__(self, m: int, q: int):
        if m < 1 or q < 1:
            raise ValueError("m and q must be positive")
        self.m = int(m)
        self.q = int(q)

    def sample(self, rng):
        cols = rng.integers(0, self.m, size=self.q)
        return _column_sample(self.m, cols)

    def support(self, cap: int = DEFAULT_SUPPORT_CAP):
        count = math.comb(self.m + self.q - 1, self.q)
        if count > cap:
            return None
        out = []
        for cols in itertools.combinations_with_replacement(range(self.m), self.q):
            counts = [cols.count(c) for c in sorted(set(cols))]
            out.append((_column_sample(self.m, cols), _multiset_probability(counts, self.m)))
        return out

    def __repr__(self):
        return f"CountMin(m={self.m}, q={self.q})"


def kaczmarz_distribution(mat) -> Coordinate:
    """Row sampling with probabilities proportional to squared row norms.

    Every row must be nonzero, otherwise its selection probability would
    be paired with an undefined projection.
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    row_sq = np.einsum("ij,ij->i", a, a)
    if np.any(row_sq == 0.0):
        raise ValueError(f"matrix has an all-zero row at index {int(np.argmin(row_sq))}")
    return Coordinate(row_sq / row_sq.sum())
