"""Value types and helpers shared by every module.

Indices are 0-based in memory.  Everything that leaves the process
(CSV files, printed partitions) uses 1-based particle labels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

WEIGHT_TOL = 1e-12
MAX_PARTICLES = 2**31 - 1


class MalformedInputError(ValueError):
    """Input violates a structural invariant (bad index, bad sum, duplicates)."""


class SizeError(ValueError):
    """A size precondition (N >= 2, enough samples, ...) is not met."""


def falling_factorial(a: int, b: int) -> int:
    """Return (a)_b = a (a-1) ... (a-b+1); 1 for b == 0, 0 for b > a."""
    if a < 0 or b < 0:
        raise ValueError("falling_factorial takes non-negative integers")
    if b > a:
        return 0
    return math.perm(a, b)


def falling_factorial_array(x, b: int) -> np.ndarray:
    """Vectorised (x)_b for non-negative integer arrays (float result)."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    for k in range(b):
        out *= x - k
    # (x)_b vanishes for 0 <= x < b; the product above already gives 0 there
    return out


def weight_vector(values) -> np.ndarray:
    """Validate and renormalise raw non-negative weights.

    Raises MalformedInputError for empty input, negative or non-finite
    entries, or a zero total.
    """
    w = np.asarray(values, dtype=float).ravel()
    if w.size == 0:
        raise MalformedInputError("weight vector is empty")
    if w.size > MAX_PARTICLES:
        raise SizeError("N exceeds 2**31 - 1")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise MalformedInputError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise MalformedInputError("weights sum to zero")
    w = w / total
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise MalformedInputError("weights cannot be normalised to 1e-12")
    return w


def offspring_counts(values, N: int | None = None) -> np.ndarray:
    nu = np.asarray(values)
    if nu.ndim != 1 or nu.size == 0:
        raise MalformedInputError("offspring counts must be a non-empty vector")
    if not np.issubdtype(nu.dtype, np.integer):
        if not np.all(nu == np.round(nu)):
            raise MalformedInputError("offspring counts must be integers")
        nu = nu.astype(np.int64)
    N = nu.size if N is None else N
    if np.any(nu < 0) or nu.sum() != N:
        raise MalformedInputError(f"offspring counts must be >= 0 and sum to N={N}")
    return nu


def counts_from_assignment(a, one_based: bool = False) -> np.ndarray:
    """Family sizes nu_i = #{j : a_j = i}.

    `a` holds 0-based parent indices unless `one_based` is set.
    """
    a = np.asarray(a, dtype=np.int64).ravel()
    N = a.size
    if N == 0:
        raise MalformedInputError("empty assignment")
    if one_based:
        a = a - 1
    if a.min() < 0 or a.max() >= N:
        raise MalformedInputError("parent index outside {1..N}")
    return np.bincount(a, minlength=N)


def counts_from_rows(rows) -> np.ndarray:
    """Row-wise family sizes for a K x N array of 0-based parent indices."""
    rows = np.asarray(rows, dtype=np.int64)
    K, N = rows.shape
    flat = (rows + N * np.arange(K)[:, None]).ravel()
    return np.bincount(flat, minlength=K * N).reshape(K, N)


@dataclass(frozen=True)
class Partition:
    """Partition of {1..n} in canonical form.

    Blocks are sorted tuples, ordered by their smallest element.
    """

    blocks: tuple
    n: int

    def __post_init__(self):
        if any(len(b) == 0 for b in self.blocks):
            raise MalformedInputError("blocks must be non-empty")
        canon = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        seen = [x for b in canon for x in b]
        if sorted(seen) != list(range(1, self.n + 1)):
            raise MalformedInputError("blocks must be disjoint, non-empty and cover {1..n}")
        object.__setattr__(self, "blocks", canon)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple((i,) for i in range(1, n + 1)), n)

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Group elements 1..n by equal label (labels[k] belongs to element k+1)."""
        groups: dict = {}
        for k, lab in enumerate(labels):
            groups.setdefault(lab, []).append(k + 1)
        return cls(tuple(tuple(g) for g in groups.values()), len(labels))

    def __len__(self):
        return len(self.blocks)

    def is_coarsening_of(self, other: "Partition") -> bool:
        """True if every block of `other` lies inside a block of self."""
        where = {x: i for i, b in enumerate(self.blocks) for x in b}
        return all(len({where[x] for x in b}) == 1 for b in other.blocks)

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def merge_by_ancestor(p: Partition, lineage_parents) -> Partition:
    """Union the blocks of `p` that share a parent index.

    `lineage_parents` is either a sequence aligned with ``p.blocks`` or a
    mapping from block (tuple) to parent index.
    """
    if isinstance(lineage_parents, Mapping):
        parents = [lineage_parents[b] for b in p.blocks]
    else:
        parents = list(lineage_parents)
        if len(parents) != len(p.blocks):
            raise MalformedInputError("one parent index per block required")
    groups: dict = {}
    for block, parent in zip(p.blocks, parents):
        groups.setdefault(parent, []).extend(block)
    return Partition(tuple(tuple(g) for g in groups.values()), p.n)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (seed, stream_id).

    Backed by numpy's PCG64 seeded through a SeedSequence whose spawn key
    is the stream id, so distinct ids give independent streams.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) % 2**64,
                                    spawn_key=(int(self.stream_id) % 2**64,))
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    return RngStream(seed, stream_id).generator()


class AncestryMatrix:
    """Parent index rows a_0, ..., a_{T-1} (row t maps generation t+1 to t)."""

    def __init__(self, rows):
        rows = np.array(rows, dtype=np.int64)
        if rows.ndim != 2:
            raise MalformedInputError("ancestry must be a T x N array")
        T, N = rows.shape
        if N and (rows.min(initial=0) < 0 or rows.max(initial=0) >= N):
            raise MalformedInputError("parent index outside {1..N}")
        self.rows = rows
        self.rows.setflags(write=False)

    @property
    def T(self) -> int:
        return self.rows.shape[0]

    @property
    def N(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_one_based(cls, rows) -> "AncestryMatrix":
        return cls(np.asarray(rows, dtype=np.int64) - 1)

    def offspring(self) -> np.ndarray:
        return counts_from_rows(self.rows)

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"a{i}" for i in range(1, self.N + 1)])
        for t, row in enumerate(self.rows):
            writer.writerow([t] + [int(x) + 1 for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AncestryMatrix":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if not header or header[0] != "t":
            raise MalformedInputError("ancestry CSV must start with a 't,a1,...' header")
        rows = []
        for expected_t, rec in enumerate(reader):
            if int(rec[0]) != expected_t:
                raise MalformedInputError("ancestry rows must be ordered t = 0..T-1")
            rows.append([int(x) for x in rec[1:]])
        if not rows:
            return cls(np.zeros((0, len(header) - 1), dtype=np.int64))
        return cls.from_one_based(rows)

    def __eq__(self, other):
        return isinstance(other, AncestryMatrix) and np.array_equal(self.rows, other.rows)


def fmt_float(x) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))
