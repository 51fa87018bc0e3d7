"""Combinatorics of the stage-assignment space and exhaustive ground truth.

The space S(n, k) holds every gap-free assignment of n features to at most k
ordered stages: the union over j = 1..k of the ordered j-partitions, of which
there are j! * S2(n, j) (Stirling numbers of the second kind). Exhaustive
evaluation of a whole space yields the true non-dominated front, used to
validate the evolutionary search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .cascade import Chromosome, compress_assignments, global_inverse_cost

__all__ = [
    "EnumerationCapExceeded",
    "SpaceCount",
    "FrontEntry",
    "GlobalFront",
    "stirling2",
    "stirling2_formula",
    "count_space",
    "enumerate_space",
    "global_front",
    "neighborhood_scan",
]

DEFAULT_ENUMERATION_CAP = 10_000_000


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SpaceCount:
    n: int
    k: int
    per_stage_count: tuple[int, ...]  # ordered j-partitions for j = 1..k
    total: int


def stirling2(n: int, j: int) -> int:
    """Exact count of unordered j-partitions of an n-element set."""
    if n < 0 or j < 0:
        raise ValueError("arguments must be non-negative")
    if j > n:
        return 0
    if j == 0:
        return 1 if n == 0 else 0
    row = [1] + [0] * j  # row[i] = S2(m, i) as m grows
    for m in range(1, n + 1):
        new = [0] * (j + 1)
        for i in range(1, min(m, j) + 1):
            new[i] = i * row[i] + row[i - 1]
        new[0] = 1 if m == 0 else 0
        row = new
    return row[j]


def stirling2_formula(n: int, j: int) -> int:
    """Inclusion-exclusion form: (1/j!) * sum (-1)^(j-i) C(j,i) i^n."""
    if j > n:
        return 0
    if j == 0:
        return 1 if n == 0 else 0
    acc = sum((-1) ** (j - i) * math.comb(j, i) * i**n for i in range(j + 1))
    return acc // math.factorial(j)


def count_space(n: int, k: int) -> SpaceCount:
    """Size of S(n, k), exactly, per stage count and in total."""
    if not (1 <= k <= n):
        raise ValueError("need 1 <= k <= n")
    per = tuple(math.factorial(j) * stirling2(n, j) for j in range(1, k + 1))
    return SpaceCount(n, k, per, sum(per))


def ratio_to_kn(n: int, k: int) -> Fraction:
    """|S(n, k)| / k^n as an exact fraction (approaches 1 for fixed k)."""
    return Fraction(count_space(n, k).total, k**n)


def enumerate_space(n: int, k: int, cap: int = DEFAULT_ENUMERATION_CAP, force: bool = False):
    """Yield every chromosome of S(n, k) exactly once.

    Canonical order: stage count ascending, then lexicographic. Guarded by a
    size cap so a huge space is never walked by accident; pass force=True to
    override.
    """
    count = count_space(n, k)
    if count.total > cap and not force:
        raise EnumerationCapExceeded(
            f"S({n},{k}) holds {count.total} chromosomes (cap {cap}); "
            "pass force=True / --force-enumeration to enumerate anyway"
        )
    for j in range(1, k + 1):
        for values in itertools.product(range(j), repeat=n):
            if len(set(values)) == j:  # keep surjections only: stage count exactly j
                yield Chromosome(values, k)


@dataclass(frozen=True)
class FrontEntry:
    assignments: tuple[int, ...]
    coverage: float
    conclusive_accuracy: float
    inverse_cost: float  # normalized against the space minimum
    raw_cost: float


@dataclass(frozen=True)
class GlobalFront:
    """Non-dominated set of an exhaustively evaluated space."""

    entries: tuple[FrontEntry, ...]
    space_min_cost: float
    count: SpaceCount
    ratio_to_kn: float
    eval_split: str = "validation"

    @property
    def assignment_set(self) -> frozenset:
        return frozenset(e.assignments for e in self.entries)

    def to_json_dict(self) -> dict:
        return {
            "eval_split": self.eval_split,
            "space": {
                "n": self.count.n,
                "k": self.count.k,
                "per_stage_count": list(self.count.per_stage_count),
                "total": self.count.total,
                "ratio_to_kn": self.ratio_to_kn,
            },
            "space_min_cost": self.space_min_cost,
            "front": [
                {
                    "chromosome": ",".join(str(v) for v in e.assignments),
                    "coverage": e.coverage,
                    "conclusive_accuracy": e.conclusive_accuracy,
                    "inverse_cost": e.inverse_cost,
                    "raw_cost": e.raw_cost,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GlobalFront":
        sp = doc["space"]
        entries = tuple(
            FrontEntry(
                tuple(int(v) for v in row["chromosome"].split(",")),
                row["coverage"],
                row["conclusive_accuracy"],
                row["inverse_cost"],
                row["raw_cost"],
            )
            for row in doc["front"]
        )
        return cls(
            entries,
            doc["space_min_cost"],
            SpaceCount(sp["n"], sp["k"], tuple(sp["per_stage_count"]), sp["total"]),
            sp["ratio_to_kn"],
            doc.get("eval_split", "validation"),
        )


def _cull_non_dominated(points):
    """Indices of the maximal non-dominated subset (all objectives maximized)."""
    order = sorted(range(len(points)), key=lambda i: points[i], reverse=True)
    kept = []
    for i in order:
        p = points[i]
        dominated = False
        for j in kept:
            q = points[j]
            if all(a >= b for a, b in zip(q, p)) and any(a > b for a, b in zip(q, p)):
                dominated = True
                break
        if not dominated:
            kept.append(i)
    return sorted(kept)


def global_front(
    n: int,
    k: int,
    evaluator,
    cap: int = DEFAULT_ENUMERATION_CAP,
    force: bool = False,
    eval_split: str = "validation",
) -> GlobalFront:
    """Evaluate all of S(n, k) and keep the non-dominated set.

    Inverse cost is normalized against the space-wide minimum raw cost, which
    orders solutions identically to raw cost itself.
    """
    rows = []
    for chrom in enumerate_space(n, k, cap=cap, force=force):
        g1, g2, raw = evaluator.objectives(chrom.assignments)
        rows.append((chrom.assignments, g1, g2, raw))
    space_min = min(r[3] for r in rows)
    points = [(g1, g2, global_inverse_cost(raw, space_min)) for _, g1, g2, raw in rows]
    keep = _cull_non_dominated(points)
    entries = tuple(
        FrontEntry(rows[i][0], points[i][0], points[i][1], points[i][2], rows[i][3]) for i in keep
    )
    count = count_space(n, k)
    return GlobalFront(entries, space_min, count, float(ratio_to_kn(n, k)), eval_split)


def neighborhood_scan(chromosome: Chromosome, evaluator, space_min: float | None = None):
    """Objectives for every distinct single +/-1 stage reassignment.

    A move is valid when the entry stays non-negative and the compressed
    result is a different chromosome within the stage limit. Results are
    deduplicated by compressed form; inverse cost is filled in when the
    space-wide minimum is supplied.
    """
    seen = {}
    base = chromosome.assignments
    for i in range(len(base)):
        for delta in (-1, 1):
            moved = list(base)
            moved[i] += delta
            if moved[i] < 0:
                continue
            values = compress_assignments(moved)
            if max(values) + 1 > chromosome.k_max or values == base:
                continue
            seen.setdefault(values, Chromosome(values, chromosome.k_max))
    out = []
    for values, neighbor in sorted(seen.items()):
        g1, g2, raw = evaluator.objectives(values)
        inv = global_inverse_cost(raw, space_min) if space_min is not None else None
        out.append((neighbor, (g1, g2, raw, inv)))
    return out
