from fractions import Fraction

import numpy as np
import pytest

from conftest import HashEvaluator
from mscopt.cascade import Chromosome
from mscopt.space import (
    EnumerationCapExceeded,
    GlobalFront,
    count_space,
    enumerate_space,
    global_front,
    neighborhood_scan,
    ratio_to_kn,
    stirling2,
    stirling2_formula,
)


def _unordered_partitions(items, blocks):
    """Exhaustive listing of unordered set partitions into `blocks` blocks."""
    if blocks == 1:
        return [[set(items)]]
    out = []
    first, rest = items[0], items[1:]
    for sizes in _unordered_partitions(rest, blocks) if len(rest) >= blocks else []:
        for i in range(blocks):
            copy = [set(b) for b in sizes]
            copy[i].add(first)
            out.append(copy)
    if len(rest) >= blocks - 1:
        for sub in _unordered_partitions(rest, blocks - 1):
            out.append([{first}] + [set(b) for b in sub])
    seen = set()
    uniq = []
    for p in out:
        key = frozenset(frozenset(b) for b in p)
        if key not in seen:
            seen.add(key)
            uniq.append(p)
    return uniq


class TestStirling:
    def test_s2_4_2_by_listing(self):
        assert stirling2(4, 2) == 7
        assert len(_unordered_partitions([0, 1, 2, 3], 2)) == 7

    def test_single_block(self):
        for n in range(1, 12):
            assert stirling2(n, 1) == 1

    def test_s2_14_4(self):
        assert stirling2(14, 4) == 10_391_745
        assert stirling2_formula(14, 4) == 10_391_745

    def test_recurrence_matches_formula(self):
        for n in range(0, 21):
            for k in range(0, 7):
                assert stirling2(n, k) == stirling2_formula(n, k)

    def test_out_of_range(self):
        assert stirling2(3, 5) == 0
        with pytest.raises(ValueError):
            stirling2(-1, 2)


class TestCountSpace:
    def test_4_2(self):
        count = count_space(4, 2)
        assert count.per_stage_count == (1, 14)
        assert count.total == 15

    def test_paper_scale_totals(self):
        assert count_space(14, 4).total == 254_152_083
        assert count_space(12, 4).total == 15_199_275

    def test_8_3(self):
        assert count_space(8, 3).total == 6051

    def test_invalid(self):
        with pytest.raises(ValueError):
            count_space(3, 4)


class TestEnumerate:
    def test_2_2_exact_set(self):
        got = {c.assignments for c in enumerate_space(2, 2)}
        assert got == {(0, 0), (0, 1), (1, 0)}

    @pytest.mark.parametrize("n,k,total", [(4, 3, 51), (5, 3, 181), (6, 3, 603)])
    def test_counts(self, n, k, total):
        chroms = list(enumerate_space(n, k))
        assert len(chroms) == total
        assert len({c.assignments for c in chroms}) == total  # no duplicates
        assert count_space(n, k).total == total

    def test_all_valid(self):
        for chrom in enumerate_space(5, 3):
            assert 1 <= chrom.n_stages <= 3  # construction enforces gap-freeness

    def test_cap(self):
        with pytest.raises(EnumerationCapExceeded, match="force"):
            list(enumerate_space(8, 3, cap=100))
        assert len(list(enumerate_space(8, 3, cap=100, force=True))) == 6051


class TestTheoremRatio:
    def test_exact_closed_form(self):
        # |S(n,3)| = 3^n - 2*2^n + 2, so the ratio sits just under 1.
        for n in (10, 15, 20, 30):
            assert count_space(n, 3).total == 3**n - 2 * 2**n + 2
            assert ratio_to_kn(n, 3) == Fraction(3**n - 2 * 2**n + 2, 3**n)

    def test_converges_to_one(self):
        gaps = [abs(1 - ratio_to_kn(n, 3)) for n in (10, 15, 20, 30)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < Fraction(1, 10_000)


def _brute_front(points):
    keep = []
    for i, p in enumerate(points):
        dominated = any(
            all(a >= b for a, b in zip(q, p)) and any(a > b for a, b in zip(q, p))
            for j, q in enumerate(points)
            if j != i
        )
        if not dominated:
            keep.append(i)
    return keep


class TestGlobalFront:
    def test_matches_quadratic_filter(self):
        evaluator = HashEvaluator(5, salt=1)
        front = global_front(5, 2, evaluator)
        chroms = list(enumerate_space(5, 2))
        rows = [evaluator.objectives(c.assignments) for c in chroms]
        space_min = min(r[2] for r in rows)
        points = [(g1, g2, space_min / raw) for g1, g2, raw in rows]
        expected = {chroms[i].assignments for i in _brute_front(points)}
        assert front.assignment_set == expected
        assert front.space_min_cost == pytest.approx(space_min)

    def test_single_dominator(self):
        class Dominant:
            n_features = 3

            def objectives(self, assignments):
                if tuple(assignments) == (0, 0, 0):
                    return (1.0, 1.0, 1.0)
                return (0.1, 0.1, 2.0)

        front = global_front(3, 2, Dominant())
        assert front.assignment_set == {(0, 0, 0)}

    def test_front_members_not_dominated_by_outside(self, study8, front8):
        # Spot-check: nothing in a random sample dominates a front member.
        rng = np.random.default_rng(17)
        entries = [(e.coverage, e.conclusive_accuracy, e.inverse_cost) for e in front8.entries]
        for _ in range(200):
            raw = rng.integers(0, 3, size=8)
            values = tuple(sorted(set(raw)))
            dense = tuple(values.index(v) for v in raw)
            g1, g2, raw_cost = study8.evaluator.objectives(dense)
            pt = (g1, g2, front8.space_min_cost / raw_cost)
            for q in entries:
                assert not (
                    all(a >= b for a, b in zip(pt, q)) and any(a > b for a, b in zip(pt, q))
                )

    def test_json_roundtrip(self):
        front = global_front(4, 2, HashEvaluator(4, salt=2))
        back = GlobalFront.from_json_dict(front.to_json_dict())
        assert back.assignment_set == front.assignment_set
        assert back.space_min_cost == front.space_min_cost
        assert back.count == front.count

    def test_exhaustive_n8_trains_every_nonempty_subset(self, study8, front8):
        # Cumulative stage subsets across all 6051 configurations cover the
        # full powerset, and the cache holds each subset exactly once.
        assert len(study8.evaluator.cache) == 2**8 - 1

    def test_minimum_ratio_on_51_chromosome_space(self):
        from mscopt.cascade import global_inverse_cost

        evaluator = HashEvaluator(4, salt=7)
        chroms = list(enumerate_space(4, 3))
        assert len(chroms) == 51
        raws = {c.assignments: evaluator.objectives(c.assignments)[2] for c in chroms}
        space_min = min(raws.values())
        cheapest = min(raws, key=raws.get)
        assert global_inverse_cost(raws[cheapest], space_min) == 1.0
        assert all(0 < global_inverse_cost(r, space_min) <= 1.0 for r in raws.values())


class TestNeighborhood:
    def test_single_stage_neighbors(self):
        evaluator = HashEvaluator(4, salt=3)
        chrom = Chromosome((0, 0, 0, 0), 3)
        neighbors = neighborhood_scan(chrom, evaluator)
        got = {n.assignments for n, _ in neighbors}
        assert got == {
            (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1),
        }

    def test_two_feature_scan_dedupes_to_single_stage(self):
        evaluator = HashEvaluator(2, salt=4)
        neighbors = neighborhood_scan(Chromosome((0, 1), 2), evaluator)
        assert {n.assignments for n, _ in neighbors} == {(0, 0)}

    def test_bounded_by_two_moves_per_feature(self):
        rng = np.random.default_rng(5)
        evaluator = HashEvaluator(6, salt=5)
        for _ in range(30):
            raw = rng.integers(0, 3, size=6)
            values = tuple(sorted(set(raw)))
            chrom = Chromosome(tuple(values.index(v) for v in raw), 3)
            neighbors = neighborhood_scan(chrom, evaluator)
            assert len(neighbors) <= 2 * 6
            assert all(n.assignments != chrom.assignments for n, _ in neighbors)

    def test_global_inverse_cost_filled(self):
        evaluator = HashEvaluator(3, salt=6)
        neighbors = neighborhood_scan(Chromosome((0, 1, 0), 2), evaluator, space_min=1.0)
        for _, (g1, g2, raw, inv) in neighbors:
            assert inv == pytest.approx(1.0 / raw)
