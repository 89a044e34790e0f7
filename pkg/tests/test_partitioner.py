import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvcm.partitioner import SubsetPlan, make_subsets


class TestMakeSubsets:
    def test_exhaustive_sample(self):
        plan = make_subsets(12, 1, 12, seed=3)
        assert sorted(plan.assignments[0]) == list(range(12))

    def test_singletons(self):
        plan = make_subsets(9, 3, 1, seed=0)
        assert all(len(a) == 1 and 0 <= a[0] < 9 for a in plan.assignments)

    def test_inclusion_frequency(self):
        n, k, m = 100, 200, 50
        plan = make_subsets(n, k, m, seed=42)
        counts = np.bincount(np.concatenate(plan.assignments), minlength=n)
        freq = counts / k
        se = np.sqrt(0.5 * 0.5 / k)
        assert np.all(np.abs(freq - m / n) < 3 * se)
        # every subset has exactly m members, so the average frequency is exact
        assert freq.mean() == pytest.approx(m / n, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            make_subsets(5, 1, 6, seed=0)
        with pytest.raises(ValueError):
            make_subsets(5, 0, 2, seed=0)

    def test_deterministic(self):
        a = make_subsets(50, 4, 10, seed=9).to_manifest()
        b = make_subsets(50, 4, 10, seed=9).to_manifest()
        assert a == b
        assert a != make_subsets(50, 4, 10, seed=10).to_manifest()

    @settings(max_examples=40)
    @given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 2**31))
    def test_no_duplicates(self, n, k, seed):
        m = max(1, n // 2)
        plan = make_subsets(n, k, m, seed)
        for ids in plan.assignments:
            assert len(set(ids)) == m
            assert list(ids) == sorted(ids)
            assert all(0 <= i < n for i in ids)

    def test_manifest_round_trip(self, tmp_path):
        plan = make_subsets(30, 3, 7, seed=5)
        plan.save(tmp_path / "plan.txt")
        assert SubsetPlan.from_manifest((tmp_path / "plan.txt").read_text()) == plan

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            SubsetPlan(1, 2, ((0, 0),), 0)
