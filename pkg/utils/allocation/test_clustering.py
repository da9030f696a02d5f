import unittest

import numpy as np
import numpy.testing as npt

from models.scenario_model import ScenarioModel
from utils.allocation.clustering import (
    anchored_ues,
    enumerate_candidates,
    exhaustive_cluster_count,
    scheduled_ue_set,
)
from utils.allocation.mumimo import ClusterPlan
from utils.radio.topology import build_scenario, drop_ues


def candidate_counts(scenario, drops: int) -> list:
    return [
        len(enumerate_candidates(drop_ues(scenario, np.random.SeedSequence([d, 0])), 3))
        for d in range(drops)
    ]


class TestCandidates(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.scenario = build_scenario(ScenarioModel())
        cls.drop = drop_ues(cls.scenario, 2)

    def test_exhaustive_count(self):
        self.assertEqual(exhaustive_cluster_count(21, 3), 1561)
        self.assertEqual(exhaustive_cluster_count(3, 3), 7)
        with self.assertRaises(ValueError):
            exhaustive_cluster_count(3, 4)

    def test_every_top_set_is_a_candidate(self):
        candidates = enumerate_candidates(self.drop, 3)
        bs_sets = set(candidates.bs_sets)
        for k in range(self.drop.num_ues):
            for u in range(1, 4):
                self.assertIn(tuple(sorted(self.drop.bs_order[k, :u].tolist())), bs_sets)

    def test_candidates_are_distinct_and_ordered(self):
        candidates = enumerate_candidates(self.drop, 3)
        self.assertEqual(len(set(candidates.bs_sets)), len(candidates))
        keys = [(len(s), s) for s in candidates.bs_sets]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual([c.cluster_id for c in candidates], list(range(len(candidates))))
        self.assertTrue(all(1 <= c.size <= 3 for c in candidates))

    def test_count_well_below_exhaustive(self):
        count = len(enumerate_candidates(self.drop, 3))
        self.assertGreater(count, 21)
        self.assertLess(count, 400)

    def test_candidate_count_percentiles(self):
        counts = candidate_counts(self.scenario, 100)
        p5, p50, p95 = np.percentile(counts, [5, 50, 95])
        self.assertTrue(228 <= p5 <= 242, p5)
        self.assertTrue(240 <= p50 <= 258, p50)
        self.assertTrue(256 <= p95 <= 270, p95)
        self.assertLess(p95, 0.2 * exhaustive_cluster_count(21, 3))

    def test_shared_site_shadowing_reduces_candidates(self):
        independent = build_scenario(ScenarioModel(site_shadow_correlation=0.0))
        shared = build_scenario(ScenarioModel(site_shadow_correlation=1.0))
        self.assertGreater(np.median(candidate_counts(independent, 30)), np.median(candidate_counts(shared, 30)))

    def test_singletons_only(self):
        candidates = enumerate_candidates(self.drop, 1)
        self.assertEqual(
            sorted(candidates.bs_sets),
            sorted({(int(j),) for j in self.drop.anchor}),
        )

    def test_ue_sets_follow_anchors(self):
        for cluster in enumerate_candidates(self.drop, 2):
            expected = [k for k in range(self.drop.num_ues) if self.drop.anchor[k] in cluster.bs_set]
            self.assertEqual(list(cluster.ue_set), expected)
        self.assertEqual(anchored_ues(self.drop, range(21)), tuple(range(self.drop.num_ues)))

    def test_j_max_range(self):
        with self.assertRaises(ValueError):
            enumerate_candidates(self.drop, 0)
        with self.assertRaises(ValueError):
            enumerate_candidates(self.drop, 22)


class TestScheduledUeSet(unittest.TestCase):

    def plan(self, cluster_id, bs_set, ue_id, column):
        precoder = np.array(column, dtype=complex)[:, None]
        return ClusterPlan(
            cluster_id=cluster_id,
            bs_set=bs_set,
            scheduled_ues=(ue_id,),
            precoders={ue_id: precoder},
            ranks={ue_id: 1},
            power=2.0,
            estimated_rate=1.0,
        )

    def test_lifts_precoders_to_network(self):
        plans = [self.plan(0, (0, 2), 5, [1, 2, 3, 4]), self.plan(1, (1,), 3, [0.6, 0.8])]
        schedule = scheduled_ue_set(np.array([True, True]), plans, num_bs=3, bs_antennas=2)
        self.assertEqual(schedule.scheduled_ues, (3, 5))
        npt.assert_array_equal(schedule.precoders[5][:, 0], [1, 2, 0, 0, 3, 4])
        npt.assert_array_equal(schedule.precoders[3][:, 0], [0, 0, 0.6, 0.8, 0, 0])
        self.assertEqual(schedule.serving[5], (0, 2))
        self.assertEqual(schedule.ranks, {3: 1, 5: 1})
        self.assertAlmostEqual(schedule.estimated_rate, 2.0)
        npt.assert_allclose(schedule.bs_power(3, 2), [10.0, 2.0, 50.0])

    def test_unselected_plans_are_ignored(self):
        plans = [self.plan(0, (0,), 1, [1, 0]), self.plan(1, (0, 1), 2, [1, 0, 0, 1])]
        schedule = scheduled_ue_set(np.array([False, True]), plans, num_bs=2, bs_antennas=2)
        self.assertEqual(schedule.selected, (1,))
        self.assertEqual(schedule.scheduled_ues, (2,))

    def test_rejects_overlapping_clusters(self):
        plans = [self.plan(0, (0,), 1, [1, 0]), self.plan(1, (0, 1), 2, [1, 0, 0, 1])]
        with self.assertRaises(ValueError):
            scheduled_ue_set(np.array([True, True]), plans, num_bs=2, bs_antennas=2)


if __name__ == '__main__':
    unittest.main()
