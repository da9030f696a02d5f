import math
import unittest

from pydantic import ValidationError

from models.scenario_model import ScenarioModel, dbm_to_watts


class TestScenarioModel(unittest.TestCase):

    def test_defaults(self):
        scenario = ScenarioModel()
        self.assertEqual(scenario.num_bs, 21)
        self.assertEqual(scenario.num_ues, 210)
        self.assertAlmostEqual(scenario.d_ce, 500.0 / math.sqrt(3.0))
        self.assertAlmostEqual(scenario.p_bs, 10.0 ** 1.6)

    def test_dbm_to_watts(self):
        self.assertAlmostEqual(dbm_to_watts(30.0), 1.0)
        self.assertAlmostEqual(dbm_to_watts(0.0), 1e-3)

    def test_explicit_cell_edge_distance(self):
        self.assertEqual(ScenarioModel(cell_edge_distance=250.0).d_ce, 250.0)

    def test_rejects_unknown_site_count(self):
        with self.assertRaises(ValidationError):
            ScenarioModel(site_count=5)

    def test_rejects_non_positive_distance(self):
        with self.assertRaises(ValidationError):
            ScenarioModel(inter_site_distance=0.0)

    def test_rejects_min_distance_beyond_site_radius(self):
        with self.assertRaises(ValidationError):
            ScenarioModel(inter_site_distance=100.0, min_bs_ue_distance=60.0)

    def test_site_shadow_correlation_range(self):
        self.assertEqual(ScenarioModel().site_shadow_correlation, 0.5)
        self.assertEqual(ScenarioModel(site_shadow_correlation=1.0).site_shadow_correlation, 1.0)
        for value in (-0.1, 1.5):
            with self.assertRaises(ValidationError):
                ScenarioModel(site_shadow_correlation=value)

    def test_frozen(self):
        scenario = ScenarioModel()
        with self.assertRaises(ValidationError):
            scenario.site_count = 19


if __name__ == '__main__':
    unittest.main()
