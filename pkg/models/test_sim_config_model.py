import unittest

from pydantic import ValidationError

from models.scenario_model import ScenarioModel
from models.sim_config_model import SimConfigModel


class TestSimConfigModel(unittest.TestCase):

    def test_defaults(self):
        config = SimConfigModel()
        self.assertEqual(config.scheme, "dc")
        self.assertEqual(config.blocks, 200)
        self.assertIsNone(config.l_max)
        self.assertEqual(config.pilot_count, 0)
        self.assertEqual(config.overhead_factor, 1.0)
        self.assertAlmostEqual(config.pf_power, config.scenario.p_bs)

    def test_unbounded_l_max(self):
        self.assertIsNone(SimConfigModel(ue_antennas=2, l_max="unbounded").l_max)
        self.assertEqual(SimConfigModel(ue_antennas=2, l_max="1").l_max, 1)

    def test_rejects_odd_blocks(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(blocks=5)

    def test_rejects_j_max_above_bs_count(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(j_max=4, scenario=ScenarioModel(site_count=1))

    def test_rejects_l_max_above_ue_antennas(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(ue_antennas=2, l_max=3)

    def test_estimated_csi_needs_orthogonal_pilots(self):
        # N*K = 2 * 210 = 420
        with self.assertRaises(ValidationError):
            SimConfigModel(csi="estimated", ue_antennas=2, nt=419)
        config = SimConfigModel(csi="estimated", ue_antennas=2, nt=420)
        self.assertEqual(config.coherence.n_t, 420)

    def test_pilots_must_fit_in_block(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(channel="custom", delay_spread=1e-3, doppler=100.0, nt=10)

    def test_nt_fraction(self):
        config = SimConfigModel(channel="etu", nt_fraction=0.02)
        self.assertEqual(config.block_length, 85368)
        self.assertEqual(config.pilot_count, round(0.02 * 85368))
        self.assertAlmostEqual(config.overhead_factor, 1.0 - config.pilot_count / 85368)
        self.assertAlmostEqual(config.nt_ratio, config.pilot_count / 85368)

    def test_rejects_both_pilot_settings(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(nt=500, nt_fraction=0.01)

    def test_custom_channel_needs_delay_spread(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(channel="custom")

    def test_pf_power_override(self):
        self.assertAlmostEqual(SimConfigModel(pf_power_dbm=30.0).pf_power, 1.0)

    def test_rejects_gamma_of_one(self):
        with self.assertRaises(ValidationError):
            SimConfigModel(gamma=1.0)


if __name__ == '__main__':
    unittest.main()
