import math
import unittest

import numpy as np
import numpy.testing as npt

from utils.allocation.clustering import BlockSchedule, scheduled_ue_set
from utils.allocation.mumimo import LinkBudget, exhaustive_eigenmode_select
from utils.evaluation import (
    PfState,
    achieved_rate,
    block_rates,
    drop_metrics,
    evaluate_block,
    interference_covariance,
    metrics,
    network_channel,
    pf_init,
    pf_update,
    sic_stream_rates,
)
from utils.radio.topology import Drop


def complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def random_schedule(rng, num_ues, num_bs, ue_antennas, bs_antennas):
    precoders, powers, serving = {}, {}, {}
    for k in range(num_ues):
        rank = int(rng.integers(1, ue_antennas + 1))
        g = complex_normal(rng, (num_bs * bs_antennas, rank))
        precoders[k] = g / np.linalg.norm(g, axis=0)
        powers[k] = np.full(rank, float(rng.uniform(0.5, 5.0)))
        serving[k] = tuple(range(num_bs))
    return BlockSchedule(
        selected=(0,),
        plans=(),
        scheduled_ues=tuple(range(num_ues)),
        precoders=precoders,
        powers=powers,
        serving=serving,
    )


def single_ue_schedule(gain: complex, power: float) -> tuple:
    h = np.full((1, 1, 1, 1), gain, dtype=complex)
    schedule = BlockSchedule(
        selected=(0,), plans=(), scheduled_ues=(0,),
        precoders={0: np.ones((1, 1), dtype=complex)}, powers={0: np.array([power])}, serving={0: (0,)},
    )
    return h, schedule


class TestRates(unittest.TestCase):

    def test_single_stream(self):
        h, schedule = single_ue_schedule(1.0, 3.0)
        self.assertAlmostEqual(achieved_rate(0, schedule, h, 1.0), 2.0)
        self.assertAlmostEqual(achieved_rate(0, schedule, h, 1.0, overhead_factor=0.9), 1.8)

    def test_zero_power(self):
        h, schedule = single_ue_schedule(1.0, 0.0)
        self.assertEqual(achieved_rate(0, schedule, h, 1.0), 0.0)

    def test_unscheduled_ue(self):
        h, schedule = single_ue_schedule(1.0, 3.0)
        self.assertEqual(achieved_rate(1, schedule, np.concatenate([h, h]), 1.0), 0.0)

    def test_lone_ue_sees_noise_only(self):
        h, schedule = single_ue_schedule(1.0, 3.0)
        npt.assert_allclose(interference_covariance(0, schedule, h, 0.3), 0.3 * np.eye(1))

    def test_interference_covariance_matches_direct_sum(self):
        rng = np.random.default_rng(1)
        h = complex_normal(rng, (3, 2, 2, 2))
        schedule = random_schedule(rng, 3, 2, 2, 2)
        psi = interference_covariance(0, schedule, h, 0.1)
        expected = 0.1 * np.eye(2, dtype=complex)
        channel = np.hstack([h[0, 0], h[0, 1]])
        for m in (2, 1):
            g = schedule.precoders[m]
            expected += channel @ g @ np.diag(schedule.powers[m]) @ g.conj().T @ channel.conj().T
        npt.assert_allclose(psi, expected, atol=1e-12)
        npt.assert_allclose(psi, psi.conj().T, atol=1e-14)
        self.assertGreaterEqual(float(np.min(np.linalg.eigvalsh(psi))), 0.1 - 1e-12)

    def test_network_channel(self):
        h = complex_normal(np.random.default_rng(2), (2, 3, 2, 4))
        npt.assert_array_equal(network_channel(h, 1), np.hstack([h[1, 0], h[1, 1], h[1, 2]]))

    def test_rate_equals_sic_stream_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            ue_antennas = int(rng.integers(1, 5))
            num_ues = int(rng.integers(1, 4))
            h = complex_normal(rng, (num_ues, 2, ue_antennas, 2))
            schedule = random_schedule(rng, num_ues, 2, ue_antennas, 2)
            for k in range(num_ues):
                det_rate = achieved_rate(k, schedule, h, 0.2)
                sic_rate = float(np.sum(sic_stream_rates(k, schedule, h, 0.2)))
                self.assertAlmostEqual(det_rate, sic_rate, delta=1e-9)

    def test_block_rates(self):
        rng = np.random.default_rng(4)
        h = complex_normal(rng, (4, 1, 2, 2))
        schedule = random_schedule(rng, 2, 1, 2, 2)
        rates = block_rates(schedule, h, 0.5, 1.0)
        self.assertEqual(rates.shape, (4,))
        npt.assert_array_equal(rates[2:], [0.0, 0.0])
        self.assertTrue(np.all(rates[:2] > 0))

    def test_evaluate_block(self):
        rng = np.random.default_rng(5)
        h = complex_normal(rng, (3, 1, 2, 2))
        schedule = random_schedule(rng, 2, 1, 2, 2)
        result = evaluate_block(schedule, [1.5], np.array([True]), h, 0.5, 0.8)
        npt.assert_allclose(result.rates, block_rates(schedule, h, 0.5, 0.8))
        self.assertEqual(result.scheduled_ues, (0, 1))
        self.assertEqual(result.ranks, {k: g.shape[1] for k, g in schedule.precoders.items()})
        self.assertEqual(result.rates[2], 0.0)


def pf_drop(gains) -> Drop:
    gains = np.asarray(gains, dtype=float)
    return Drop(
        ue_positions=np.zeros((len(gains), 2)),
        home_bs=np.zeros(len(gains), dtype=int),
        distances=np.full(gains.shape, 100.0),
        bearings=np.zeros(gains.shape),
        shadow_db=np.zeros(gains.shape),
        large_scale_gain=gains,
        bs_order=np.argsort(-gains, axis=1, kind="stable"),
    )


class TestProportionalFair(unittest.TestCase):

    def test_init(self):
        state = pf_init(pf_drop([[0.5, 0.1], [0.05, 3.5]]), reference_power=2.0, noise_power=1.0)
        npt.assert_allclose(state.avg_rate, [1.0, 3.0])
        npt.assert_allclose(state.alpha * state.avg_rate, 1.0)
        self.assertEqual(state.t, 1)

    def test_update(self):
        state = PfState(avg_rate=np.array([1.0, 2.0, 4.0]))
        updated = pf_update(state, np.array([2.0, 2.0, 0.0]))
        npt.assert_allclose(updated.avg_rate, [1.1, 2.0, 3.6])
        self.assertEqual(updated.t, 2)

    def test_zero_gamma_freezes(self):
        state = PfState(avg_rate=np.array([1.0]), gamma=0.0)
        for _ in range(5):
            state = pf_update(state, np.array([7.0]))
        npt.assert_array_equal(state.avg_rate, [1.0])

    def test_rejects_non_positive_average(self):
        with self.assertRaises(ValueError):
            PfState(avg_rate=np.array([1.0, 0.0]))


class TestMetrics(unittest.TestCase):

    def test_last_half_only(self):
        trace = np.array([[9.0, 9.0], [9.0, 9.0], [1.0, 2.0], [3.0, 6.0]])
        result = drop_metrics(trace, num_bs=2)
        npt.assert_allclose(result.ue_rates, [2.0, 4.0])
        self.assertAlmostEqual(result.cell_rate, 3.0)

    def test_constant_and_zero(self):
        self.assertAlmostEqual(drop_metrics(np.full((6, 3), 1.5), 1).ue_rates[1], 1.5)
        self.assertEqual(drop_metrics(np.zeros((2, 3)), 3).cell_rate, 0.0)

    def test_rejects_odd_blocks(self):
        with self.assertRaises(ValueError):
            drop_metrics(np.ones((3, 2)), 1)

    def test_pooled_percentiles(self):
        traces = [np.tile(np.arange(1.0, 6.0), (2, 1)), np.tile(np.arange(6.0, 11.0), (2, 1))]
        pooled, cell_rate, percentiles = metrics(traces, num_bs=5)
        npt.assert_allclose(pooled, np.arange(1.0, 11.0))
        self.assertAlmostEqual(cell_rate, (15.0 / 5 + 40.0 / 5) / 2)
        npt.assert_allclose(percentiles, np.percentile(np.arange(1.0, 11.0), [5, 50, 95]))
        self.assertAlmostEqual(percentiles[1], 5.5)


class TestWholeStackAnchor(unittest.TestCase):
    """Two single-antenna BSs serving two single-antenna UEs as one cluster."""

    def setUp(self):
        rng = np.random.default_rng(11)
        self.h = complex_normal(rng, (2, 2, 1, 1))
        gains = np.abs(self.h[:, :, 0, 0]) ** 2
        self.drop = pf_drop(gains)
        self.link = LinkBudget(p_bs=10.0, noise_power=1.0, bs_antennas=1)

    def test_pipeline_matches_best_schedule(self):
        plan = exhaustive_eigenmode_select(0, (0, 1), (0, 1), self.drop, self.h, np.ones(2), None, self.link)
        schedule = scheduled_ue_set(np.array([True]), [plan], num_bs=2, bs_antennas=1)
        achieved = float(np.sum(block_rates(schedule, self.h, 1.0, 1.0)))
        # Whole network in one cluster with perfect CSI: nothing is left out of the estimate
        self.assertAlmostEqual(achieved, plan.estimated_rate, places=9)

        rows = [np.array([self.h[k, 0, 0, 0], self.h[k, 1, 0, 0]]) for k in range(2)]
        candidates = []
        for k in range(2):
            # Matched filter scaled so the stronger BS transmits at full power
            g = rows[k].conj() / np.linalg.norm(rows[k])
            power = 10.0 / np.max(np.abs(g) ** 2)
            candidates.append(math.log2(1.0 + power * abs(rows[k] @ g) ** 2))
        both = np.linalg.inv(np.vstack(rows))
        both = both / np.linalg.norm(both, axis=0)
        power = 10.0 / np.max(np.sum(np.abs(both) ** 2, axis=1))
        candidates.append(sum(math.log2(1.0 + power * abs(rows[k] @ both[:, k]) ** 2) for k in range(2)))
        self.assertAlmostEqual(achieved, max(candidates), places=9)

    def test_matched_filter_beats_grid_of_directions(self):
        # Same per-BS magnitudes as the matched filter, phases swept on a grid
        row = np.array([self.h[0, 0, 0, 0], self.h[0, 1, 0, 0]])
        g = row.conj() / np.linalg.norm(row)
        best = abs(row @ g) ** 2
        for phase in np.linspace(0.0, 2.0 * math.pi, 721):
            trial = np.abs(g) * np.exp(1j * np.array([-np.angle(row[0]), -np.angle(row[1]) + phase]))
            self.assertLessEqual(abs(row @ trial) ** 2, best * (1.0 + 1e-12))


if __name__ == '__main__':
    unittest.main()
