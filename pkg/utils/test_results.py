import tempfile
import unittest
from pathlib import Path

import numpy as np
import yaml
from returns.pipeline import is_successful

from models.results_model import RESULT_COLUMNS, ResultsRowModel
from models.scenario_model import ScenarioModel
from utils.allocation.clustering import scheduled_ue_set
from utils.allocation.mumimo import ClusterPlan
from utils.radio.topology import build_scenario, drop_ues
from utils.results import append_trace, emit_results, plan_trace, read_results, save_drop


def sample_row(**overrides) -> ResultsRowModel:
    values = dict(
        scheme="dc", ue_antennas=4, bs_antennas=4, j_max=3, l_max=None, beta=0.5, nt_ratio=0.0,
        csi="perfect", channel="epa", drops=2, blocks=4, cell_rate=3.14159265, p5=0.123456789,
        p50=1.5, p95=4.0, rank_distribution=[60.0, 25.0, 10.0, 5.0, 0.0, 0.0, 0.0, 0.0],
        cand_p5=230.0, cand_p50=249.0, cand_p95=263.0, dominance_fraction=1.0,
        max_power_ratio=1.0, power_violations=0,
    )
    values.update(overrides)
    return ResultsRowModel(**values)


class TestResultsFile(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_header_and_one_row(self):
        path = self.dir / "results.csv"
        self.assertTrue(is_successful(emit_results([sample_row()], path)))
        lines = path.read_text().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[0], ",".join(RESULT_COLUMNS))
        self.assertIn("3.14159", lines[1])
        self.assertIn("0.123457", lines[1])

    def test_read_back(self):
        path = self.dir / "results.csv"
        rows = [sample_row(), sample_row(scheme="scp", l_max=2, dominance_fraction=None)]
        emit_results(rows, path)
        parsed = read_results(path).unwrap()
        self.assertEqual(len(parsed), 2)
        self.assertEqual(parsed[0].scheme, "dc")
        self.assertIsNone(parsed[0].l_max)
        self.assertEqual(parsed[1].l_max, 2)
        self.assertIsNone(parsed[1].dominance_fraction)
        self.assertAlmostEqual(parsed[0].cell_rate, 3.14159, places=5)
        self.assertAlmostEqual(sum(parsed[0].rank_distribution), 100.0)

    def test_empty_table(self):
        self.assertFalse(is_successful(emit_results([], self.dir / "results.csv")))

    def test_unwritable_path(self):
        result = emit_results([sample_row()], self.dir / "missing" / "results.csv")
        self.assertFalse(is_successful(result))
        self.assertIn("missing", result.failure())

    def test_rank_shares_must_total_100(self):
        with self.assertRaises(ValueError):
            sample_row(rank_distribution=[50.0] + [0.0] * 7)

    def test_ranks_above_ue_antennas_stay_zero(self):
        with self.assertRaises(ValueError):
            sample_row(ue_antennas=2, rank_distribution=[60.0, 30.0, 10.0] + [0.0] * 5)
        row = sample_row(ue_antennas=2, rank_distribution=[70.0, 30.0] + [0.0] * 6)
        self.assertEqual(row.to_record()["rank_3"], 0.0)


class TestTraces(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_plan_trace_documents(self):
        plan = ClusterPlan(
            cluster_id=4, bs_set=(0, 1), scheduled_ues=(2,),
            precoders={2: np.ones((4, 2), dtype=complex) / 2.0}, ranks={2: 2}, power=1.0, estimated_rate=2.5,
        )
        schedule = scheduled_ue_set(np.array([True]), [plan], num_bs=2, bs_antennas=2)
        path = self.dir / "trace.yml"
        append_trace(path, [plan_trace(0, 0, schedule)])
        append_trace(path, [plan_trace(0, 1, schedule)])

        documents = list(yaml.safe_load_all(path.read_text()))
        self.assertEqual([d["block"] for d in documents], [0, 1])
        self.assertEqual(documents[0]["clusters"][0]["bs_set"], [0, 1])
        self.assertEqual(documents[0]["clusters"][0]["ranks"], {2: 2})
        self.assertEqual(documents[0]["clusters"][0]["estimated_rate"], 2.5)

    def test_save_drop(self):
        drop = drop_ues(build_scenario(ScenarioModel(site_count=1, ues_per_bs=2)), 0)
        path = self.dir / "drop.yml"
        self.assertTrue(is_successful(save_drop(drop, path)))
        data = yaml.safe_load(path.read_text())
        self.assertEqual(len(data["ues"]), 6)
        self.assertEqual(data["ues"][3]["anchor"], int(drop.anchor[3]))
        self.assertEqual(len(data["ues"][0]["gains"]), 3)


if __name__ == '__main__':
    unittest.main()
