# tests/test_cli.py

import csv
import json
import logging
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_path = os.path.join(project_root, 'src')
if src_path not in sys.path:
    sys.path.insert(0, src_path)

from naevo.cli import main  # type: ignore
from naevo.reporting import read_summary  # type: ignore
from naevo.weighted_time import Trajectory  # type: ignore

logging.disable(logging.CRITICAL)

SCALAR_CONFIG = os.path.join(project_root, "config", "scalar_integration.json")


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp(prefix="naevo_cli_")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
        logging.disable(logging.CRITICAL)

    def _config(self, overrides: dict) -> str:
        with open(SCALAR_CONFIG) as f:
            config = json.load(f)
        for section, values in overrides.items():
            if isinstance(values, dict) and isinstance(config.get(section), dict):
                config[section].update(values)
            else:
                config[section] = values
        path = os.path.join(self.tmp, "config.json")
        with open(path, "w") as f:
            json.dump(config, f)
        return path

    def _run(self, *argv: str, config: str = SCALAR_CONFIG, out: str = "out") -> int:
        code = main(list(argv) + ["--config", config, "--out", os.path.join(self.tmp, out), "--quiet"])
        logging.disable(logging.CRITICAL)
        return code

    def _out(self, *parts: str) -> str:
        return os.path.join(self.tmp, *parts)

    def test_solve_scalar_integration_is_a_ramp(self):
        self.assertEqual(self._run("solve", "--emit-plot-data"), 0)
        u = Trajectory.from_csv(self._out("out", "solution.csv"))
        t = u.grid.times
        np.testing.assert_allclose(u.values[:, 0].real, np.maximum(t, 0.0), atol=0.011)
        self.assertTrue(os.path.exists(self._out("out", "plot_data", "norms.csv")))
        summary = read_summary(self._out("out", "summary.txt"))
        self.assertEqual(summary["kind"], "families")
        self.assertAlmostEqual(float(summary["c0"]), 1.0)

    def test_reruns_are_byte_identical(self):
        self.assertEqual(self._run("solve", out="first"), 0)
        self.assertEqual(self._run("solve", out="second"), 0)
        for name in ("solution.csv", "summary.txt", "report.txt"):
            with open(self._out("first", name), "rb") as a, open(self._out("second", name), "rb") as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_check_writes_certificate(self):
        self.assertEqual(self._run("check"), 0)
        summary = read_summary(self._out("out", "summary.txt"))
        self.assertEqual(float(summary["rho0"]), 1.0)
        self.assertAlmostEqual(float(summary["c0"]), 1.0)
        self.assertTrue(os.path.exists(self._out("out", "certificate_witness.csv")))
        self.assertTrue(os.path.exists(self._out("out", "certificate_report.txt")))

    def test_missing_config_exits_1(self):
        self.assertEqual(self._run("solve", config=self._out("missing.json")), 1)

    def test_negative_seed_exits_1(self):
        code = main(["solve", "--config", SCALAR_CONFIG, "--out", self._out("out"), "--seed", "-1", "--quiet"])
        logging.disable(logging.CRITICAL)
        self.assertEqual(code, 1)

    def test_uncertifiable_problem_exits_2(self):
        config = self._config({"problem": {"M0": {"type": "constant", "matrix": "zero"},
                                           "M1": {"type": "constant", "matrix": [[-1.0]]}}})
        self.assertEqual(self._run("check", config=config), 2)

    def test_failed_check_exits_4(self):
        config = self._config({"solver": {"bound_slack": -0.9}, "verification": {"checks": ["norm_bound"]}})
        self.assertEqual(self._run("verify", config=config), 4)
        with open(self._out("out", "verification.txt")) as f:
            self.assertIn("FAIL", f.read())
        self.assertEqual(read_summary(self._out("out", "summary.txt"))["all_passed"], "false")

    def test_verify_passes_on_scalar_integration(self):
        config = self._config({"verification": {"checks": ["causality", "norm_bound", "adjoint_identity", "oracle"]}})
        self.assertEqual(self._run("verify", config=config), 0)
        self.assertEqual(read_summary(self._out("out", "summary.txt"))["all_passed"], "true")

    def test_empty_check_list_exits_0(self):
        config = self._config({"verification": {"checks": []}})
        self.assertEqual(self._run("verify", config=config), 0)
        with open(self._out("out", "verification.txt")) as f:
            self.assertIn("(no checks requested)", f.read())

    def test_sweep_rho(self):
        self.assertEqual(self._run("sweep-rho", "--rho", "4", "1", "2"), 0)
        with open(self._out("out", "sweep_rho.csv"), newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(len(rows), 4)
        self.assertEqual([float(r[0]) for r in rows[1:]], [1.0, 2.0, 4.0])
        self.assertEqual([r[-1] for r in rows[1:]], ["ok"] * 3)
        self.assertTrue(os.path.exists(self._out("out", "sweep_report.txt")))

    def test_mixed_type_example_on_default_grid(self):
        # The default grid [-1, 3] with n = 400 has t = 0 as a grid point.
        path = os.path.join(self.tmp, "seed_only.json")
        with open(path, "w") as f:
            json.dump({"general": {"seed": 0}}, f)
        self.assertEqual(self._run("example", "mixed-type", config=path), 0)
        summary = read_summary(self._out("out", "summary.txt"))
        self.assertEqual(summary["kind"], "mixed_type")
        self.assertGreater(float(summary["step_accretivity_min"]), 0.0)
        self.assertTrue(os.path.exists(self._out("out", "region_map.csv")))

    def test_sweep_needs_two_values(self):
        self.assertEqual(self._run("sweep-rho", "--rho", "2", "2"), 3)


if __name__ == '__main__':
    unittest.main()
