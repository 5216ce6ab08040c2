"""
Integration-like tests for the command functions and exit codes in main.
"""

import io
import json
import math
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from typing import List
from unittest.mock import patch

from spinfactor.config import EXIT_SUCCESS, EXIT_USAGE_ERROR, EXIT_VERIFICATION_FAILURE
from spinfactor.utils.schemas import build_run_config


def _run_main(argv: List[str]) -> int:
    from main import main

    with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
        return main(argv)


class TestCommandFunctions(unittest.TestCase):
    def test_decompose_tree(self) -> None:
        from main import cmd_decompose

        result = cmd_decompose(build_run_config({"graph": "path:5", "budget": 1}))
        self.assertTrue(result.get("success"))
        self.assertTrue(result["passed"])
        self.assertEqual(result["report"]["results"]["height"], 2)
        self.assertEqual(result["report"]["metadata"]["analysis_type"], "decompose")

    def test_decompose_partition(self) -> None:
        from main import cmd_decompose

        cfg = build_run_config({"graph": "grid:3x3", "linial_saks": True, "radius": 1, "seed": 2})
        result = cmd_decompose(cfg)
        self.assertTrue(result.get("success"))
        self.assertTrue(result["passed"])
        self.assertIn("partition", result["report"]["results"])

    def test_decompose_partition_radius_zero(self) -> None:
        from main import cmd_decompose

        cfg = build_run_config({"graph": "path:4", "linial_saks": True, "radius": 0})
        result = cmd_decompose(cfg)
        self.assertFalse(result["success"])
        self.assertEqual(result["exit_code"], EXIT_USAGE_ERROR)

    def test_analyze_hardcore(self) -> None:
        from main import cmd_analyze

        cfg = build_run_config({
            "graph": "path:4",
            "model": {"model": "hardcore", "lambda": 1.0},
            "budget": 1,
            "functions": 50,
        })
        result = cmd_analyze(cfg)
        self.assertTrue(result.get("success"))
        self.assertTrue(result["passed"])
        results = result["report"]["results"]
        self.assertGreaterEqual(results["composed_C"], results["audit"]["optimal_constant"])
        self.assertEqual(result["report"]["config"]["model"]["lambda"], 1.0)

    @patch("spinfactor.services.composer.tree_coverage")
    def test_analyze_fails_on_excess_coverage(self, mock_coverage) -> None:
        from main import cmd_analyze

        mock_coverage.return_value = {0: 9, 1: 1, 2: 1, 3: 1}
        for functions in (0, 20):
            cfg = build_run_config({
                "graph": "path:4",
                "model": {"model": "hardcore", "lambda": 1.0},
                "budget": 1,
                "functions": functions,
            })
            result = cmd_analyze(cfg)
            self.assertTrue(result.get("success"))
            self.assertFalse(result["passed"])
            self.assertTrue(result["report"]["results"]["coverage_exceeded"])
            self.assertIn("exceeds A", result["summary"])

    def test_analyze_needs_model(self) -> None:
        from main import cmd_analyze

        result = cmd_analyze(build_run_config({"graph": "path:3"}))
        self.assertFalse(result["success"])
        self.assertEqual(result["exit_code"], EXIT_USAGE_ERROR)

    def test_simulate_exact_and_fallback(self) -> None:
        from main import cmd_simulate

        model = {"model": "hardcore", "lambda": 1.0}
        exact = cmd_simulate(build_run_config({"graph": "path:2", "model": model}))
        self.assertTrue(exact["passed"])
        self.assertEqual(exact["report"]["results"]["t_mix"], 3)
        self.assertIsNone(exact["report"]["results"]["fallback"])

        fallback = cmd_simulate(build_run_config({
            "graph": "path:3", "model": model, "exact_mixing_cap": 2, "trials": 10, "horizon": 5000,
        }))
        self.assertTrue(fallback["success"])
        self.assertEqual(fallback["report"]["results"]["method"], "coupling")
        self.assertIsNotNone(fallback["report"]["results"]["fallback"])

        forced = cmd_simulate(build_run_config({
            "graph": "path:3", "model": model, "exact_mixing_cap": 2, "method": "exact",
        }))
        self.assertFalse(forced["success"])
        self.assertEqual(forced["exit_code"], EXIT_USAGE_ERROR)

    def test_simulate_reducible_chain_fails(self) -> None:
        from main import cmd_simulate

        cfg = build_run_config({"graph": "complete:3", "model": {"model": "coloring", "q": 3}})
        result = cmd_simulate(cfg)
        self.assertTrue(result["success"])
        self.assertFalse(result["passed"])
        self.assertEqual(result["report"]["results"]["t_mix"], "inf")

    def test_ssm_check(self) -> None:
        from main import cmd_ssm_check

        cfg = build_run_config({
            "graph": "path:5", "model": {"model": "hardcore", "lambda": 1.0}, "radius_cap": 3,
            "radius": 0, "budget": 1,
        })
        result = cmd_ssm_check(cfg)
        self.assertTrue(result["passed"])
        self.assertIn("ssm", result["report"]["results"])
        self.assertGreater(len(result["report"]["results"]["node_factorizations"]), 0)

    def test_phi_solve(self) -> None:
        from main import cmd_phi_solve

        result = cmd_phi_solve(build_run_config({"form": "log2", "t": 2.0}))
        self.assertTrue(result["passed"])
        self.assertTrue(math.isfinite(result["report"]["results"]["minimal_log_k0"]))

    def test_selftest(self) -> None:
        from main import cmd_selftest

        result = cmd_selftest(build_run_config({"seed": 0, "threads": 1}))
        self.assertTrue(result.get("success"))
        names = [check["name"] for check in result["report"]["results"]["checks"]]
        self.assertIn("decomposition-identity", names)
        self.assertTrue(result["passed"], result["summary"])


class TestMainExitCodes(unittest.TestCase):
    def test_success(self) -> None:
        self.assertEqual(_run_main(["phi-solve", "--form", "log2", "--t", "2"]), EXIT_SUCCESS)
        self.assertEqual(_run_main(["decompose", "--graph", "path:6"]), EXIT_SUCCESS)

    def test_usage_errors(self) -> None:
        self.assertEqual(_run_main([]), EXIT_USAGE_ERROR)
        self.assertEqual(_run_main(["analyze", "--graph", "path:3"]), EXIT_USAGE_ERROR)
        self.assertEqual(_run_main(["decompose", "--graph", "path:3", "--budget", "0"]), EXIT_USAGE_ERROR)
        self.assertEqual(_run_main(["analyze", "--graph", "path:3", "--config", "missing.json"]),
                         EXIT_USAGE_ERROR)

    def test_verification_failure(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "model.json"
            config.write_text(json.dumps({"model": "coloring", "q": 3}))
            code = _run_main(["simulate", "--graph", "complete:3", "--config", str(config)])
        self.assertEqual(code, EXIT_VERIFICATION_FAILURE)

    def test_report_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "model.json"
            config.write_text(json.dumps({"model": "hardcore", "lambda": 1.0}))
            first = Path(tmp) / "a.json"
            second = Path(tmp) / "b.json"
            for target in (first, second):
                code = _run_main(["analyze", "--graph", "path:4", "--config", str(config),
                                  "--budget", "1", "--functions", "20", "-o", str(target)])
                self.assertEqual(code, EXIT_SUCCESS)
            one, two = (json.loads(p.read_text()) for p in (first, second))
            self.assertEqual(one["results"], two["results"])
            self.assertEqual(one["metadata"]["analysis_type"], "analyze")


if __name__ == "__main__":
    unittest.main()
