#!/usr/bin/env python3
"""
SpinFactor command-line entry point.

Each ``cmd_*`` function takes a validated RunConfig and returns a result
dictionary with a ``success`` flag, so the same functions back both the CLI
and programmatic use. ``main`` maps results to exit codes: 0 success, 1
verification or property failure, 2 usage or input error.
"""

import argparse
import json
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore

from spinfactor.config import (
    EXIT_SUCCESS,
    EXIT_USAGE_ERROR,
    EXIT_VERIFICATION_FAILURE,
    IDENTITY_TOLERANCE,
    KNOWN_STRATEGIES,
)
from spinfactor.exceptions import (
    DomainError,
    InputValidationError,
    ResourceLimitError,
    SpinFactorError,
)
from spinfactor.models.graph import Graph, load_graph, path_graph
from spinfactor.models.spin_system import SpinSystem, hardcore
from spinfactor.services.composer import FactorisationComposer
from spinfactor.services.decomposition import (
    SeparatorTree,
    build_separator_tree,
    low_diameter_partition,
    subtree_separator_tree,
    verify_partition,
    verify_tree,
)
from spinfactor.services.exact_engine import (
    decomposition_identity_check,
    enumerate_gibbs,
    glauber_matrix,
    product_subadditivity_check,
    spectral_gap,
)
from spinfactor.services.factorisation_bounds import (
    spectral_independence_gap,
    spectral_independence_profile,
)
from spinfactor.services.glauber import coupling_mixing_estimate, exact_mixing_time
from spinfactor.services.phi_recursion import LOG2, phi_recursion_solve
from spinfactor.services.spatial_mixing import ssm_check, ssm_factorization_constant
from spinfactor.utils.data_processor import DataProcessor, graph_summary
from spinfactor.utils.logging_config import get_logger, setup_logging
from spinfactor.utils.parallel import resolve_thread_count
from spinfactor.utils.schemas import RunConfig, build_run_config, load_model_spec, validate_report

logger = get_logger("main")

data_processor = DataProcessor()


# Helpers


def _load_graph(cfg: RunConfig) -> Graph:
    source = cfg.graph or (cfg.model.graph if cfg.model is not None else None)
    if source is None:
        raise InputValidationError("a graph source is required (--graph or 'graph' in the model config)")
    return load_graph(source)


def _load_system(cfg: RunConfig) -> Tuple[Graph, SpinSystem]:
    if cfg.model is None:
        raise InputValidationError("a model config is required (--config)")
    graph = _load_graph(cfg)
    return graph, cfg.model.build(graph)


def _workers(cfg: RunConfig) -> int:
    return resolve_thread_count(cfg.threads)


def _tree_for(cfg: RunConfig, graph: Graph) -> SeparatorTree:
    if cfg.subtree:
        return subtree_separator_tree(graph, cfg.subtree_root)
    return build_separator_tree(graph, cfg.budget, cfg.leaf_size)


def _default_radius(cfg: RunConfig, system: SpinSystem) -> int:
    if cfg.radius is not None:
        return cfg.radius
    return 1 if system.model == "coloring" else 0


def _finish(
    cfg: RunConfig, analysis_type: str, results: Dict[str, Any], passed: bool, summary: str
) -> Dict[str, Any]:
    """Wrap, validate and (optionally) write the report."""
    report = data_processor.export_analysis_results(
        results, analysis_type, cfg.model_dump(mode="json", by_alias=True)
    )
    validate_report(report, analysis_type)
    if cfg.output:
        data_processor.write_report(report, cfg.output)
    return {"success": True, "passed": passed, "summary": summary, "report": report}


def _failure(exc: Exception) -> Dict[str, Any]:
    usage = isinstance(exc, (InputValidationError, DomainError, ResourceLimitError, OSError))
    return {
        "success": False,
        "error": str(exc),
        "exit_code": EXIT_USAGE_ERROR if usage else EXIT_VERIFICATION_FAILURE,
    }


# Commands


def cmd_decompose(cfg: RunConfig) -> Dict[str, Any]:
    """
    Build and verify a separator tree, or a low-diameter partition with
    ``linial_saks``.
    """
    try:
        graph = _load_graph(cfg)
        if cfg.linial_saks:
            r = cfg.radius if cfg.radius is not None else 1
            partition = low_diameter_partition(graph, r, cfg.seed, _workers(cfg), cfg.retry_cap)
            verification = verify_partition(graph, partition)
            results = {
                "graph": graph_summary(graph),
                "partition": partition.to_dict(),
                "verification": verification.to_dict(),
            }
            summary = (
                f"partition: {len(partition.clusters)} clusters, r={r}, "
                f"attempts={partition.attempts}, verification "
                f"{'passed' if verification.passed else 'FAILED'}"
            )
        else:
            tree = _tree_for(cfg, graph)
            verification = verify_tree(graph, tree)
            results = {
                "graph": graph_summary(graph),
                "tree": tree.to_dict(),
                "height": tree.height,
                "verification": verification.to_dict(),
            }
            summary = (
                f"tree: {len(tree.nodes)} nodes, height {tree.height}, verification "
                f"{'passed' if verification.passed else 'FAILED'}"
            )
        return _finish(cfg, "decompose", results, verification.passed, summary)
    except SpinFactorError as e:
        logger.error("decompose failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("decompose failed")
        return _failure(e)


def cmd_analyze(cfg: RunConfig) -> Dict[str, Any]:
    """
    Tree, per-node constants, composed multiplier and random-function audit
    against the exact optimal constant.
    """
    try:
        graph, system = _load_system(cfg)
        table = enumerate_gibbs(system, cfg.enumeration_cap)
        tree = _tree_for(cfg, graph)
        composer = FactorisationComposer(
            strategy_order=cfg.strategy,
            seed=cfg.seed,
            workers=_workers(cfg),
            enumeration_cap=cfg.enumeration_cap,
        )
        report = composer.compose(system, tree, _default_radius(cfg, system), cfg.kind, table)
        results = report.to_dict()
        passed = not report.coverage_exceeded
        summary = f"composed C = {report.composed_C:.6g} (A = {report.coverage_A:.3g}, r = {report.radius})"
        if report.coverage_exceeded:
            summary += f"; measured coverage {report.measured_coverage} exceeds A"
        if cfg.functions > 0:
            audit = composer.audit(report, table, cfg.functions, cfg.seed)
            results["audit"] = audit.to_dict()
            passed = audit.passed
            summary += f"; audit: {audit.violations} violations / {audit.functions} functions"
            if audit.optimal_constant is not None:
                summary += f"; optimal C = {audit.optimal_constant:.6g}"
        tags = sorted({tag for node in report.nodes for tag in (node.split_tag, node.block_tag)})
        summary += f"; constants: {', '.join(tags)}"
        if system.warnings:
            results["warnings"] = list(system.warnings)
        return _finish(cfg, "analyze", results, passed, summary)
    except SpinFactorError as e:
        logger.error("analyze failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("analyze failed")
        return _failure(e)


def cmd_simulate(cfg: RunConfig) -> Dict[str, Any]:
    """
    Exact or coupling mixing estimate. ``auto`` tries the exact matrix and
    falls back to coupling when the state-space cap is hit.
    """
    try:
        _, system = _load_system(cfg)
        fallback = None
        if cfg.method in ("auto", "exact"):
            try:
                estimate = exact_mixing_time(system, cap=cfg.exact_mixing_cap, workers=_workers(cfg))
            except ResourceLimitError as e:
                if cfg.method == "exact":
                    raise
                logger.warning("Exact mixing unavailable (%s); using coupling", e)
                fallback = str(e)
                estimate = coupling_mixing_estimate(
                    system, cfg.trials, cfg.horizon, cfg.seed, _workers(cfg)
                )
        else:
            estimate = coupling_mixing_estimate(system, cfg.trials, cfg.horizon, cfg.seed, _workers(cfg))

        results = estimate.to_dict()
        results["fallback"] = fallback
        if cfg.curve:
            data_processor.write_curve(estimate.tv_curve, estimate.curve_columns(), cfg.curve)
            results["curve"] = cfg.curve
        summary = f"{estimate.method}: t_mix = {estimate.t_mix}"
        if estimate.quantiles:
            summary += "; quantiles " + ", ".join(f"{q}: {v:g}" for q, v in estimate.quantiles.items())
        if estimate.censored:
            summary += " (censored)"
        return _finish(cfg, "simulate", results, math.isfinite(estimate.t_mix), summary)
    except SpinFactorError as e:
        logger.error("simulate failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("simulate failed")
        return _failure(e)


def cmd_ssm_check(cfg: RunConfig) -> Dict[str, Any]:
    """
    Measure spatial mixing decay; with a radius, also test the
    weak-correlation premise at every internal tree node.
    """
    try:
        graph, system = _load_system(cfg)
        table = enumerate_gibbs(system, cfg.enumeration_cap)
        estimate = ssm_check(
            system, cfg.radius_cap, cfg.pinning_budget, cfg.seed, _workers(cfg), table
        )
        results: Dict[str, Any] = {"ssm": estimate.to_dict()}
        if cfg.radius is not None:
            tree = _tree_for(cfg, graph)
            results["node_factorizations"] = [
                {
                    "index": node.index,
                    **ssm_factorization_constant(
                        system, node.vertices, node.separator, cfg.radius, cfg.gamma, table, cfg.seed
                    ).to_dict(),
                }
                for node in tree.internal_nodes()
            ]
        if estimate.vacuous:
            summary = "SSM holds vacuously (all deviations zero)"
        elif estimate.degenerate:
            summary = "SSM fit degenerate: too few usable distances"
        else:
            summary = (
                f"SSM fit C={estimate.fitted_C:.4g}, delta={estimate.fitted_delta:.4g}, "
                f"holds={estimate.holds}"
            )
        # negative findings are data, not failures
        return _finish(cfg, "ssm-check", results, True, summary)
    except SpinFactorError as e:
        logger.error("ssm-check failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("ssm-check failed")
        return _failure(e)


def cmd_phi_solve(cfg: RunConfig) -> Dict[str, Any]:
    """Tabulate the recursive multiplier bound and check its envelope."""
    try:
        result = phi_recursion_solve(cfg.t, cfg.log_k0, cfg.form, cfg.d, cfg.phi0)
        summary = (
            f"{result.form}: log k0 = {result.log_k0:.6g} (minimal {result.minimal_log_k0:.6g}), "
            f"envelope holds = {result.holds}"
        )
        return _finish(cfg, "phi-solve", result.to_dict(), result.holds, summary)
    except SpinFactorError as e:
        logger.error("phi-solve failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("phi-solve failed")
        return _failure(e)


def _selftest_checks(seed: int, workers: int) -> List[Dict[str, Any]]:
    processor = DataProcessor(seed)
    rng = np.random.default_rng(seed)
    checks: List[Dict[str, Any]] = []

    worst_identity = 0.0
    worst_subadditivity = math.inf
    for instance in processor.generate_instance_suite(count=12, max_vertices=5):
        table = enumerate_gibbs(instance["system"])
        vertices = list(table.free_vertices)
        outer = tuple(sorted(int(v) for v in rng.choice(vertices, size=max(1, len(vertices) - 1), replace=False)))
        inner = outer[: max(1, len(outer) // 2)]
        f = processor.random_test_functions(table.size, 1, "ent")[0]
        residual = decomposition_identity_check(table, outer, inner, f)
        worst_identity = max(worst_identity, abs(residual.variance), abs(residual.entropy or 0.0))
        isolated = [(v,) for v in vertices if instance["system"].graph.degree(v) == 0]
        if len(isolated) >= 2:
            slack = product_subadditivity_check(table, isolated, f, graph=instance["system"].graph)
            worst_subadditivity = min(worst_subadditivity, slack)
    checks.append({"name": "decomposition-identity", "value": worst_identity,
                   "passed": worst_identity < IDENTITY_TOLERANCE})
    checks.append({"name": "product-subadditivity", "value": worst_subadditivity,
                   "passed": worst_subadditivity >= -IDENTITY_TOLERANCE})

    system = hardcore(path_graph(3), 1.0)
    table = enumerate_gibbs(system)
    composer = FactorisationComposer(seed=seed, workers=workers)
    report = composer.compose(system, build_separator_tree(system.graph, 1), 0, "var", table)
    audit = composer.audit(report, table, 200, seed)
    checks.append({"name": "composition-audit", "value": report.composed_C, "passed": audit.passed})

    grid = load_graph("grid:3x3")
    checks.append({"name": "separator-tree", "value": None,
                   "passed": verify_tree(grid, build_separator_tree(grid, 3)).passed})

    path = hardcore(path_graph(4), 1.0)
    path_table = enumerate_gibbs(path)
    gap = spectral_gap(glauber_matrix(path_table))
    bound = spectral_independence_gap(spectral_independence_profile(path_table, workers), path.n)
    checks.append({"name": "spectral-independence", "value": bound.bound,
                   "passed": bound.bound is None or bound.bound <= gap + 1e-12})

    mixing = exact_mixing_time(hardcore(path_graph(2), 1.0))
    checks.append({"name": "exact-mixing", "value": mixing.t_mix, "passed": math.isfinite(mixing.t_mix)})

    phi = phi_recursion_solve(1.0, form=LOG2)
    checks.append({"name": "phi-envelope", "value": phi.log_k0, "passed": phi.holds})
    return checks


def cmd_selftest(cfg: RunConfig) -> Dict[str, Any]:
    """Quick battery of exact identities, audits and structural checks."""
    try:
        checks = _selftest_checks(cfg.seed, _workers(cfg))
        passed = all(check["passed"] for check in checks)
        failed = [check["name"] for check in checks if not check["passed"]]
        summary = f"selftest: {len(checks) - len(failed)}/{len(checks)} checks passed"
        if failed:
            summary += f" (failed: {', '.join(failed)})"
        return _finish(cfg, "selftest", {"checks": checks}, passed, summary)
    except SpinFactorError as e:
        logger.error("selftest failed: %s", e)
        return _failure(e)
    except Exception as e:
        logger.exception("selftest failed")
        return _failure(e)


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "decompose": cmd_decompose,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "ssm-check": cmd_ssm_check,
    "phi-solve": cmd_phi_solve,
    "selftest": cmd_selftest,
}


# Argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--graph", help="edge-list path or generator spec (path:8, grid:4x4, tree:2:3)")
    parser.add_argument("--config", help="JSON model config file")
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--threads", type=int, help="worker threads (default: env or CPU count)")
    parser.add_argument("--output", "-o", help="write the JSON report here")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")


def _add_tree_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--budget", type=int, help="separator size budget")
    parser.add_argument("--leaf-size", type=int, help="largest node left undivided")
    parser.add_argument("--subtree", action="store_true", default=None,
                        help="use the rooted subtree tree (tree graphs only)")
    parser.add_argument("--subtree-root", type=int, help="root vertex for --subtree")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinfactor",
        description="Approximate tensorization toolkit for spin systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    decompose = sub.add_parser("decompose", help="separator tree or low-diameter partition")
    _add_common(decompose)
    _add_tree_options(decompose)
    decompose.add_argument("--linial-saks", action="store_true", default=None,
                           help="build a low-diameter partition instead of a tree")
    decompose.add_argument("--r", dest="radius", type=int, help="partition radius")
    decompose.add_argument("--retry-cap", type=int, help="partition attempts before giving up")

    analyze = sub.add_parser("analyze", help="compose and audit an AT multiplier")
    _add_common(analyze)
    _add_tree_options(analyze)
    analyze.add_argument("--r", dest="radius", type=int, help="ball radius (default 1 for colourings, else 0)")
    analyze.add_argument("--kind", choices=("var", "ent"), help="variance or entropy")
    analyze.add_argument("--strategy", help=f"comma-separated order from {sorted(KNOWN_STRATEGIES)}")
    analyze.add_argument("--functions", type=int, help="random audit functions (0 skips the audit)")
    analyze.add_argument("--enumeration-cap", type=int, help="raw assignment cap")

    simulate = sub.add_parser("simulate", help="Glauber mixing time estimates")
    _add_common(simulate)
    mode = simulate.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="method", action="store_const", const="exact")
    mode.add_argument("--coupling", dest="method", action="store_const", const="coupling")
    simulate.add_argument("--trials", type=int, help="coupling trials")
    simulate.add_argument("--horizon", type=int, help="coupling step horizon")
    simulate.add_argument("--exact-mixing-cap", type=int, help="feasible-state cap for exact mixing")
    simulate.add_argument("--curve", help="write the TV / coalescence curve as CSV")

    ssm = sub.add_parser("ssm-check", help="strong spatial mixing measurement")
    _add_common(ssm)
    _add_tree_options(ssm)
    ssm.add_argument("--radius-cap", type=int, help="largest distance measured")
    ssm.add_argument("--pinning-budget", type=int, help="pinnings examined before sampling")
    ssm.add_argument("--r", dest="radius", type=int, help="also test node factorizations at this radius")
    ssm.add_argument("--gamma", type=float, help="factorization target parameter (>= 10)")

    phi = sub.add_parser("phi-solve", help="recursive multiplier bound table")
    phi.add_argument("--form", choices=("log-logt", "log2"))
    phi.add_argument("--t", type=float, help="exponent t")
    phi.add_argument("--d", type=float, help="degree parameter of the log2 form")
    phi.add_argument("--log-k0", type=float, help="natural log of the base size k0")
    phi.add_argument("--phi0", type=float, help="phi(k0)")
    phi.add_argument("--seed", type=int)
    phi.add_argument("--output", "-o")
    phi.add_argument("--log-level", default=None)

    selftest = sub.add_parser("selftest", help="quick internal consistency battery")
    selftest.add_argument("--seed", type=int)
    selftest.add_argument("--threads", type=int)
    selftest.add_argument("--output", "-o")
    selftest.add_argument("--log-level", default=None)
    return parser


CONFIG_KEYS = (
    "graph", "budget", "leaf_size", "radius", "kind", "gamma", "seed", "threads", "functions",
    "enumeration_cap", "exact_mixing_cap", "trials", "horizon", "radius_cap", "pinning_budget",
    "retry_cap", "linial_saks", "subtree", "subtree_root", "method", "form", "t", "d", "log_k0",
    "phi0", "output", "curve",
)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    strategy = getattr(args, "strategy", None)
    if strategy:
        values["strategy"] = [s.strip() for s in strategy.split(",") if s.strip()]
    config_path = getattr(args, "config", None)
    if config_path:
        values["model"] = load_model_spec(config_path)
    return build_run_config(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SUCCESS if exc.code == 0 else EXIT_USAGE_ERROR
    if args.log_level:
        setup_logging(args.log_level)

    try:
        cfg = config_from_args(args)
    except SpinFactorError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE_ERROR

    result = COMMANDS[args.command](cfg)
    if not result["success"]:
        print(f"error: {result['error']}", file=sys.stderr)
        return int(result["exit_code"])
    print(result["summary"])
    if not cfg.output:
        print(json.dumps(result["report"]["results"], indent=2, sort_keys=True))
    return EXIT_SUCCESS if result["passed"] else EXIT_VERIFICATION_FAILURE


if __name__ == "__main__":
    sys.exit(main())
