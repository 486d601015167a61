# -*- coding: utf-8 -*-
# chuk_metastable/cli.py
"""
Command-line front end.

    chuk-metastable analyze  CHAIN [--n-grid 6:16:2] [--diagnostics]
    chuk-metastable rate     CHAIN --mu 0.5,0.25,0.25 [--flow FLOW]
    chuk-metastable gamma    CHAIN --level 1 --omega 0.5,0.5
    chuk-metastable deriv    CHAIN --mu … --nu … [--nu …]
    chuk-metastable recover  [CHAIN | --oracle-dir DIR] --mode dv|bfg
    chuk-metastable simulate CHAIN --t 1e4 --replicas 200 [--observable …]
    chuk-metastable examples

CHAIN is a chain file or a bundled example name. Exit codes: 0 success,
2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .calculus import first_derivative, finite_difference_report, second_derivative, tilt_derivative
from .catalog import list_examples, load_example_chain, load_example_family
from .config import ENV_LOG_LEVEL, load_settings
from .exceptions import (
    ChainValidationError,
    MetastableError,
    NotIrreducibleError,
    NotStrictlyPositiveError,
    NumericalError,
)
from .formats import (
    csv_text,
    direction_from_values,
    dumps,
    family_to_document,
    load_direction,
    load_flow,
    load_measure,
    measure_from_values,
    write_text,
)
from .gamma import gamma_probe_level_p, pointwise_limit_probe
from .grid import NGrid, validate_grid_spec
from .hierarchy import build_tree, lumpability_check, tree_diagnostics
from .identify import (
    BfgOracle,
    DvOracle,
    RecordingOracle,
    TabulatedBfgOracle,
    TabulatedDvOracle,
    check_recovery,
    discover_classes,
    recover_from_bfg,
    recover_reversible,
)
from .models import ChainSpec, Flow, ProbabilityVector, RunConfig, SignedMeasure
from .rate_functionals import bfg_rate, dv_rate, optimal_current, tilt_solver
from .sim import empirical_pair, occupation_integral, simulate_replicas, variance_from_samples
from .types import (
    LUMPABILITY_TOL,
    MIXTURE_TOL,
    RECOVERY_TOL,
    ProbeCandidate,
    RecoveryMode,
    Subcommand,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

TOLERANCES: Dict[str, float] = {
    "recovery": RECOVERY_TOL,
    "lumpability": LUMPABILITY_TOL,
    "mixture": MIXTURE_TOL,
}

# (document for JSON, optional CSV text that replaces it unless --json)
Artifact = Tuple[Any, Optional[str]]


# ─────────────────────────────────────────────────────────────────────
# Argument parsing
# ─────────────────────────────────────────────────────────────────────


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _tolerance(text: str) -> Tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"tolerance {name!r} is not a number") from e


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", dest="json_output", action="store_true", help="force JSON on stdout")
    parser.add_argument("--output", help="write the artifact to this file instead of stdout")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument(
        "--tol",
        action="append",
        type=_tolerance,
        default=[],
        metavar="NAME=VALUE",
        help=f"override a tolerance ({', '.join(sorted(TOLERANCES))})",
    )


def _grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-grid", help="exponent range start:end[:base]")
    parser.add_argument("--precision-bits", type=int, help="mantissa bits for large-n solves")


def _measure_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--mu", type=_floats, help="measure as weights in declared state order")
    group.add_argument("--measure", dest="measure_path", help="measure file")
    parser.add_argument("--n", type=float, help="instantiate a family at this n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chuk-metastable",
        description="Rate functionals, metastable hierarchies and Γ-expansions of finite Markov chains.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", help="build the metastable tree of a family")
    p.add_argument("chain")
    _grid_flags(p)
    p.add_argument("--diagnostics", action="store_true", help="add measure and lumpability checks")
    _common(p)

    p = sub.add_parser("rate", help="DV and BFG functionals of a fixed chain")
    p.add_argument("chain")
    _measure_flags(p)
    p.add_argument("--flow", dest="flow_path", help="flow file for the BFG functional")
    _common(p)

    p = sub.add_parser("gamma", help="Γ-expansion probes along an n-grid")
    p.add_argument("chain")
    p.add_argument("--level", type=int, default=1, help="0 probes the pointwise limit")
    p.add_argument("--omega", type=_floats, help="well weights at the chosen level")
    p.add_argument(
        "--candidate",
        choices=[c.value for c in ProbeCandidate],
        default=ProbeCandidate.HARMONIC.value,
    )
    p.add_argument("--mu", type=_floats, help="measure for the level-0 probe")
    p.add_argument("--measure", dest="measure_path")
    p.add_argument("--flow", dest="flow_path", help="flow for the level-0 probe")
    _grid_flags(p)
    _common(p)

    p = sub.add_parser("deriv", help="derivatives of the DV functional")
    p.add_argument("chain")
    _measure_flags(p)
    p.add_argument("--nu", action="append", type=_floats, default=[], help="direction (repeatable)")
    p.add_argument("--direction", dest="direction_paths", action="append", default=[])
    _common(p)

    p = sub.add_parser("recover", help="recover a chain from a rate-functional oracle")
    p.add_argument("chain", nargs="?", help="hidden chain for a self-test")
    p.add_argument("--mode", choices=[m.value for m in RecoveryMode], default=RecoveryMode.DV.value)
    p.add_argument("--oracle-dir", help="replay a recorded oracle table")
    p.add_argument("--record", dest="record_dir", help="save every oracle query to this directory")
    p.add_argument("--recovered", dest="recovered_path", help="write the recovered chain file")
    p.add_argument("--samples", type=int, default=20, help="random points in the recovery check")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=float, help="instantiate a hidden family at this n")
    _common(p)

    p = sub.add_parser("simulate", help="exact simulation and empirical pairs")
    p.add_argument("chain")
    p.add_argument("--t", dest="horizon", type=float, default=1e4)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--start", help="start state; π-distributed when omitted")
    p.add_argument("--observable", type=_floats, help="f for the variance estimate")
    p.add_argument("--csv", dest="csv_path", help="per-replica CSV file")
    p.add_argument("--n", type=float, help="instantiate a family at this n")
    _common(p)

    p = sub.add_parser("examples", help="list bundled example chains")
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """
    Turn parsed arguments into a validated RunConfig; defaults come from the environment.

    Raises:
        ChainValidationError: bad grid or unknown tolerance name
        ValidationError: a field fails RunConfig validation
    """
    settings = load_settings()
    grid = validate_grid_spec(getattr(args, "n_grid", None) or settings.n_grid)
    tolerances = dict(getattr(args, "tol", []) or [])
    unknown = sorted(set(tolerances) - set(TOLERANCES))
    if unknown:
        raise ChainValidationError(
            f"unknown tolerance(s) {unknown}; known: {', '.join(sorted(TOLERANCES))}"
        )

    fields: Dict[str, Any] = {
        "subcommand": args.subcommand,
        "grid_start": grid.start,
        "grid_end": grid.end,
        "grid_base": grid.base,
        "precision_bits": getattr(args, "precision_bits", None) or settings.precision_bits,
        "seed": settings.seed if getattr(args, "seed", None) is None else args.seed,
        "tolerances": tolerances,
        "json_output": args.json_output,
        "output": args.output,
    }
    passthrough = {
        "chain": "chain",
        "mu": "measure",
        "measure_path": "measure_path",
        "flow_path": "flow_path",
        "nu": "directions",
        "direction_paths": "direction_paths",
        "level": "level",
        "omega": "omega",
        "candidate": "candidate",
        "mode": "mode",
        "oracle_dir": "oracle_dir",
        "record_dir": "record_dir",
        "recovered_path": "recovered_path",
        "samples": "samples",
        "horizon": "horizon",
        "replicas": "replicas",
        "start": "start",
        "observable": "observable",
        "csv_path": "csv_path",
        "n": "n",
        "diagnostics": "diagnostics",
    }
    for attr, field in passthrough.items():
        value = getattr(args, attr, None)
        if value is not None:
            fields[field] = value
    return RunConfig(**fields)


# ─────────────────────────────────────────────────────────────────────
# Shared input handling
# ─────────────────────────────────────────────────────────────────────


def _tol(config: RunConfig, name: str) -> float:
    return config.tolerances.get(name, TOLERANCES[name])


def _grid(config: RunConfig) -> NGrid:
    return NGrid(start=config.grid_start, end=config.grid_end, base=config.grid_base)


def _require_chain(config: RunConfig) -> str:
    if not config.chain:
        raise ChainValidationError(f"{config.subcommand.value} needs a chain file or example name")
    return config.chain


def _measure(config: RunConfig, states: Sequence[str]) -> ProbabilityVector:
    if config.measure is not None:
        return measure_from_values(config.measure, states)
    if config.measure_path:
        return load_measure(config.measure_path, states)
    raise ChainValidationError("a measure is required (--mu or --measure)")


def _directions(config: RunConfig, states: Sequence[str]) -> List[SignedMeasure]:
    directions = [direction_from_values(v, states) for v in config.directions]
    directions += [load_direction(path, states) for path in config.direction_paths]
    if not directions:
        raise ChainValidationError("at least one direction is required (--nu or --direction)")
    if len(directions) > 2:
        raise ChainValidationError(f"at most two directions are used, got {len(directions)}")
    return directions


# ─────────────────────────────────────────────────────────────────────
# Subcommands
# ─────────────────────────────────────────────────────────────────────


def _analyze(config: RunConfig) -> Artifact:
    family = load_example_family(_require_chain(config))
    grid = _grid(config)
    tree = build_tree(family, grid, config.precision_bits)
    document: Dict[str, Any] = {
        "states": family.states,
        "depth": tree.depth,
        "exponents": [lvl.timescale.exponent for lvl in tree.levels if lvl.timescale is not None],
        "tree": tree,
    }
    if config.diagnostics:
        document["diagnostics"] = tree_diagnostics(family, tree, grid, config.precision_bits)
        document["lumpability"] = [
            lumpability_check(
                family, tree, p, grid.largest, config.precision_bits, _tol(config, "lumpability")
            )
            for p in range(1, len(tree.levels))
        ]
    return document, None


def _rate(config: RunConfig) -> Artifact:
    chain = load_example_chain(_require_chain(config), config.n)
    mu = _measure(config, chain.states)
    document: Dict[str, Any] = {"dv": dv_rate(chain, mu), "bfg": None, "tilt": None, "optimal_current": None}
    if config.flow_path:
        document["bfg"] = bfg_rate(chain, mu, load_flow(config.flow_path))
    try:
        document["tilt"] = tilt_solver(chain, mu).values
        document["optimal_current"] = optimal_current(chain, mu).to_records()
    except (NotStrictlyPositiveError, NotIrreducibleError) as e:
        # boundary or reducible inputs have no tilt; ℐ is still defined
        logger.info("No tilt for this measure", extra={"reason": str(e)})
    return document, None


def _gamma(config: RunConfig) -> Artifact:
    family = load_example_family(_require_chain(config))
    grid = _grid(config)
    if config.level == 0:
        mu = _measure(config, family.states)
        J = load_flow(config.flow_path) if config.flow_path else Flow.zero()
        report = pointwise_limit_probe(family, mu, J, grid)
        rows = [(v.n, v.value, report.target) for v in report.values]
        return report, csv_text(["n", "value", "target"], rows)

    if config.omega is None:
        raise ChainValidationError("--omega is required for levels p ≥ 1")
    tree = build_tree(family, grid, config.precision_bits)
    report = gamma_probe_level_p(
        family, tree, config.level, config.omega, grid, config.candidate, config.precision_bits
    )
    rows = [(v.n, v.scale, v.value, report.target) for v in report.values]
    return report, csv_text(["n", "theta", "value", "target"], rows)


def _deriv(config: RunConfig) -> Artifact:
    chain = load_example_chain(_require_chain(config), config.n)
    mu = _measure(config, chain.states)
    directions = _directions(config, chain.states)
    nu1 = directions[0]
    nu2 = directions[-1]
    document = {
        "first_derivative": first_derivative(chain, mu, nu1),
        "second_derivative": second_derivative(chain, mu, nu1, nu2),
        "tilt_derivative": tilt_derivative(chain, mu, nu1).values,
        "finite_differences": finite_difference_report(chain, mu, nu1),
    }
    return document, None


def _oracle(config: RunConfig) -> Tuple[Any, Optional[ChainSpec]]:
    if config.oracle_dir:
        table = TabulatedDvOracle if config.mode == RecoveryMode.DV else TabulatedBfgOracle
        return table.from_directory(config.oracle_dir), None
    hidden = load_example_chain(_require_chain(config), config.n)
    oracle = DvOracle(hidden) if config.mode == RecoveryMode.DV else BfgOracle(hidden)
    return oracle, hidden


def _recover(config: RunConfig) -> Artifact:
    oracle, hidden = _oracle(config)
    if config.record_dir:
        oracle = RecordingOracle(oracle)

    discovery = None
    if config.mode == RecoveryMode.DV:
        discovery = discover_classes(oracle)
        recovered = recover_reversible(oracle, discovery=discovery)
    else:
        recovered = recover_from_bfg(oracle)
    report = check_recovery(
        oracle, recovered, config.samples, config.seed, hidden, _tol(config, "recovery")
    )

    if isinstance(oracle, RecordingOracle):
        oracle.save(config.record_dir)
    if config.recovered_path:
        write_text(dumps(family_to_document(recovered)), config.recovered_path)
    document = {
        "mode": config.mode.value,
        "recovered": family_to_document(recovered),
        "discovery": discovery,
        "report": report,
        "oracle_calls": oracle.calls,
    }
    return document, None


def _simulate(config: RunConfig) -> Artifact:
    chain = load_example_chain(_require_chain(config), config.n)
    paths = simulate_replicas(chain, config.horizon, config.replicas, config.seed, config.start)
    replicas = []
    rows = []
    for i, path in enumerate(paths):
        L, Q = empirical_pair(path)
        replicas.append(
            {"start": path.initial, "jumps": len(path.jumps), "measure": L.weights, "flow": Q.to_records()}
        )
        rows.append([i, path.initial, len(path.jumps), *L.to_array(chain.states).tolist()])

    document: Dict[str, Any] = {
        "horizon": config.horizon,
        "seed": config.seed,
        "replicas": replicas,
        "variance": None,
    }
    if config.observable is not None and len(paths) >= 2:
        scale = math.sqrt(config.horizon)
        values = [occupation_integral(path, config.observable) / scale for path in paths]
        document["variance"] = variance_from_samples(values, config.horizon)
    if config.csv_path:
        header = ["replica", "start", "jumps", *[f"L_{s}" for s in chain.states]]
        write_text(csv_text(header, rows), config.csv_path)
    return document, None


def _examples(config: RunConfig) -> Artifact:
    names = list_examples()
    return names, "\n".join(names)


HANDLERS = {
    Subcommand.ANALYZE: _analyze,
    Subcommand.RATE: _rate,
    Subcommand.GAMMA: _gamma,
    Subcommand.DERIV: _deriv,
    Subcommand.RECOVER: _recover,
    Subcommand.SIMULATE: _simulate,
    Subcommand.EXAMPLES: _examples,
}


# ─────────────────────────────────────────────────────────────────────
# Entry points
# ─────────────────────────────────────────────────────────────────────


def run(config: RunConfig) -> int:
    """Dispatch one subcommand and write its artifact; returns the exit code."""
    try:
        document, text = HANDLERS[config.subcommand](config)
        if config.json_output or text is None:
            text = dumps(document)
        write_text(text, config.output)
        return EXIT_OK
    except NumericalError as e:
        logger.error("Numerical failure", extra={"subcommand": config.subcommand.value})
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MetastableError, ValidationError, ValueError, OSError) as e:
        logger.error("Invalid input", extra={"subcommand": config.subcommand.value})
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID


def main(argv: Optional[Sequence[str]] = None) -> int:
    from . import configure_logging

    args = build_parser().parse_args(argv)
    level = args.log_level or os.getenv(ENV_LOG_LEVEL) or "WARNING"
    try:
        configure_logging(level)
        config = config_from_args(args)
    except (MetastableError, ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
