#
#    PTP Timing Verifier: estimates timing distributions of ROS-style robot control systems from traces and verifies timeliness queries on probabilistic timed programs.
#    Copyright (C) 2025 Ferenc Acs <pass.schist2954@eagereverest.com>
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU Affero General Public License as
#    published by the Free Software Foundation, either version 3 of the
#    License, or (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU Affero General Public License for more details.
#
#    You should have received a copy of the GNU Affero General Public License
#    along with this program.  If not, see <https://www.gnu.org/licenses/>.
#


import argparse
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

from tqdm import tqdm

from .checker import (METHODS, check_ladder_precondition, compare, granularity_ladder, ladder_is_monotone,
                      parse_query)
from .config import Config
from .errors import Diagnostic, LadderError, TimingError, errors_only
from .pipeline import bind_statistics, compile_pipeline, load_pipeline, pipeline_from_dict, validate_pipeline
from .prism_io import export_prism, parse_prism
from .ptp import Ptp, dump_ptp, load_ptp, ptp_from_dict, validate_ptp
from .ros_graph import graph_from_dict, load_graph, validate_graph
from .simulator import load_scenario, simulate
from .stats import DEFAULT_PLATEAU_TOLERANCE, build_histogram, read_stats, summaries, write_stats
from .trace import group_samples, pair_events, read_trace, write_trace

logger = logging.getLogger(__name__)


class CliFailure(Exception):
    """A problem with the files named on the command line (exit code 1)."""


def setup_logging(verbose: bool, quiet: bool):
    log_level = logging.INFO
    if verbose:
        log_level = logging.DEBUG
    elif quiet:
        log_level = logging.WARNING

    logging.basicConfig(level=log_level,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    # Library chatter only in verbose mode
    if not verbose:
        logging.getLogger("lark").setLevel(logging.WARNING)


def granularity_list(text: str) -> List[int]:
    try:
        gs = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"granularities must be comma-separated integers, got '{text}'")
    try:
        check_ladder_precondition(gs)
    except LadderError as e:
        raise argparse.ArgumentTypeError(str(e))
    return gs


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got '{text}'")
    return value


def bin_probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"expected a probability in [0, 1), got '{text}'")
    return value


def nonnegative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not 0 <= value < float("inf"):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got '{text}'")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'")
    return value


def read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CliFailure(f"cannot read {path}: {e.strerror if isinstance(e, OSError) else e}")


def write_atomically(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over the target."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile("w", encoding="utf-8", dir=target.parent, prefix=f".{target.name}.",
                                         suffix=".tmp", delete=False) as handle:
            handle.write(text)
            temporary = handle.name
        os.replace(temporary, target)
    except OSError as e:
        raise CliFailure(f"cannot write {path}: {e.strerror}")
    logger.info(f"Wrote {target}")


def load_model(path: str) -> Ptp:
    text = read_text(path)
    try:
        if path.endswith(".prism"):
            return parse_prism(text, source=path)
        return load_ptp(text)
    except TimingError as e:
        raise TimingError(f"{path}: {e}")


def _decode(path: str):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise TimingError(f"{path}: not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")


# --- subcommands ---

def cmd_simulate(args) -> int:
    try:
        graph = load_graph(read_text(args.graph))
    except TimingError as e:
        raise TimingError(f"{args.graph}: {e}")
    try:
        scenario = load_scenario(read_text(args.scenario))
    except TimingError as e:
        raise TimingError(f"{args.scenario}: {e}")
    scenario = scenario.with_overrides(seed=args.seed, horizon=args.horizon)
    events = simulate(graph, scenario)
    buffer = io.StringIO()
    count = write_trace(events, buffer)
    write_atomically(args.out, buffer.getvalue())
    print(f"{count} trace events written to {args.out} (seed {scenario.seed})")
    return 0


def cmd_estimate(args) -> int:
    try:
        events = read_trace(read_text(args.traces).splitlines())
    except TimingError as e:
        raise TimingError(f"{args.traces}: {e}")
    pairing = pair_events(events)
    groups = group_samples(pairing.samples)
    if pairing.negative:
        logger.warning(f"Excluding {len(pairing.negative)} negative durations from the histograms")
        groups = {key: [v for v in values if v >= 0] for key, values in groups.items()}

    histograms = {}
    for key, values in tqdm(groups.items(), desc="Estimating", unit=" channels",
                            disable=not Config.show_progress()):
        if not values:
            logger.warning(f"No usable samples for {key}")
            continue
        histograms[key] = build_histogram(values, args.unit, args.min_bin_prob, args.plateau_tolerance)
        logger.info(f"{key}: {len(values)} samples -> {len(histograms[key].bins)} bins")
    if not histograms:
        raise TimingError(f"{args.traces}: no duration samples could be paired")

    write_atomically(args.out, write_stats(histograms))
    if args.summary:
        document = {key: stats.as_dict() for key, stats in summaries(groups).items()}
        write_atomically(args.summary, json.dumps(document, indent=2) + "\n")
    print(f"{len(histograms)} histograms written to {args.out}")
    return 0


def cmd_compile(args) -> int:
    try:
        spec = load_pipeline(read_text(args.pipeline))
    except TimingError as e:
        raise TimingError(f"{args.pipeline}: {e}")
    if args.stats:
        try:
            stats = read_stats(read_text(args.stats))
        except TimingError as e:
            raise TimingError(f"{args.stats}: {e}")
        spec = bind_statistics(spec, stats)
    model = compile_pipeline(spec, branch_invariant=not args.no_branch_invariant)
    write_atomically(args.out, dump_ptp(model))
    print(f"model with {len(model.locations)} locations written to {args.out}")
    return 0


def _check_options(args) -> dict:
    return {"epsilon": args.epsilon, "state_cap": args.state_cap, "method": args.method}


def cmd_check(args) -> int:
    model = load_model(args.model)
    query = parse_query(args.query)
    results = granularity_ladder(model, query, args.granularity, **_check_options(args))
    for result in results:
        print(result.describe())
    if not ladder_is_monotone(results, query.opt):
        print("warning: values are not monotone in the granularity", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    before = load_model(args.model_a)
    after = load_model(args.model_b)
    query = parse_query(args.query)
    for row in compare(before, after, query, args.granularity, **_check_options(args)):
        print(f"g={row.granularity} before={row.before.value:.6f} after={row.after.value:.6f} "
              f"difference={row.difference:+.6f}")
    return 0


def cmd_export_prism(args) -> int:
    model = load_model(args.model)
    write_atomically(args.out, export_prism(model))
    return 0


def cmd_parse_prism(args) -> int:
    model = parse_prism(read_text(args.input), source=args.input)
    write_atomically(args.out, dump_ptp(model))
    print(f"model with {len(model.locations)} locations and {len(model.transitions)} transitions "
          f"written to {args.out}")
    return 0


def cmd_validate(args) -> int:
    diagnostics: List[Diagnostic]
    if args.graph:
        diagnostics = validate_graph(graph_from_dict(_decode(args.graph)))
    elif args.model:
        diagnostics = validate_ptp(ptp_from_dict(_decode(args.model)))
    else:
        diagnostics = validate_pipeline(pipeline_from_dict(_decode(args.pipeline)))
    for diagnostic in diagnostics:
        print(diagnostic)
    if errors_only(diagnostics):
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptp-timing",
                                     description="Estimate timing distributions from traces and verify "
                                                 "timeliness queries on probabilistic timed programs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable detailed debug logging.")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="Suppress informational messages, show only warnings/errors.")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="Run a scenario on a graph and write a trace log.")
    sim.add_argument("--graph", required=True, help="Graph file (JSON).")
    sim.add_argument("--scenario", required=True, help="Scenario file (JSON).")
    sim.add_argument("--out", required=True, help="Trace log to write (JSON lines).")
    sim.add_argument("--seed", type=int, default=None,
                     help=f"Random seed (default: scenario seed, else {Config.get_seed()}).")
    sim.add_argument("--horizon", type=positive_float, default=None, help="Override the scenario horizon (s).")
    sim.set_defaults(handler=cmd_simulate)

    est = commands.add_parser("estimate", help="Build interval histograms from a trace log.")
    est.add_argument("--traces", required=True, help="Trace log (JSON lines).")
    est.add_argument("--unit", type=positive_float, default=1.0, help="Seconds per model time unit (default: 1).")
    est.add_argument("--min-bin-prob", type=bin_probability, default=0.0,
                     help="Merge bins less likely than this into a neighbour (default: 0).")
    est.add_argument("--plateau-tolerance", type=nonnegative_float, default=float(DEFAULT_PLATEAU_TOLERANCE),
                     help="Merge adjacent bins whose probabilities differ by at most this fraction "
                          "of the larger (default: 0.25).")
    est.add_argument("--out", required=True, help="Stats file to write (JSON).")
    est.add_argument("--summary", default=None, help="Also write summary statistics per channel (JSON).")
    est.set_defaults(handler=cmd_estimate)

    comp = commands.add_parser("compile", help="Compile a pipeline into a model file.")
    comp.add_argument("--pipeline", required=True, help="Pipeline file (JSON).")
    comp.add_argument("--stats", default=None, help="Stats file resolving named durations.")
    comp.add_argument("--out", required=True, help="Model file to write (JSON).")
    comp.add_argument("--no-branch-invariant", action="store_true",
                      help="Let time pass in branch locations (as the PRISM import does).")
    comp.set_defaults(handler=cmd_compile)

    def add_check_options(sub):
        sub.add_argument("--query", required=True, help="e.g. 'Pmax=?[F<=35 \"Success\"]'.")
        sub.add_argument("--granularity", type=granularity_list, default=[2],
                         help="Comma-separated granularities, each dividing the next (default: 2).")
        sub.add_argument("--epsilon", type=positive_float, default=None,
                         help=f"Value iteration precision (default: {Config.get_epsilon()}).")
        sub.add_argument("--state-cap", type=positive_int, default=None,
                         help=f"Maximum digitized states (default: {Config.get_state_cap()}).")
        sub.add_argument("--method", choices=METHODS, default="auto", help="Solution method (default: auto).")

    chk = commands.add_parser("check", help="Answer a query on a model at one or more granularities.")
    chk.add_argument("--model", required=True, help="Model file (JSON, or .prism).")
    add_check_options(chk)
    chk.set_defaults(handler=cmd_check)

    cmp_ = commands.add_parser("compare", help="Answer a query on two designs side by side.")
    cmp_.add_argument("--model-a", required=True, help="Original design (JSON, or .prism).")
    cmp_.add_argument("--model-b", required=True, help="Amended design (JSON, or .prism).")
    add_check_options(cmp_)
    cmp_.set_defaults(handler=cmd_compare)

    exp = commands.add_parser("export-prism", help="Write a model as a PRISM pta program.")
    exp.add_argument("--model", required=True, help="Model file (JSON).")
    exp.add_argument("--out", required=True, help="PRISM file to write.")
    exp.set_defaults(handler=cmd_export_prism)

    imp = commands.add_parser("parse-prism", help="Read a PRISM pta program into a model file.")
    imp.add_argument("--in", dest="input", required=True, help="PRISM file.")
    imp.add_argument("--out", required=True, help="Model file to write (JSON).")
    imp.set_defaults(handler=cmd_parse_prism)

    val = commands.add_parser("validate", help="Report structural problems in an input file.")
    target = val.add_mutually_exclusive_group(required=True)
    target.add_argument("--graph", help="Graph file (JSON).")
    target.add_argument("--model", help="Model file (JSON).")
    target.add_argument("--pipeline", help="Pipeline file (JSON).")
    val.set_defaults(handler=cmd_validate)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Exit code: 0 on success, 1 on a domain or file error, 2 on a usage error."""
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except TimingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    setup_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except CliFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except TimingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"An unexpected error occurred: {e}")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
