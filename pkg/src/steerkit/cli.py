"""Command-line interface.

Exit codes: 0 success, 2 invalid input (the message names the violated
invariant), 3 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .assemblage import Assemblage
from .errors import SolverError, SteerkitError
from .linalg import matrix_from_json, max_entangled_projector
from .mdi import BetaGame, CorrelationTable, apply_loss, beta_from_witness, correlations, lhs_payoff_bound, mdi_pipeline, mdi_ratio, payoff, tomo_set_for
from .measures import WitnessSet, robustness_programs, weight_programs
from .sdp import DEFAULT_GAP_TOL, MIN_GAP_TOL
from .werner import default_threads, linear_grid, visibility_sweep, write_sweep_csv

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_USAGE = 64
DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _num(x: float) -> float:
    return float(f"{x:.{DIGITS}g}") + 0.0


def _load(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SteerkitError(f"{path} is not valid JSON: {exc}") from exc


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="steerkit", description="EPR steering measures and measurement-device-independent steering games.")
    p.add_argument("--version", action="version", version=f"steerkit {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--tol", type=float, default=DEFAULT_GAP_TOL,
                        help=f"relative SDP duality-gap tolerance (default {DEFAULT_GAP_TOL:g}, floor {MIN_GAP_TOL:g})")
    common.add_argument("--tomo", choices=("pauli6", "minimal4"), default="pauli6",
                        help="qubit tomography input set (default pauli6)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("validate", parents=[common], help="check input files against their invariants")
    s.add_argument("--assemblage")
    s.add_argument("--witness")
    s.add_argument("--table")
    s.add_argument("--game")

    s = sub.add_parser("robustness", parents=[common], help="steering robustness of an assemblage")
    s.add_argument("--assemblage", required=True)

    s = sub.add_parser("weight", parents=[common], help="steerable weight of an assemblage")
    s.add_argument("--assemblage", required=True)

    s = sub.add_parser("witness", parents=[common], help="optimal witness of an assemblage")
    s.add_argument("--assemblage", required=True)
    s.add_argument("--kind", choices=("sr", "sw"), default="sr", help="robustness (sr) or weight (sw) witness")

    s = sub.add_parser("beta", parents=[common], help="game coefficients spanning a witness")
    s.add_argument("--witness", required=True)

    s = sub.add_parser("correlations", parents=[common], help="simulate the b=1 correlation table")
    s.add_argument("--assemblage", required=True)
    s.add_argument("--game", help="take the tomography set from this game file instead of --tomo")
    s.add_argument("--effect", help="joint effect E1 as a JSON matrix (default: maximally entangled projector)")
    s.add_argument("--eta", type=float, default=1.0, help="detection efficiency in [0, 1] (default 1)")

    s = sub.add_parser("mdi-ratio", parents=[common], help="payoff ratio from a data table and a game only")
    s.add_argument("--table", required=True)
    s.add_argument("--game", required=True)

    s = sub.add_parser("mdi-measure", parents=[common], help="MDI steering measure of an assemblage")
    s.add_argument("--assemblage", required=True)

    s = sub.add_parser("werner-sweep", parents=[common], help="Werner visibility sweep as CSV")
    s.add_argument("--from", dest="start", type=float, default=0.0)
    s.add_argument("--to", dest="stop", type=float, default=1.0)
    s.add_argument("--steps", type=int, default=101)
    return p


def _tomo(args, d: int = 2):
    return tomo_set_for(args.tomo, d)


def _cmd_validate(args) -> dict:
    checked = {}
    if args.assemblage:
        a = Assemblage.from_json(_load(args.assemblage))
        checked["assemblage"] = {"nSettings": a.n_settings, "nOutcomes": a.n_outcomes, "dim": a.dim}
    if args.witness:
        w = WitnessSet.from_json(_load(args.witness))
        checked["witness"] = {"normalization": w.normalization}
    if args.table:
        t = CorrelationTable.from_json(_load(args.table))
        checked["table"] = {"tomoSize": t.tomo_size}
    if args.game:
        g = BetaGame.from_json(_load(args.game))
        g.validate()
        checked["game"] = {"tomoSize": len(g.tomo)}
    if not checked:
        raise UsageError("validate needs at least one of --assemblage, --witness, --table, --game")
    return {"valid": True, "checked": checked}


def _cmd_robustness(args) -> dict:
    rep = robustness_programs(Assemblage.from_json(_load(args.assemblage)), args.tol)
    return {"sr": _num(rep.value)}


def _cmd_weight(args) -> dict:
    rep = weight_programs(Assemblage.from_json(_load(args.assemblage)), args.tol)
    return {"sw": _num(rep.value)}


def _cmd_witness(args) -> dict:
    a = Assemblage.from_json(_load(args.assemblage))
    rep = robustness_programs(a, args.tol) if args.kind == "sr" else weight_programs(a, args.tol)
    return rep.witness.to_json(DIGITS)


def _cmd_beta(args) -> dict:
    w = WitnessSet.from_json(_load(args.witness))
    return beta_from_witness(w, _tomo(args, w.dim)).to_json(DIGITS)


def _cmd_correlations(args) -> dict:
    a = Assemblage.from_json(_load(args.assemblage))
    tomo = BetaGame.from_json(_load(args.game)).tomo if args.game else _tomo(args, a.dim)
    E1 = matrix_from_json(_load(args.effect)) if args.effect else max_entangled_projector(a.dim)
    return apply_loss(correlations(a, E1, tomo), args.eta).to_json(DIGITS)


def _cmd_mdi_ratio(args) -> dict:
    table = CorrelationTable.from_json(_load(args.table))
    game = BetaGame.from_json(_load(args.game))
    return {
        "ratio": _num(mdi_ratio(table, game)),
        "payoff": _num(payoff(table, game)),
        "lhs_bound": _num(lhs_payoff_bound(game)),
    }


def _cmd_mdi_measure(args) -> dict:
    a = Assemblage.from_json(_load(args.assemblage))
    rep = mdi_pipeline(a, _tomo(args, a.dim), args.tol)
    return {"s_mdi": _num(rep.value), "ratio": _num(rep.ratio)}


def _cmd_werner_sweep(args) -> None:
    rows = visibility_sweep(
        linear_grid(args.start, args.stop, args.steps), _tomo(args), args.tol, threads=default_threads()
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)


COMMANDS = {
    "validate": _cmd_validate,
    "robustness": _cmd_robustness,
    "weight": _cmd_weight,
    "witness": _cmd_witness,
    "beta": _cmd_beta,
    "correlations": _cmd_correlations,
    "mdi-ratio": _cmd_mdi_ratio,
    "mdi-measure": _cmd_mdi_measure,
    "werner-sweep": _cmd_werner_sweep,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.tol = max(args.tol, MIN_GAP_TOL)
        result = COMMANDS[args.command](args)
        if result is not None:
            _emit(result, args.out)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (SteerkitError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
