"""Command-line front end.

Exit codes: 0 success (or feasible), 1 infeasible, 2 domain error,
3 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import __version__
from .designer import default_tolerance, design_mechanism, feasibility, optimal_directions
from .dtm import build_dtm, svd_modes
from .errors import EpsilonTooLarge, ObfuskitError, PairUnavailable, ParseError
from .evaluator import SweepRow, audit, sweep_row
from .formats import (
    _read,
    csv_line,
    fmt,
    format_mechanism,
    is_mechanism_text,
    parse_instance,
    parse_mechanism,
    read_instance,
    read_mechanism,
)
from .prob_core import JointXZ, compose_markov, mutual_information

LN2 = math.log(2.0)
PAIRS = ("UX", "SX", "XZ", "UZ", "SZ")


def _info(v: float, bits: bool) -> str:
    return fmt(v / LN2 if bits else v)


def _vec(v) -> str:
    return " ".join(fmt(x) for x in np.asarray(v, dtype=float))


def _emit(text: str, out_path: str | None, stdout: TextIO) -> None:
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def cmd_validate(args, out: TextIO, err: TextIO) -> int:
    joint, notes = read_instance(args.instance)
    unit = "bits" if args.bits else "nats"
    for n in notes:
        err.write(f"notice: {n}\n")
    nu, ns, nx = joint.sizes
    out.write(f"sizes: |U|={nu} |S|={ns} |X|={nx}\n")
    for name, p in (("p_U", joint.p_U), ("p_S", joint.p_S), ("p_X", joint.p_X)):
        out.write(f"{name}: {_vec(p.values)}  interior={str(p.interior).lower()}\n")
    out.write(f"I(U;X) [{unit}]: {_info(mutual_information(joint.joint_ux()), args.bits)}\n")
    out.write(f"I(S;X) [{unit}]: {_info(mutual_information(joint.joint_sx()), args.bits)}\n")
    return 0


def cmd_feasibility(args, out: TextIO, err: TextIO) -> int:
    joint, notes = read_instance(args.instance)
    for n in notes:
        err.write(f"notice: {n}\n")
    rep = feasibility(joint, args.tol)
    out.write(f"feasible: {str(rep.feasible).lower()}\n")
    out.write(f"null_dim: {rep.null_dim}\n")
    out.write(f"rank_B_SX: {rep.rank_SX}\n")
    out.write(f"utility_sigmas: {_vec(rep.utility_sigmas)}\n")
    out.write(f"top_gain: {fmt(rep.top_gain)}\n")
    out.write(f"tolerance_used: {rep.tolerance_used!r}\n")
    return 0 if rep.feasible else 1


def _parse_epsilon(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"epsilon must be a number or 'auto', got {text!r}") from None


def cmd_design(args, out: TextIO, err: TextIO) -> int:
    joint, notes = read_instance(args.instance)
    for n in notes:
        err.write(f"notice: {n}\n")
    mech = design_mechanism(joint, args.epsilon, args.modes, args.rate, args.tol)
    if mech.epsilon == 0:
        err.write("warning: epsilon is 0, the release is a constant-Z mechanism\n")
    if args.out:
        Path(args.out).write_text(format_mechanism(mech))
    res = audit(joint, mech)
    unit = "bits" if args.bits else "nats"
    out.write(f"epsilon: {fmt(mech.epsilon)}\n")
    out.write(f"|Z|: {mech.n_release}\n")
    out.write(f"gains: {_vec(mech.gains)}\n")
    for n in mech.notes:
        out.write(f"note: {n}\n")
    out.write(f"quantity [{unit}]  predicted_local  exact\n")
    for name, loc, ex in zip(("I(X;Z)", "I(U;Z)", "I(S;Z)"), mech.predicted, res.exact):
        out.write(f"{name}  {_info(loc, args.bits)}  {_info(ex, args.bits)}\n")
    if args.out:
        out.write(f"mechanism written to {args.out}\n")
    return 0


def _parse_grid(text: str) -> list[float]:
    vals = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad epsilon {tok!r} in grid") from None
        if not math.isfinite(v) or v < 0:
            raise argparse.ArgumentTypeError(f"epsilon values must be finite and >= 0, got {tok!r}")
        vals.append(v)
    return vals


def cmd_sweep(args, out: TextIO, err: TextIO) -> int:
    joint, notes = read_instance(args.instance)
    for n in notes:
        err.write(f"notice: {n}\n")
    grid = sorted(set(args.eps_grid), reverse=True)
    lines = [SweepRow.CSV_HEADER + "\n"]
    if grid:
        chosen = optimal_directions(joint, args.modes, args.tol)
        for eps in grid:
            try:
                lines.append(csv_line(sweep_row(joint, chosen, eps, args.tol).csv_values()))
            except EpsilonTooLarge as exc:
                err.write(f"epsilon {fmt(eps)}: {exc}\n")
                lines.append(csv_line([eps] + [math.nan] * 8))
    _emit("".join(lines), args.out, out)
    return 0


def _pair_joint(args) -> JointXZ:
    text = _read(args.source)
    pair = args.pair
    if is_mechanism_text(text):
        mech = parse_mechanism(text)
        if pair != "XZ":
            raise PairUnavailable(f"pair {pair} needs the instance; pass the instance file with --mechanism")
        m = mech.P_X_given_Z.matrix * mech.p_Z.values[None, :]
        return JointXZ(m / m.sum())
    joint, _ = parse_instance(text)
    if pair == "UX":
        return joint.joint_ux()
    if pair == "SX":
        return joint.joint_sx()
    if not args.mechanism:
        raise PairUnavailable(f"pair {pair} needs a mechanism file (--mechanism)")
    mech = read_mechanism(args.mechanism)
    jxz, juz, jsz = compose_markov(joint, mech.p_Z, mech.P_X_given_Z)
    return {"XZ": jxz, "UZ": juz, "SZ": jsz}[pair]


def cmd_decompose(args, out: TextIO, err: TextIO) -> int:
    joint = _pair_joint(args)
    dtm = build_dtm(joint)
    modes = svd_modes(dtm)
    if dtm.dropped_rows or dtm.dropped_cols:
        err.write(f"notice: dropped zero-probability rows {dtm.dropped_rows} cols {dtm.dropped_cols}\n")
    P = joint.matrix[np.ix_(dtm.row_index, dtm.col_index)]
    resid = float(np.abs(modes.reconstruct_joint() - P).max())
    dev = abs(float(modes.sigmas[0]) - 1.0)
    rows = modes.left / np.sqrt(modes.p_row.values)[:, None]
    cols = modes.right / np.sqrt(modes.p_col.values)[:, None]
    header = ["i", "sigma"]
    header += [f"f_{r}" for r in dtm.row_index]
    header += [f"g_{c}" for c in dtm.col_index]
    header += ["sigma1_deviation", "reconstruction_residual"]
    lines = [",".join(header) + "\n"]
    for i in range(modes.K):
        vals = [str(i + 1), modes.sigmas[i], *rows[:, i], *cols[:, i], dev, resid]
        lines.append(csv_line(vals))
    _emit("".join(lines), args.out, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    tol_default = default_tolerance()
    ap = argparse.ArgumentParser(prog="obfuskit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"obfuskit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file and report marginals")
    p.add_argument("instance")
    p.add_argument("--bits", action="store_true", help="report information in bits")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("feasibility", help="decide whether perfect obfuscation is possible")
    p.add_argument("instance")
    p.add_argument("--tol", type=float, default=tol_default)
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("design", help="design a release mechanism")
    p.add_argument("instance")
    p.add_argument("--epsilon", type=_parse_epsilon, default="auto")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--rate", type=float, default=None, help="budget on I(X;Z) in nats")
    p.add_argument("--tol", type=float, default=tol_default)
    p.add_argument("--out", help="write the mechanism file here")
    p.add_argument("--bits", action="store_true")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sweep", help="audit the design over a grid of epsilon values")
    p.add_argument("instance")
    p.add_argument("--eps-grid", type=_parse_grid, default=[0.1, 0.01, 0.001])
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--tol", type=float, default=tol_default)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decompose", help="singular values and feature functions of a pair")
    p.add_argument("source", help="instance or mechanism file")
    p.add_argument("--pair", choices=PAIRS, required=True)
    p.add_argument("--mechanism", help="mechanism file, for pairs involving Z")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_decompose)
    return ap


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    out = sys.stdout if stdout is None else stdout
    err = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out, err)
    except ObfuskitError as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return ParseError.exit_code


if __name__ == "__main__":
    sys.exit(main())
