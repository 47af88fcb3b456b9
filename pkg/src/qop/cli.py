"""Command-line interface: ``qop synth|apply|verify|sweep|gates``.

Exit codes: 0 success, 1 usage or input error, 2 capability limit,
3 channel verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from qop.densmat import (
    DensityMatrix,
    copies_state,
    matrix_from_json,
    matrix_to_json,
    probability,
    random_density,
)
from qop.errors import CapabilityError, QopError, VerificationError
from qop.gatelib import golden_gates, luka_conorm, luka_value
from qop.krausfab import COMPLETENESS_TOL, QuantumOperation, apply, check_completeness, choi_matrix
from qop.swapprox import BUILTINS, builtin, default_grid, lattice_axis, sampled_function, synthesize

EXIT_OK, EXIT_USAGE, EXIT_CAPABILITY, EXIT_VERIFY = 0, 1, 2, 3
TRACE_TOL = 1e-12
EXPORT_MAX_OPS = 2**20
DENSE_TRIAL_MAX_DIM = 2**8

log = logging.getLogger("qop")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, newline="\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_op(path, check=True) -> QuantumOperation:
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise UsageError(f"{path} is not a Kraus JSON object")
    return QuantumOperation.from_json(obj, check=check)


def _load_target(args):
    if args.fn:
        if args.fn not in BUILTINS:
            raise UsageError(f"unknown builtin {args.fn!r}; registry: {', '.join(sorted(BUILTINS))}")
        f = builtin(args.fn)
    else:
        obj = _read_json(args.samples)
        try:
            f = sampled_function(int(obj["n"]), int(obj["k_grid"]), obj["values"], Path(args.samples).stem)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed samples file {args.samples}: {exc}") from exc
    return f.shrunk() if args.shrink else f


def cmd_synth(args) -> int:
    f = _load_target(args)
    grid = args.grid or default_grid()
    syn = synthesize(f, args.eps, mode=args.mode, k_max=args.k_max, grid=grid, strict=args.strict)
    if syn.op.rank_one_count > EXPORT_MAX_OPS:
        raise CapabilityError(
            f"{f.name}: certified at k={syn.report.k} but its {syn.op.kraus_count} Kraus operators "
            f"exceed the export limit {EXPORT_MAX_OPS}"
        )
    _write_json(args.out, syn.op.to_json())
    report = {"name": f.name, **{k: v for k, v in syn.report.to_json().items() if k != "name"}}
    if args.report:
        _write_json(args.report, report)
    r = syn.report
    print(f"{f.name}: mode={r.mode} k={r.k} M={r.M:.17g} sup_error={r.sup_error:.6g} kraus={r.kraus_count}")
    return EXIT_OK


def _load_states(path) -> list[DensityMatrix]:
    obj = _read_json(path)
    items = obj.get("states") if isinstance(obj, dict) else obj
    if isinstance(obj, dict) and items is None and "entries" in obj:
        items = [obj]
    if not isinstance(items, list) or not items:
        raise UsageError(f"{path} must hold a non-empty list of single-qubit density matrices")
    states = [DensityMatrix(matrix_from_json(m)) for m in items]
    for s in states:
        if s.qubits != 1:
            raise UsageError(f"state files hold single-qubit densities, got a {s.qubits}-qubit state")
    return states


def cmd_apply(args) -> int:
    op = _load_op(args.op)
    states = _load_states(args.state)
    if args.copies < 1:
        raise UsageError("--copies must be >= 1")
    dim = 2 ** (len(states) * args.copies)
    if dim != op.dim_in:
        raise UsageError(
            f"{len(states)} states x {args.copies} copies give dimension {dim}, the operation expects {op.dim_in}"
        )
    out = apply(op, copies_state(states, args.copies))
    p = probability(out)
    if args.out:
        _write_json(args.out, {**matrix_to_json(out.mat), "probability": p})
    print(f"{p:.15g}")
    return EXIT_OK


def _trial_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim <= DENSE_TRIAL_MAX_DIM:
        return random_density(dim.bit_length() - 1, rng).mat
    w = rng.random(dim)
    return np.diag(w / w.sum()).astype(complex)


def cmd_verify(args) -> int:
    op = _load_op(args.op, check=False)
    rng = np.random.default_rng(args.seed)
    completeness = check_completeness(op)
    trace_dev = 0.0
    for _ in range(args.trials):
        out = op.act(_trial_state(op.dim_in, rng))
        trace_dev = max(trace_dev, float(abs(np.trace(out) - 1.0)))
    ok = completeness <= COMPLETENESS_TOL and trace_dev <= TRACE_TOL
    print(f"completeness_deviation {completeness:.6g}")
    print(f"trace_deviation {trace_dev:.6g}")
    if args.choi:
        report = choi_matrix(op)
        print(f"choi_min_eigenvalue {report.min_eigenvalue:.6g}")
        ok = ok and report.accepted
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def sweep_rows(what: str, res: int):
    axis = lattice_axis(res)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    if what == "luka":
        vals = luka_conorm(x, y)
    elif what == "luka_poly":
        vals = luka_value(x, y)
    elif what == "diff":
        vals = luka_conorm(x, y) - luka_value(x, y)
    else:
        raise UsageError(f"unknown sweep {what!r}")
    return x.ravel(), y.ravel(), vals.ravel()


def cmd_sweep(args) -> int:
    if args.res < 2:
        raise UsageError("--res must be >= 2")
    xs, ys, vals = sweep_rows(args.what, args.res)
    lines = ["x,y,value"] + [f"{a:.17g},{b:.17g},{v:.17g}" for a, b, v in zip(xs, ys, vals)]
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, newline="\n")
    if args.what == "diff":
        i = int(np.argmax(vals))
        j = int(np.argmin(vals))
        ties = int(np.count_nonzero(vals >= vals[i] - 1e-12))
        print(f"max {vals[i]:.17g} at ({xs[i]:.17g}, {ys[i]:.17g}); {ties} lattice points within 1e-12")
        print(f"min {vals[j]:.17g} at ({xs[j]:.17g}, {ys[j]:.17g})")
    return EXIT_OK


def cmd_gates(args) -> int:
    gate = golden_gates()[args.name]
    _write_json(args.out, gate.op.to_json())
    if gate.M != 1.0:
        print(f"{gate.name}: realises P/M with M={gate.M:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesise an operation approximating a function")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fn", help="builtin function name")
    src.add_argument("--samples", help="JSON lattice samples {n, k_grid, values}")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--mode", choices=["paper", "direct"], default="paper")
    p.add_argument("--out", required=True, help="Kraus JSON output path")
    p.add_argument("--report", help="ApproxReport JSON output path")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--grid", type=int, default=None, help="verification lattice points per axis")
    p.add_argument("--shrink", action="store_true", help="use 0.98 f + 0.01")
    p.add_argument("--strict", action="store_true", help="require |B_k f - f| <= eps/2 independent of M")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("apply", help="apply an operation to k copies of single-qubit states")
    p.add_argument("--op", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("verify", help="check completeness, trace preservation and optionally the Choi matrix")
    p.add_argument("--op", required=True)
    p.add_argument("--choi", action="store_true")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="CSV grids of the conorm, its approximant or their difference")
    p.add_argument("--what", choices=["luka", "luka_poly", "diff"], required=True)
    p.add_argument("--res", type=int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gates", help="export a golden gate as Kraus JSON")
    p.add_argument("--name", choices=["not", "iand", "luka"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gates)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CapabilityError as exc:
        print(f"qop: capability limit: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except VerificationError as exc:
        print(f"qop: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (UsageError, QopError) as exc:
        print(f"qop: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
