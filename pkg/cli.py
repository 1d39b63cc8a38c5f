"""Command-line front end.

    python cli.py filters --K 3
    python cli.py eval --K 3 --kind wavelet --level 8 --out w.csv
    python cli.py conn --table triple --K 3 --verify
    python cli.py dwt analyze --K 2 --levels 3 < signal.txt
    python cli.py ham spectrum --K 3 --mu 1 --N 64
    python cli.py oracle --query '{"K": 3, "factors": [{"k": 0, "n": 0, "d": 1}, {"k": 0, "n": 1, "d": 1}]}'

Data goes to stdout (or --out/--output), status and errors to stderr.
Exit codes: 0 success, 2 usage, 3 domain/regularity, 4 verification failure.
"""
import argparse
import sys
from typing import List, Optional

import numpy as np

from config import EngineConfig, load_config
from conncoef import ConnQuery, get_engine, verify_golden
from decoupling import FlowState, gapped_test_matrix, trajectory_to_csv, wegner_flow
from errors import DomainError, EngineError, VerificationError, exit_code_for
from exporters import format_float, rows_to_csv, to_json
from filters import SUPPORTED_ORDERS, daubechies_filters
from hamiltonian import coupling_blocks, quadratic_form
from multiscale import Pyramid, dwt_analyze, dwt_synthesize
from refine import OracleFactor, oracle_integral, sample_function
from vacuum import gamma_coefficients

CONN_TABLES = {
    "gamma": ((0, 1), 0),
    "pair": ((1, 1), 0),
    "triple": ((0, 1, 1), 0),
    "F": ((0, 0), 1),
    "G": ((1, 1), 1),
    "E": ((0, 1), 1),
    "overlap": ((0, 0, 0), 0),
    "momentum": ((0, 0, 1), 0),
}


def _emit(text: str, path: Optional[str] = None):
    if path:
        with open(path, 'w', newline='') as f:
            f.write(text)
        print(f"✅ Wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _read_input(path: Optional[str]) -> str:
    if path and path != "-":
        with open(path, 'r') as f:
            return f.read()
    return sys.stdin.read()


def parse_signal(text: str) -> np.ndarray:
    """One value per line, or comma-separated values"""
    values = []
    for line in text.splitlines():
        for cell in line.split(","):
            cell = cell.strip()
            if cell:
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DomainError(f"Signal value '{cell}' is not a number")
    if not values:
        raise DomainError("Signal is empty")
    return np.array(values)


# ============== SUBCOMMANDS ==============
def cmd_filters(args, config: EngineConfig) -> int:
    fb = daubechies_filters(args.K, reverse=args.reverse)
    _emit(fb.to_csv() if args.format == "csv" else fb.to_json())
    return 0


def cmd_eval(args, config: EngineConfig) -> int:
    fb = daubechies_filters(args.K)
    samples = sample_function(fb, args.kind, args.deriv, args.level)
    _emit(samples.to_csv(), args.out)
    return 0


def cmd_conn(args, config: EngineConfig) -> int:
    fb = daubechies_filters(args.K)
    if args.verify:
        if args.table not in ("pair", "gamma", "triple"):
            raise DomainError(f"--verify is available for pair, gamma and triple, not '{args.table}'")
        check = verify_golden(args.table, fb)
        print(check.summary())
        if not check.ok:
            raise VerificationError(f"{args.table}: {check.count - check.passed} entries outside tolerance")
        return 0

    derivs, q = CONN_TABLES[args.table]
    table = get_engine(fb, config).base_table(derivs, q)
    _emit(table.to_json() if args.format == "json" else table.to_csv(), args.out)
    return 0


def cmd_dwt(args, config: EngineConfig) -> int:
    fb = daubechies_filters(args.K)
    text = _read_input(args.input)
    if args.action == "analyze":
        pyramid = dwt_analyze(parse_signal(text), fb, args.levels)
        _emit(pyramid.to_json(), args.output)
    else:
        signal = dwt_synthesize(Pyramid.from_json(text), fb)
        _emit("\n".join(format_float(v) for v in signal), args.output)
    return 0


def cmd_ham(args, config: EngineConfig) -> int:
    fb = daubechies_filters(args.K)

    if args.action == "blocks":
        rows = []
        for block in coupling_blocks(fb, args.k, args.lmax, args.N):
            label = block.kind + ":" + ":".join(str(s) for s in block.scales)
            for i, j in zip(*np.nonzero(block.matrix)):
                rows.append([label, int(i), int(j), float(block.matrix[i, j])])
        _emit(rows_to_csv(["block", "row", "col", "value"], rows), args.out)

    elif args.action == "spectrum":
        form = quadratic_form(fb, args.mu, coupling_blocks(fb, args.k, args.lmax, args.N))
        eig = form.eigenvalues()
        _emit(rows_to_csv(["index", "eigenvalue"], [[i, float(v)] for i, v in enumerate(eig)]), args.out)

    elif args.action == "gamma":
        result = gamma_coefficients(fb, args.mu, args.k, args.element, config)
        _emit(to_json(result.model_dump()), args.out)

    else:
        if args.input:
            H = np.loadtxt(args.input, delimiter=",", ndmin=2)
        else:
            H = gapped_test_matrix(2 * args.split, args.split, gap=args.gap, seed=args.seed)
        generator = "wegner-dynamic" if args.variant == "wegner" else "fixed"
        state = wegner_flow(FlowState(H=H, split=args.split), generator, args.lam_max,
                            off_tol=args.off_tol, config=config)
        _emit(trajectory_to_csv(state), args.out)
    return 0


def cmd_oracle(args, config: EngineConfig) -> int:
    try:
        query = ConnQuery.model_validate_json(args.query)
    except ValueError as e:
        raise DomainError(f"Query is not a valid connection query: {e}")
    fb = daubechies_filters(query.K)
    factors = [OracleFactor(kind=f.kind, k=f.k, n=f.n, d=f.d, q=query.weight if i == 0 else 0)
               for i, f in enumerate(query.factors)]
    level = args.level if args.level is not None else config.oracle_level
    oracle = oracle_integral(fb, factors, level)
    exact = get_engine(fb, config).general_connection(query)
    _emit(to_json({"level": level, "oracle": oracle, "exact": exact, "abs_diff": abs(oracle - exact)}))
    return 0


# ============== PARSER ==============
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cli.py", description="Daubechies connection-coefficient engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, K_default: int = 3):
        p.add_argument("--K", type=int, choices=SUPPORTED_ORDERS, default=K_default,
                       help="Daubechies order, one of {1,2,3}")
        p.add_argument("--config", help="JSON file overriding numerical settings")

    p = sub.add_parser("filters", help="print the filter bank")
    add_common(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--reverse", action="store_true", help="mirror root choice")
    p.set_defaults(handler=cmd_filters)

    p = sub.add_parser("eval", help="sample s, w or their derivatives on a dyadic grid")
    add_common(p)
    p.add_argument("--deriv", type=int, default=0)
    p.add_argument("--level", type=int, default=8)
    p.add_argument("--kind", choices=["scaling", "wavelet"], default="scaling")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("conn", help="print or verify a base table")
    add_common(p)
    p.add_argument("--table", choices=sorted(CONN_TABLES), required=True)
    p.add_argument("--verify", action="store_true", help="diff against the transcribed golden tables")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_conn)

    p = sub.add_parser("dwt", help="periodic wavelet transform")
    p.add_argument("action", choices=["analyze", "synthesize"])
    add_common(p)
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--input", help="signal (analyze) or pyramid JSON (synthesize); stdin if omitted")
    p.add_argument("--output")
    p.set_defaults(handler=cmd_dwt)

    p = sub.add_parser("ham", help="free-field matrices, vacuum gamma and decoupling flows")
    p.add_argument("action", choices=["blocks", "spectrum", "gamma", "flow"])
    add_common(p)
    p.add_argument("--k", type=int, default=0, help="coarse scale")
    p.add_argument("--lmax", type=int, default=None, help="finest wavelet scale (omit for coarse only)")
    p.add_argument("--N", type=int, default=32, help="periodic volume in coarse cells")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--element", choices=["scaling", "wavelet"], default="scaling")
    p.add_argument("--variant", choices=["wegner", "fixed"], default="wegner")
    p.add_argument("--split", type=int, default=4)
    p.add_argument("--gap", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam-max", dest="lam_max", type=float, default=1.0)
    p.add_argument("--off-tol", dest="off_tol", type=float, default=None)
    p.add_argument("--input", help="CSV matrix for the flow (random gapped matrix if omitted)")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_ham)

    p = sub.add_parser("oracle", help="brute-force Riemann sum next to the exact coefficient")
    p.add_argument("--query", required=True, help="ConnQuery as JSON")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_oracle)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except EngineError as e:
        print(f"❌ {e}", file=sys.stderr)
        return exit_code_for(e)
    except (OSError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
