"""Command-line entry point.

Exit codes: 0 success, 1 verification failed, 2 invalid input (a JSON error
object is printed), 3 solver did not converge, 64 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Any

from . import frb, market, oracle, pab, regret, sim, upa
from .errors import ConfigError, ConvergenceError, DomainError, InconsistentBidError
from .values import BidVector, MarginalValueCurve, StepBid, ValueVector

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_USAGE = 64

SIG_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt_number(x: float) -> str:
    if isinstance(x, bool) or not isinstance(x, float):
        return str(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def _round_floats(obj: Any):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return fmt_number(obj)
        return float(f"{obj:.{SIG_DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _round_floats(obj.item())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_round_floats(obj), indent=2) + "\n"


def _load_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}") from exc


def load_curve(path: str) -> MarginalValueCurve:
    obj = _load_json(path)
    if isinstance(obj, dict) and "values" in obj:
        return _vector(obj, ValueVector, "values").to_curve()
    return MarginalValueCurve.from_json(obj)


def _vector(obj: dict, cls, key: str):
    try:
        entries = tuple(float(x) for x in obj[key])
        w = float(obj.get("unit_quantity", 1.0))
    except (TypeError, ValueError) as exc:
        raise DomainError(f"malformed {key} vector: {exc}") from exc
    return cls(entries, w)


def load_value_vector(path: str, M: int | None) -> ValueVector:
    obj = _load_json(path)
    if isinstance(obj, dict) and "values" in obj:
        return _vector(obj, ValueVector, "values")
    curve = MarginalValueCurve.from_json(obj)
    if M is None:
        raise DomainError("a value curve needs -M to define the unit grid")
    return ValueVector.from_curve(curve, M)


def load_bid(path: str):
    obj = _load_json(path)
    if isinstance(obj, dict) and isinstance(obj.get("bid"), dict):
        obj = obj["bid"]  # solver output
    if isinstance(obj, dict) and "bids" in obj:
        return _vector(obj, BidVector, "bids")
    if not isinstance(obj, dict):
        raise DomainError("bid file must hold a JSON object")
    return StepBid.from_json(obj)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    sim.write_csv(rows, buf, columns, fmt=fmt_number)
    return buf.getvalue()


def _samples_csv(bid: StepBid) -> str:
    rows = [{"q": 0.0, "b": bid.levels[0] if bid.levels else 0.0}]
    rows += [{"q": q, "b": b} for q, b in bid.points]
    return _csv(rows, ("q", "b"))


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    fmt, mode = args.format, args.mode
    if fmt == "frb" and mode != "multiunit":
        raise DomainError("first-rejected-bid pricing is solved for multi-unit bids only")
    if mode == "multiunit":
        v = load_value_vector(args.values, args.M)
        if fmt == "pab":
            sol = pab.solve_multiunit(v)
            result, bid = sol.to_json(), sol.bid
        elif fmt == "upa":
            b = upa.solve_cross_conditional(v)
            band = upa.multiunit_minimax_band(v)
            result = {"format": "upa", "loss": band.loss, "bid": b.to_json(),
                      "band": band.to_json()}
            bid = b
        else:
            b = frb.solve_frb(v)
            result = {"format": "frb", "loss": frb.max_loss(b, v), "bid": b.to_json()}
            bid = b
        step = bid.to_step_bid()
    else:
        if mode == "constrained" and args.M is None:
            raise DomainError("constrained mode needs -M")
        v = load_curve(args.values)
        if mode == "constrained":
            sol = (pab.solve_constrained(v, args.M, seed=args.seed or 0) if fmt == "pab"
                   else upa.solve_constrained(v, args.M))
            result, step = sol.to_json(), sol.bid
        elif fmt == "pab":
            sol = pab.solve_unconstrained(v, args.grid or 4096)
            result, step = sol.to_json(), sol.bid
        else:
            grid = args.grid or 1024
            L, qhat, _ = upa.unconstrained_minimax(v, grid)
            step = upa.solve_unconstrained_cross(v, grid)
            result = {"format": "upa", "loss": L, "tangency_q": qhat, "bid": step.to_json()}
    result["mode"] = mode
    _emit(dumps(result), args.out)
    if args.csv:
        _emit(_samples_csv(step), args.csv)
    return EXIT_OK


def cmd_loss(args) -> int:
    bid = load_bid(args.bid)
    v = load_curve(args.values)
    fmt = regret.Format.parse(args.format)
    value, argmax_q, profile = regret.max_loss_with_argmax(fmt, bid, v)
    report = {
        "format": fmt.value,
        "max_loss": value,
        "argmax_q": argmax_q,
        "per_point": [r.to_json() for r in profile],
    }
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_band(args) -> int:
    v = load_value_vector(args.values, args.M)
    _emit(dumps(upa.multiunit_minimax_band(v).to_json()), args.out)
    return EXIT_OK


def cmd_curves(args) -> int:
    v = load_curve(args.values)
    grid = args.grid or 256
    if args.loss is None:
        L, _, curves = upa.unconstrained_minimax(v, grid)
    else:
        curves = upa.iso_loss(v, args.loss, grid)
    rows = [{"q": q, "upper": hi, "lower": lo} for q, hi, lo in curves.rows()]
    _emit(_csv(rows, ("q", "upper", "lower")), args.out)
    return EXIT_OK


def cmd_clear(args) -> int:
    obj = _load_json(args.bids)
    if not isinstance(obj, list):
        raise DomainError("bids file must hold a JSON array of step bids")
    bids = [StepBid.from_json(b) for b in obj]
    res = market.clear(bids, args.Q, args.pricing, args.payment)
    _emit(dumps(res.to_json()), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    bid = load_bid(args.bid)
    v = load_curve(args.values)
    grid = args.grid or 64
    report = oracle.verify(bid, v, args.format, args.tol, q_grid=grid, p_grid=grid,
                           seed=args.seed or 0)
    _emit(dumps(report), args.out)
    return EXIT_OK if report["passed"] else EXIT_FAILED_CHECK


def cmd_simulate(args) -> int:
    if args.study == "loss":
        Q = args.Q
        rows = sim.run_loss_study(args.M_list or [1, 2, 3, 4, 5, 10, 25],
                                  MarginalValueCurve.constant(1.0, Q))
        _emit(_csv(rows, sim.LOSS_COLUMNS), args.out)
        return EXIT_OK
    cfg = sim.SimConfig(
        n_bidders=tuple(args.n or (2, 5, 10)),
        M=tuple(args.M_list or (1, 2, 3, 4, 5)),
        Q=args.Q,
        draws=args.draws,
        seed=args.seed,
    )
    rows = sim.run_revenue_study(cfg)
    _emit(_csv(rows, sim.REVENUE_COLUMNS), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.format != "pab":
        raise DomainError("value estimation is available for pay-as-bid bids only")
    bid = load_bid(args.bid)
    if not isinstance(bid, BidVector):
        raise DomainError("estimation needs a multi-unit bid vector ({\"bids\": [...]})")
    v = pab.invert_multiunit(bid)
    _emit(dumps(v.to_json()), args.out)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="minimax-bid", description="Minimax-loss bids for multi-unit auctions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, values=False, bid=False):
        if values:
            sp.add_argument("--values", required=True, help="value JSON (curve or vector)")
        if bid:
            sp.add_argument("--bid", required=True, help="bid JSON (step bid or vector)")
        sp.add_argument("--out", help="write output here instead of stdout")

    sp = sub.add_parser("solve", help="compute a minimax-loss bid")
    sp.add_argument("--format", choices=("pab", "upa", "frb"), required=True)
    sp.add_argument("--mode", choices=("multiunit", "constrained", "unconstrained"), required=True)
    sp.add_argument("-M", type=int, help="number of units or bidpoints")
    sp.add_argument("--grid", type=int, help="sample points for unconstrained solvers")
    sp.add_argument("--seed", type=int, help="seed for the bidpoint search starts")
    sp.add_argument("--csv", help="also write (q, b) samples as CSV")
    common(sp, values=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("loss", help="maximal loss of a given bid")
    sp.add_argument("--format", choices=("pab", "lab", "upa"), required=True)
    common(sp, values=True, bid=True)
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("band", help="multi-unit uniform-price minimax band")
    sp.add_argument("-M", type=int)
    common(sp, values=True)
    sp.set_defaults(func=cmd_band)

    sp = sub.add_parser("curves", help="iso-loss curves as CSV")
    sp.add_argument("--loss", type=float, help="loss level (default: unconstrained minimax loss)")
    sp.add_argument("--grid", type=int)
    common(sp, values=True)
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("clear", help="clear a market")
    sp.add_argument("--bids", required=True, help="JSON array of step bids")
    sp.add_argument("-Q", type=float, required=True, help="total supply")
    sp.add_argument("--pricing", choices=("lab", "frb"), default="lab")
    sp.add_argument("--payment", choices=("pab", "upa"), default="pab")
    common(sp)
    sp.set_defaults(func=cmd_clear)

    sp = sub.add_parser("verify", help="check maximal loss against the brute-force oracle")
    sp.add_argument("--format", choices=("pab", "lab", "upa"), required=True)
    sp.add_argument("--grid", type=int, help="quantity and price grid size (default 64)")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--seed", type=int)
    common(sp, values=True, bid=True)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="revenue or loss study as CSV")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--study", choices=("revenue", "loss"), default="revenue")
    sp.add_argument("--draws", type=int, default=10_000)
    sp.add_argument("--n", type=_int_list, help="bidder counts, e.g. 2,5,10")
    sp.add_argument("-M", dest="M_list", type=_int_list, help="bidpoint counts, e.g. 1,2,4")
    sp.add_argument("-Q", type=float, default=100.0)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="recover values from a multi-unit bid")
    sp.add_argument("--format", choices=("pab",), required=True)
    common(sp, bid=True)
    sp.set_defaults(func=cmd_estimate)
    return p


def _error(kind: str, message: str, **extra) -> None:
    sys.stdout.write(dumps({"error": {"type": kind, "message": message, **extra}}))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConvergenceError as exc:
        _error("non_convergence", str(exc))
        return EXIT_NO_CONVERGENCE
    except InconsistentBidError as exc:
        _error("inconsistent_bid", str(exc))
        return EXIT_INVALID
    except (DomainError, ConfigError) as exc:
        _error("invalid_input", str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
