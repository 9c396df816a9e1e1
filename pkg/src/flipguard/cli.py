"""Command-line front end.

Every subcommand reads a JSON scenario::

    {"nodes": [{"r": 1, "w": 2, "c_attack": 1, "c_defend": "1/5"}, ...],
     "B": "1/3", "M": 0.2}

Numbers may be written as exact fractions in strings.  Results are JSON (or
CSV for ``sweep``) and embed the scenario block, so a results file can be fed
back in as ``--scenario``.

Exit codes: 0 ok, 1 invalid input, 2 resource limit hit, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .best_response import attacker_best_response, defender_best_response
from .distributions import from_dict as dist_from_dict
from .errors import ResourceLimitError, ValidationError
from .model import GameInstance, NodeParams, payoff

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_TOL = 1e-9
DEFAULT_EPSILON = 0.05
DEFAULT_HORIZON = 1e6
DEFAULT_SEED = 42

log = logging.getLogger("flipguard")


# --------------------------------------------------------------------------
# scenario files

def _number(value, where: str) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ValidationError(f"{where}: expected a number or fraction string, got {value!r}")


def parse_scenario(doc: dict) -> GameInstance:
    if isinstance(doc, dict) and "scenario" in doc and "nodes" not in doc:
        doc = doc["scenario"]
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object")
    for key in ("nodes", "B", "M"):
        if key not in doc:
            raise ValidationError(f"scenario: missing field '{key}'")
    if not isinstance(doc["nodes"], list):
        raise ValidationError("scenario.nodes: expected a list")
    nodes = []
    for i, nd in enumerate(doc["nodes"]):
        where = f"scenario.nodes[{i}]"
        if not isinstance(nd, dict):
            raise ValidationError(f"{where}: expected an object")
        unknown = set(nd) - {"r", "w", "c_attack", "c_defend", "w_dist", "id"}
        if unknown:
            raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")
        vals = {}
        for k in ("r", "w", "c_attack", "c_defend"):
            if k not in nd:
                raise ValidationError(f"{where}: missing field '{k}'")
            vals[k] = _number(nd[k], f"{where}.{k}")
        dist = None
        if nd.get("w_dist") is not None:
            try:
                dist = dist_from_dict(nd["w_dist"])
            except (ValueError, TypeError, KeyError) as exc:
                raise ValidationError(f"{where}.w_dist: {exc}") from exc
        nodes.append(NodeParams(i, vals["r"], vals["w"], vals["c_attack"], vals["c_defend"], dist))
    return GameInstance(tuple(nodes), _number(doc["B"], "scenario.B"), _number(doc["M"], "scenario.M"))


def load_scenario(path: str) -> tuple[GameInstance, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    inst = parse_scenario(doc)
    return inst, scenario_block(inst)


def scenario_block(inst: GameInstance) -> dict:
    nodes = []
    for nd in inst.nodes:
        d = {"r": nd.r, "w": nd.w, "c_attack": nd.c_attack, "c_defend": nd.c_defend}
        if nd.w_dist is not None:
            d["w_dist"] = nd.w_dist.to_dict()
        nodes.append(d)
    return {"nodes": nodes, "B": inst.B, "M": inst.M}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, frozenset, set)):
        items = sorted(x) if isinstance(x, (frozenset, set)) else x
        return [_jsonable(v) for v in items]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _vector(text: str, n: int, name: str) -> np.ndarray:
    try:
        vals = [float(Fraction(t.strip())) for t in text.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"--{name}: expected {n} comma-separated numbers, got {text!r}") from exc
    if len(vals) != n:
        raise ValidationError(f"--{name}: expected {n} values, got {len(vals)}")
    return np.array(vals)


# --------------------------------------------------------------------------
# subcommands

def cmd_validate(args, inst, block):
    keys = inst.keys
    return {"valid": True, "n": inst.n, "keys": keys, "m_zero": inst.m_zero}


def cmd_best_response(args, inst, block):
    if args.player == "defender":
        p = _vector(args.p, inst.n, "p")
        m = defender_best_response(inst, p)
    else:
        m = _vector(args.m, inst.n, "m")
        p = attacker_best_response(inst, m, args.tie_break)
    pay = payoff(inst, m, p)
    return {"player": args.player, "m": m, "p": p, "u_d": pay.u_d, "u_a": pay.u_a}


def _record_dict(r):
    out = {"ne_type": r.ne_type, "F": r.F, "D": r.D, "m": r.m, "p": r.p, "u_d": r.payoffs.u_d,
           "u_a": r.payoffs.u_a, "mu_star": r.mu_star, "rho_star": r.rho_star, "residual": r.residuals,
           "family": None}
    if r.family is not None:
        f = r.family
        out["family"] = {"parameter": f.parameter, "lo": f.lo, "hi": f.hi, "lo_open": f.lo_open,
                         "hi_open": f.hi_open, "m_lo": f.m_lo, "m_hi": f.m_hi, "p_lo": f.p_lo, "p_hi": f.p_hi}
    return out


def cmd_nash(args, inst, block):
    from .nash import enumerate_equilibria
    recs = enumerate_equilibria(inst, tol=args.tol)
    return {"count": len(recs), "records": [_record_dict(r) for r in recs]}


def _solution_dict(s):
    return {"m": s.m, "p": s.p, "u_d": s.payoff.u_d, "u_a": s.payoff.u_a, "rho_d": s.rho_d, "d": s.d,
            "f1": s.f1, "f2": s.f2, "ind": s.ind, "partition": s.partition, "epsilon": s.epsilon,
            "lambda": s.lambda_const, "psi": s.psi_const, "rho_step": s.rho_step, "delta": s.delta,
            "guaranteed": s.guaranteed, "source": s.source}


def _sequential(inst, args):
    from .sequential import solve_sequential
    return solve_sequential(inst, args.epsilon, strict=args.strict)


def cmd_sequential(args, inst, block):
    return _solution_dict(_sequential(inst, args))


def cmd_simulate(args, inst, block):
    from .simulator import SimConfig, simulate
    m = _vector(args.m, inst.n, "m")
    p = _vector(args.p, inst.n, "p")
    res = simulate(SimConfig(inst, m, p, args.horizon, args.seed, args.replications))
    exact = payoff(inst, m, p)
    return {"m": m, "p": p, "horizon": args.horizon, "seed": args.seed, "replications": args.replications,
            "u_d_hat": res.u_d_hat, "u_d_se": res.u_d_se, "u_a_hat": res.u_a_hat, "u_a_se": res.u_a_se,
            "defense_rate_hat": res.defense_rate_hat, "attack_busy_hat": res.attack_busy_hat,
            "attack_busy_se": res.attack_busy_se, "compromise_fraction": res.compromise_fraction,
            "u_d_closed_form": exact.u_d, "u_a_closed_form": exact.u_a}


def _vary(inst: GameInstance, var: str, value: float) -> GameInstance:
    if var in ("B", "M"):
        return inst.replace(**{var: value})
    if var.startswith("r_"):
        try:
            i = int(var[2:])
            nd = inst.nodes[i]
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"--vary {var}: no such node") from exc
        nodes = list(inst.nodes)
        nodes[i] = NodeParams(nd.id, value, nd.w, nd.c_attack, nd.c_defend, nd.w_dist)
        return inst.replace(nodes=tuple(nodes))
    raise ValidationError(f"--vary must be B, M or r_<node>, got {var!r}")


def sweep_rows(inst: GameInstance, var: str, values, solver: str, epsilon: float = DEFAULT_EPSILON,
               tol: float = DEFAULT_TOL, strict: bool = False):
    """One row per swept value: (value, u_d, u_a, m, p); NaNs where the solver has no answer."""
    from .nash import enumerate_equilibria
    from .sequential import solve_sequential
    rows = []
    for v in values:
        cur = _vary(inst, var, float(v))
        try:
            if solver == "sequential":
                s = solve_sequential(cur, epsilon, strict=strict)
                rows.append((float(v), s.payoff.u_d, s.payoff.u_a, s.m, s.p))
            else:
                recs = enumerate_equilibria(cur, tol=tol)
                best = max(recs, key=lambda r: r.payoffs.u_d)
                rows.append((float(v), best.payoffs.u_d, best.payoffs.u_a, best.m, best.p))
        except ValidationError as exc:
            log.warning("%s=%g skipped: %s", var, v, exc)
            nan = np.full(inst.n, math.nan)
            rows.append((float(v), math.nan, math.nan, nan, nan))
    return rows


def sweep_csv(var: str, rows, n: int) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["sweep_var", "value", "u_d", "u_a"] + [f"m_{i}" for i in range(n)] + [f"p_{i}" for i in range(n)])
    for value, ud, ua, m, p in rows:
        wr.writerow([var] + [_fmt(x) for x in (value, ud, ua, *m, *p)])
    return buf.getvalue()


def _fmt(x) -> str:
    return f"{float(x):.10g}"


def cmd_sweep(args, inst, block):
    if args.points < 1:
        raise ValidationError("--points must be >= 1")
    values = np.linspace(args.start, args.stop, args.points)
    rows = sweep_rows(inst, args.vary, values, args.solver, args.epsilon, args.tol, args.strict)
    return sweep_csv(args.vary, rows, inst.n)


# --------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="flipguard", description="Solve and simulate multi-node stealthy-takeover games.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON (or an earlier results file)")
        p.add_argument("--out", help="write results here instead of stdout")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("validate", help="check a scenario file"))

    p = common(sub.add_parser("best-response", help="best response of one player"))
    p.add_argument("--player", choices=("defender", "attacker"), required=True)
    p.add_argument("--p", help="attack probabilities (defender best response)")
    p.add_argument("--m", help="defense frequencies (attacker best response)")
    p.add_argument("--tie-break", choices=("any", "favor_defender"), default="any")

    p = common(sub.add_parser("nash", help="enumerate pure-strategy equilibria"))
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = common(sub.add_parser("sequential", help="defender commitment against a best-responding attacker"))
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--strict", action="store_true", help="fail instead of refining when the guaranteed sweep is too large")

    p = common(sub.add_parser("simulate", help="Monte-Carlo estimate of both payoffs"))
    p.add_argument("--m", required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--horizon", type=float, default=DEFAULT_HORIZON)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--replications", type=int, default=30)

    p = common(sub.add_parser("sweep", help="vary one parameter and tabulate payoffs (CSV)"))
    p.add_argument("--vary", required=True, help="B, M or r_<node index>")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--solver", choices=("sequential", "nash"), default="sequential")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--strict", action="store_true")
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "best-response": cmd_best_response,
    "nash": cmd_nash,
    "sequential": cmd_sequential,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "best-response":
            need = "p" if args.player == "defender" else "m"
            if getattr(args, need) is None:
                raise ValidationError(f"best-response --player {args.player} needs --{need}")
        inst, block = load_scenario(args.scenario)
        result = COMMANDS[args.command](args, inst, block)
        if isinstance(result, str):
            text = result
        else:
            text = json.dumps(_jsonable({"command": args.command, "scenario": block, "result": result}), indent=2) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ResourceLimitError as exc:
        extra = f" (required: {exc.required:.6g})" if isinstance(exc.required, (int, float)) else ""
        print(f"resource limit: {exc}{extra}", file=sys.stderr)
        return EXIT_RESOURCE
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
