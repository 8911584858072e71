"""Command-line front end.

Exit codes: 0 SAT, 1 UNSAT, 2 UNKNOWN, 3 TIMEOUT, 64 usage or input error.
``verify`` exits 0 when the model passes and 1 otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time

import numpy as np

from . import bench
from .fileformat import ProblemFileError, parse_document, write_problem
from .problem import Config, Status, default_workers
from .smt import solve_problem

EXIT_USAGE = 64
log = logging.getLogger("polyar")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Status):
        return v.value
    raise TypeError(f"cannot serialize {type(v).__name__}")


def result_json(verdict, names, cfg: Config, extra: dict | None = None) -> dict:
    model = None if verdict.model is None else {n: float(v) for n, v in zip(names, verdict.model)}
    out = {"status": verdict.status.value, "model": model, "bool_model": verdict.bool_model,
           "stats": verdict.stats, "config": cfg.as_dict()}
    if extra:
        out.update(extra)
    return out


def _add_solver_flags(p):
    p.add_argument("--threshold", type=float, default=None,
                   help="absolute volume below which boxes stop being refined")
    p.add_argument("--epsilon", type=float, default=None, help="margin for strict and equality senses")
    p.add_argument("--timeout", type=float, default=3600.0, help="seconds")
    p.add_argument("--workers", type=int, default=None, help="endgame worker processes (default $POLYAR_WORKERS or CPU count)")
    p.add_argument("--subsolver", default="internal", help="internal or external:<command>")
    p.add_argument("--template", choices=("simplex", "axis"), default="simplex")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", default=None, help="write the JSON result here")


def _config(args, epsilon: float | None = None) -> Config:
    kw = {"timeout_s": args.timeout, "max_workers": args.workers or default_workers(),
          "subsolver": args.subsolver, "template": args.template, "seed": args.seed,
          "vol_threshold": args.threshold}
    eps = args.epsilon if args.epsilon is not None else epsilon
    if eps is not None:
        kw["epsilon"] = eps
    try:
        return Config(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _emit(args, payload: dict):
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(payload, fh, indent=2, default=_jsonable)


def _print_model(verdict, names, out):
    if verdict.model is not None:
        for n, v in zip(names, verdict.model):
            print(f"  {n} = {float(v)!r}", file=out)
    if verdict.bool_model:
        for n, v in verdict.bool_model.items():
            print(f"  {n} = {'true' if v else 'false'}", file=out)


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def cmd_solve(args, out) -> int:
    doc = parse_document(_read(args.file))
    if args.epsilon is not None:
        doc.epsilon = args.epsilon
    cfg = _config(args, doc.epsilon)
    problem = doc.problem()
    v = solve_problem(problem, cfg)
    print(v.status.value, file=out)
    _print_model(v, problem.names, out)
    _emit(args, result_json(v, problem.names, cfg))
    return v.status.exit_code


def _load_model(text: str, doc):
    data = json.loads(text)
    if isinstance(data, dict) and "model" in data and isinstance(data["model"], (dict, type(None))):
        values, bools = data["model"] or {}, data.get("bool_model")
    else:
        values, bools = data, None
    missing = [n for n in doc.names if n not in values]
    if missing:
        raise UsageError(f"model lacks values for {', '.join(missing)}")
    x = np.array([float(values[n]) for n in doc.names])
    if doc.is_smt:
        bools = bools or {n: values[n] for n in doc.bools if n in values}
        missing = [n for n in doc.bools if n not in bools]
        if missing:
            raise UsageError(f"model lacks Boolean values for {', '.join(missing)}")
        bools = {n: bool(bools[n]) for n in doc.bools}
    return x, bools


def cmd_verify(args, out) -> int:
    doc = parse_document(_read(args.file))
    try:
        x, bools = _load_model(_read(args.model), doc)
    except json.JSONDecodeError as e:
        raise UsageError(f"model is not valid JSON: {e}") from None
    if doc.is_smt:
        for c in doc.clauses:
            if not any((l > 0) == bools[doc.bools[abs(l) - 1]] for l in c):
                print("fail: clause violated", file=out)
                return 1
        assign = {k + 1: bools[n] for k, n in enumerate(doc.bools)}
        for row in doc.pb_rows:
            if not row.holds(assign):
                print("fail: pseudo-Boolean row violated", file=out)
                return 1
    viol = doc.max_violation(x, bools)
    ok = viol <= doc.epsilon + args.tol
    print(f"{'pass' if ok else 'fail'}: max violation {viol:.3e} (epsilon {doc.epsilon:g})", file=out)
    return 0 if ok else 1


def _bench_sof(args, out) -> int:
    if args.example is not None:
        dims, bounds = bench.SOF_SHAPES[args.example]
    else:
        if args.dims is None or args.bounds is None:
            raise UsageError("give --example or both --dims and --bounds")
        dims, bounds = tuple(args.dims), tuple(args.bounds)
    try:
        inst = bench.make_sof(dims, bounds, args.seed, eps=args.epsilon or 1e-6)
    except ValueError as e:
        raise UsageError(str(e)) from None
    problem = inst.problem()
    if args.write:
        with open(args.write, "w") as fh:
            fh.write(write_problem(problem, inst.eps))
    if args.no_solve:
        return 0
    cfg = dataclasses.replace(_config(args, inst.eps), presolve_starts=bench.SOF_PRESOLVE_STARTS)
    v = solve_problem(problem, cfg)
    print(v.status.value, file=out)
    extra = {}
    if v.model is not None:
        check = inst.verify(v.model, v.bool_model)
        K = inst.K_of(v.model)
        print("K =", np.array2string(K, precision=6), file=out)
        print(f"max real eigenvalue of A+BKC: {check['max_real_eig']:.6g}", file=out)
        extra["verify"] = check
        extra["K"] = K.tolist()
    _emit(args, result_json(v, problem.names, cfg, extra))
    return v.status.exit_code


def _bench_duffing(args, out) -> int:
    x0 = args.x0
    if x0 is None:
        x0 = bench.duffing_example(args.n).x_k if args.n in (2, 3) else None
        if x0 is None:
            raise UsageError("give --x0 for this n")
    if len(x0) != args.n:
        raise UsageError("--x0 needs n values")
    cfg = _config(args)
    trace, status = [], Status.SAT
    t0 = time.monotonic()
    try:
        steps = bench.duffing_rollout(args.n, args.zeta, np.asarray(x0, dtype=float), args.steps, cfg)
        for rec in steps:
            trace.append(rec)
            if rec["status"] != "sat":
                status = Status(rec["status"])
                print(f"step {rec['k']}: {rec['status']}", file=out)
                break
            ver = rec["verify"]
            print(f"k={rec['k']:4d} u={rec['u']:+.6f} x={np.array2string(np.array(rec['x_next']), precision=6)} "
                  f"V={rec['V']:.6g} verify={'ok' if ver['ok'] else 'FAIL'}", file=out)
            if not ver["ok"]:
                status = Status.UNKNOWN
                break
    except ValueError as e:
        raise UsageError(str(e)) from None
    payload = {"status": status.value, "steps": trace, "config": cfg.as_dict(),
               "wall_ms": 1000.0 * (time.monotonic() - t0)}
    _emit(args, payload)
    return status.exit_code


def _bench_switching(args, out) -> int:
    inst = bench.reference_switching(args.goal_halfwidth)
    if args.horizon != inst.L:
        inst = bench.SwitchingInstance(L=args.horizon)  # free goal, no obstacles
    problem = inst.problem()
    if args.write:
        with open(args.write, "w") as fh:
            fh.write(write_problem(problem, inst.eps))
    if args.no_solve:
        return 0
    cfg = _config(args, inst.eps)
    v = solve_problem(problem, cfg)
    print(v.status.value, file=out)
    extra = {}
    if v.model is not None:
        modes = inst.schedule_of(v.bool_model)
        check = inst.verify(v.model, modes)
        ts = v.model[2 * inst.L:]
        for i, (m, t) in enumerate(zip(modes, ts)):
            print(f"step {i + 1}: mode {m + 1} for t = {t:.6f}", file=out)
        print(f"dynamics residual {check['residual']:.3e}, goal reached: {check['in_goal']}", file=out)
        extra["verify"] = check
        extra["modes"] = [m + 1 for m in modes]
    _emit(args, result_json(v, problem.names, cfg, extra))
    return v.status.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyar", description="Polynomial constraint solver by convex abstraction refinement.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("file")
    _add_solver_flags(s)

    v = sub.add_parser("verify", help="check a model against a problem file")
    v.add_argument("file")
    v.add_argument("model", help="JSON: a solve result or a name -> value mapping")
    v.add_argument("--tol", type=float, default=1e-9)

    b = sub.add_parser("bench", help="benchmark families")
    bsub = b.add_subparsers(dest="family", parser_class=_Parser)
    so = bsub.add_parser("sof", help="static output feedback synthesis")
    so.add_argument("--example", type=int, choices=sorted(bench.SOF_SHAPES))
    so.add_argument("--dims", type=int, nargs=3, metavar=("NA", "NB", "NC"))
    so.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"))
    so.add_argument("--write", help="also write the instance as a problem file")
    so.add_argument("--no-solve", action="store_true")
    _add_solver_flags(so)
    du = bsub.add_parser("duffing", help="Duffing oscillator closed-loop rollout")
    du.add_argument("--n", type=int, default=2, choices=(2, 3, 4))
    du.add_argument("--zeta", type=float, default=0.3)
    du.add_argument("--steps", type=int, default=400)
    du.add_argument("--x0", type=float, nargs="+")
    _add_solver_flags(du)
    sw = bsub.add_parser("switching", help="switching-signal design")
    sw.add_argument("--horizon", type=int, default=3)
    sw.add_argument("--goal-halfwidth", type=float, default=5.0)
    sw.add_argument("--write")
    sw.add_argument("--no-solve", action="store_true")
    _add_solver_flags(sw)
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        if args.command == "solve":
            return cmd_solve(args, out)
        if args.command == "verify":
            return cmd_verify(args, out)
        if args.command == "bench":
            fam = {"sof": _bench_sof, "duffing": _bench_duffing, "switching": _bench_switching}.get(args.family)
            if fam is None:
                raise UsageError("choose a benchmark family: sof, duffing or switching")
            return fam(args, out)
        raise UsageError("choose a command: solve, verify or bench")
    except UsageError as e:
        print(f"polyar: {e}", file=sys.stderr)
        print(parser.format_usage(), end="", file=sys.stderr)
        return EXIT_USAGE
    except ProblemFileError as e:
        print(f"polyar: {e}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())
