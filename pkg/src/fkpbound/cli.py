"""Command-line entry point: ``fkpbound <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .encoder import Encoding, encode
from .program import build_fkp, check_safety_operational


def _encodings(value: str) -> list[Encoding]:
    if value == "all":
        return [Encoding.CUBIC, Encoding.QUADRATIC]
    return [Encoding.parse(value)]


def cmd_gen(args) -> int:
    from .smtlib import CONFIG_NAMES, generate_suite

    configs = CONFIG_NAMES if args.config == ["all"] else args.config
    manifest = generate_suite(
        args.out,
        n_min=args.n_min,
        n_max=args.n_max,
        configs=configs,
        encodings=_encodings(args.encoding),
        bitwidth=args.bitwidth,
        opt_wsel=args.opt_wsel,
        mutate_bound=args.mutate_bound,
    )
    print(f"wrote {len(manifest['files'])} files to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    p = build_fkp(args.n)
    if args.bound is not None:
        p = p.with_bound(args.bound)
    rep = check_safety_operational(p)
    print(json.dumps({
        "n": args.n,
        "bound": p.bound,
        "interleaving_count": rep.interleaving_count,
        "violations": rep.violations,
        "reachable_values": sorted(rep.reachable_values),
    }))
    return 0 if rep.violations == 0 else 1


def cmd_certify(args) -> int:
    from .lowerbound import certify_lower_bound

    status = 0
    for enc in _encodings(args.encoding):
        cert = certify_lower_bound(args.n, enc, args.mode, max_n=args.max_n)
        print(cert.report())
        if args.json:
            out = Path(args.json)
            if len(_encodings(args.encoding)) > 1:
                out = out.with_name(f"{out.stem}-{enc.value}{out.suffix}")
            out.write_text(cert.to_json() + "\n")
        status |= 0 if cert.established else 1
    return status


def _instance(args):
    if args.file_internal:
        from .smtlib import read_internal

        return read_internal(args.file_internal)
    if args.n is None:
        raise SystemExit("solve needs --n or --file-internal")
    p = build_fkp(args.n)
    if args.mutate_bound:
        p = p.with_bound(args.n - 1)
    return encode(p, args.encoding)


def cmd_solve(args) -> int:
    from .dpllt import solve, write_trace

    inst = _instance(args)
    res = solve(inst, seed=args.seed, eager=args.eager, max_conflicts=args.max_conflicts, time_limit=args.time_limit)
    s = res.stats
    print(json.dumps({
        "status": res.status,
        "n": inst.n,
        "encoding": inst.encoding.value,
        "t_learn_count": s.t_learn_count,
        "propositional_conflicts": s.propositional_conflicts,
        "decisions": s.decisions,
        "restarts": s.restarts,
        "elapsed_s": round(s.elapsed_s, 3),
    }))
    if res.trace is not None and args.trace:
        Path(args.trace).write_text(write_trace(res.trace, inst, [f"seed {args.seed}"]))
    return {"unsat": 0, "sat": 10, "unknown": 20}[res.status]


def cmd_check(args) -> int:
    from .dpllt import check_proof, parse_trace, read_header

    text = Path(args.trace).read_text()
    h = read_header(text)
    inst = encode(build_fkp(h.n).with_bound(h.bound), h.encoding)
    trace = parse_trace(text, inst)
    r = check_proof(trace, inst)
    out = {"valid": r.valid, "t_learn_count": r.t_learn_count}
    if r.first_error:
        out["first_error"] = {"step": r.first_error[0], "message": r.first_error[1]}
    print(json.dumps(out))
    return 0 if r.valid else 1


def cmd_run(args) -> int:
    from .harness import SolverSpec, load_solver_table, run_suite, write_stats_csv

    table = load_solver_table(args.patterns)
    solvers = []
    for s in args.solver or []:
        if s not in table:
            raise SystemExit(f"unknown solver id {s!r}; known: {', '.join(sorted(table))}")
        solvers.append(table[s])
    for k, cmd in enumerate(args.solver_cmd or []):
        sid, sep, template = cmd.partition("=")
        if not sep:
            sid, template = f"custom{k}", cmd
        base = table.get(sid)
        solvers.append(SolverSpec(sid, template, base.verdict if base else r"^(sat|unsat|unknown)\s*$",
                                  base.conflicts if base else None, base.memory_mb if base else None,
                                  base.bv_bv_flags if base else ""))
    if not solvers:
        raise SystemExit("run needs --solver or --solver-cmd")
    files = sorted(Path(args.suite).glob("*.smt2"))
    rows = run_suite(files, solvers, args.timeout, args.jobs, args.archive)
    write_stats_csv(rows, args.csv)
    print(f"{len(rows)} runs written to {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fkpbound", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write the SMT-LIB benchmark suite")
    g.add_argument("--n-min", type=int, default=3)
    g.add_argument("--n-max", type=int, default=9)
    g.add_argument("--config", action="append", default=None, help="configuration name, repeatable (default all)")
    g.add_argument("--encoding", default="all", help="E3, E2 or all")
    g.add_argument("--out", required=True)
    g.add_argument("--bitwidth", type=int)
    g.add_argument("--opt-wsel", action="store_true", help="replace write selections by distinct numerals")
    g.add_argument("--mutate-bound", action="store_true", help="assert value > N-1 (satisfiable variants)")
    g.set_defaults(func=cmd_gen)

    o = sub.add_parser("oracle", help="enumerate interleavings and check the assertion")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--bound", type=int)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("certify", help="verify the factorial lower-bound certificate")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--encoding", default="all")
    c.add_argument("--mode", default="witness", choices=["witness", "bruteforce"])
    c.add_argument("--max-n", type=int, default=5)
    c.add_argument("--json")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("solve", help="run the built-in DPLL(T) engine")
    s.add_argument("--file-internal", help="a suite file written by gen")
    s.add_argument("--n", type=int)
    s.add_argument("--encoding", default="E3")
    s.add_argument("--mutate-bound", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eager", action="store_true", help="check theory consistency at every propagation fixpoint")
    s.add_argument("--max-conflicts", type=int)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--trace", help="write the proof trace here")
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("check", help="check a proof trace")
    k.add_argument("--trace", required=True)
    k.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="run external solvers over a suite directory")
    r.add_argument("--suite", required=True)
    r.add_argument("--solver", action="append", help="solver id from the pattern table")
    r.add_argument("--solver-cmd", action="append", help="[id=]template with {file} and optional {flags}")
    r.add_argument("--patterns", help="alternative solver pattern table (JSON)")
    r.add_argument("--timeout", type=float, default=3600.0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--archive", help="directory for raw outputs whose statistics did not parse")
    r.add_argument("--csv", required=True)
    r.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "config", None) is None and args.command == "gen":
        args.config = ["all"]
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
