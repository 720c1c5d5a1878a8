"""``gptsim`` command line.

Exit codes: 0 success, 2 parse or validation error, 3 resource cap,
4 post-selection guard, 5 causality refusal, 1 anything else.
Reports are JSON on stdout (``--table`` prints a plain table instead).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import approx, evaluate, oracle
from .circuit import CircuitError, EnumerationTooLarge, enumerate_outcomes, validate_circuit
from .io import ParseError, circuit_from_json, digest, load_circuit, load_oracle, load_program, \
    load_rule, load_theory, read_json
from .linalg import SizeError
from .theory import check_causality, validate_theory

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_CAP, EXIT_POSTSELECT, EXIT_CAUSAL = 0, 1, 2, 3, 4, 5


class CommandError(Exception):
    def __init__(self, code: int, message: str, results=None):
        super().__init__(message)
        self.code = code
        self.results = results or {}


def _hashes(*paths) -> dict:
    return {str(p): digest(p) for p in paths if p and Path(p).is_file()}


def outcome_key(z, counts) -> str:
    sep = "" if all(k <= 10 for k in counts) else ","
    return sep.join(str(r) for r in z)


def _parse_outcome(text: str) -> tuple[int, ...]:
    text = text.strip()
    parts = text.split(",") if "," in text else list(text)
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ParseError(f"cannot parse outcome string {text!r}") from None


def _load_checked_circuit(path):
    c = load_circuit(path)
    diags = validate_circuit(c)
    if diags:
        raise CommandError(EXIT_PARSE, "invalid circuit",
                           {"diagnostics": [str(d) for d in diags]})
    return c


# ---------------------------------------------------------------- commands

def cmd_validate(args):
    t = load_theory(args.theory)
    diags = [str(d) for d in validate_theory(t)]
    results = {"theory": t.name, "valid": not diags}
    if not diags:
        report = check_causality(t)
        results.update(causal=report.is_causal,
                       violations=[{"gate": g, "residual": r} for g, r in report.violations],
                       undetermined=report.undetermined,
                       causality_notes=report.diagnostics)
    if args.circuit:
        path = Path(args.circuit)
        c = circuit_from_json(read_json(path), str(path), theory=t)
        cd = [str(d) for d in validate_circuit(c)]
        results["circuit_valid"] = not cd
        diags += cd
    code = EXIT_OK if not diags else EXIT_PARSE
    return code, results, diags, [args.theory, args.circuit]


def cmd_eval(args):
    c = _load_checked_circuit(args.circuit)
    counts = c.outcome_counts()
    results = {"engine": args.engine, "gates": len(c.nodes)}
    if args.engine == "exact":
        results["exponent"] = args.exponent

    def one(z):
        v = evaluate.probability(c, z, args.engine, args.exponent)
        if args.engine == "exact":
            return {"f": str(v.numerator), "p": v.exponent, "value": float(v)}
        return v

    if args.outcome is not None and not args.distribution:
        z = _parse_outcome(args.outcome)
        results["outcome"] = outcome_key(z, counts)
        results["probability"] = one(z)
    else:
        dist = {}
        if args.engine == "exact":
            for z, v in evaluate.distribution(c, "exact", args.exponent).items():
                dist[outcome_key(z, counts)] = {"f": str(v.numerator), "p": v.exponent,
                                                "value": float(v)}
        else:
            for z in enumerate_outcomes(c):
                dist[outcome_key(z, counts)] = one(z)
        results["distribution"] = dist
    return EXIT_OK, results, [], [args.circuit]


def cmd_accept(args):
    c = _load_checked_circuit(args.circuit)
    rule = load_rule(args.rule)
    results = {"engine": args.engine}
    if args.postselect:
        sel = evaluate.PostSelection(load_rule(args.postselect), args.threshold)
        try:
            v = evaluate.postselect(c, rule, sel, args.engine, args.exponent)
        except evaluate.PostSelectionError as e:
            raise CommandError(EXIT_POSTSELECT, str(e),
                               {"p_selected": float(e.p_s), "threshold": args.threshold})
        if isinstance(v, evaluate.ExactRatio):
            results.update(l=str(v.l), h=str(v.h))
        p = float(v)
        results["p_selected"] = float(evaluate.selected_probability(c, sel, args.engine,
                                                                    args.exponent))
        results["conditional"] = p
    else:
        p = evaluate.accept_probability(c, rule, args.engine, args.exponent)
        results["probability"] = p
    results["verdict"] = evaluate.verdict(p)
    return EXIT_OK, results, [], [args.circuit, args.rule]


def cmd_approx(args):
    c = _load_checked_circuit(args.circuit)
    try:
        rounded, cert = approx.approximate_circuit(c, args.eps)
    except ValueError as e:
        raise CommandError(EXIT_PARSE, str(e))
    counts = c.outcome_counts()
    rows = {}
    worst = 0.0
    for z in enumerate_outcomes(c):
        p = evaluate.eval_dense(c, z)
        pt = evaluate.eval_dense(rounded, z)
        worst = max(worst, abs(p - pt))
        rows[outcome_key(z, counts)] = {"P": p, "P_approx": pt, "error": abs(p - pt)}
    results = {"certificate": cert.to_dict(), "outcomes": rows, "max_error": worst,
               "within_bound": worst <= cert.bound}
    return EXIT_OK, results, [], [args.circuit]


def cmd_sample(args):
    prog = load_program(args.program)
    orc = load_oracle(args.oracle)
    if not check_causality(prog.theory).is_causal:
        raise CommandError(EXIT_CAUSAL,
                           f"theory {prog.theory.name!r} is not causal; adaptive sampling "
                           "refused (use joint evaluation)")
    est = oracle.estimate_accept(prog.theory, prog, orc, args.runs, args.seed)
    results = {"runs": est.n_runs, "accepted": est.n_accepted, "frequency": est.frequency,
               "wilson95": list(est.interval), "seed": args.seed,
               "queries_total": sum(est.query_counts),
               "queries_per_run_max": max(est.query_counts)}
    return EXIT_OK, results, [], [args.program, args.oracle]


# ---------------------------------------------------------------- plumbing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gptsim", description=__doc__.splitlines()[0])
    ap.add_argument("--table", action="store_true", help="print a table instead of JSON")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a theory and optionally a circuit")
    p.add_argument("theory", help="theory file or builtin:NAME")
    p.add_argument("circuit", nargs="?")
    p.set_defaults(func=cmd_validate)

    def engine_flags(p):
        p.add_argument("--engine", choices=evaluate.ENGINES, default="dense")
        p.add_argument("--exponent", type=int, default=evaluate.DEFAULT_EXPONENT,
                       help="dyadic precision d for the exact engine")

    p = sub.add_parser("eval", help="outcome probabilities")
    p.add_argument("circuit")
    engine_flags(p)
    p.add_argument("--outcome", help="outcome string, e.g. 01 or 0,1")
    p.add_argument("--distribution", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("accept", help="acceptance probability and BGP verdict")
    p.add_argument("circuit")
    p.add_argument("rule", help="rule file or inline JSON")
    engine_flags(p)
    p.add_argument("--postselect", help="selector rule file or inline JSON")
    p.add_argument("--threshold", type=float, default=1e-12)
    p.set_defaults(func=cmd_accept)

    p = sub.add_parser("approx", help="dyadic approximation with error certificate")
    p.add_argument("circuit")
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("sample", help="run an adaptive program against an oracle")
    p.add_argument("program")
    p.add_argument("oracle")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)
    return ap


def _print_table(report, out):
    def flat(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                yield from flat(f"{prefix}.{k}" if prefix else str(k), x)
        else:
            yield prefix, v

    rows = list(flat("", report["results"]))
    width = max((len(k) for k, _ in rows), default=0)
    print(f"# {' '.join(report['command'])}  exit={report['exit_code']}", file=out)
    for k, v in rows:
        print(f"{k:<{width}}  {v}", file=out)
    for d in report["diagnostics"]:
        print(f"! {d}", file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    inputs = []
    try:
        code, results, diags, inputs = args.func(args)
    except CommandError as e:
        code, results, diags = e.code, e.results, [str(e)] + e.results.pop("diagnostics", [])
    except ParseError as e:
        code, results, diags = EXIT_PARSE, {}, [str(e)]
    except (EnumerationTooLarge, evaluate.PathCapExceeded, SizeError) as e:
        code, results, diags = EXIT_CAP, {}, [str(e)]
    except evaluate.PostSelectionError as e:
        code, results, diags = EXIT_POSTSELECT, {}, [str(e)]
    except oracle.CausalityError as e:
        code, results, diags = EXIT_CAUSAL, {}, [str(e)]
    except (CircuitError, oracle.StructuralError, oracle.OracleDomainError, KeyError) as e:
        code, results, diags = EXIT_PARSE, {}, [str(e)]
    if not inputs:
        inputs = [a for a in vars(args).values() if isinstance(a, str)]
    report = {"command": ["gptsim"] + argv, "inputs": _hashes(*inputs), "exit_code": code,
              "results": results, "diagnostics": diags,
              "wall_time": time.perf_counter() - start}
    if args.table:
        _print_table(report, out)
    else:
        json.dump(report, out, indent=2)
        out.write("\n")
    return code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
