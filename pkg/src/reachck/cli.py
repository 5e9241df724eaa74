"""Command-line driver: check, run, graph, and fuzz over .rt files.

Exit codes: 0 success, 1 type error, 2 parse error, 3 oracle failure
(run --preserve), 10 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .environments import Store
from .errors import ParseError, TypeCheckError
from .evaluator import AlreadyValue, Stuck, step
from .graphs import collect_bindings, render_figure, to_dot
from .harness import gen_well_typed, preservation_check
from .parser import parse_term
from .printer import qtype_to_str, term_to_str
from .syntax import is_value
from .typecheck import typecheck_program

EXIT_OK = 0
EXIT_TYPE_ERROR = 1
EXIT_PARSE_ERROR = 2
EXIT_ORACLE_FAILURE = 3
EXIT_IO_ERROR = 10


def _span_dict(span):
    if span is None:
        return {"startLine": 0, "startCol": 0, "endLine": 0, "endCol": 0}
    return {"startLine": span.start_line, "startCol": span.start_col,
            "endLine": span.end_line, "endCol": span.end_col}


def _diagnostic(kind: str, span, message: str) -> dict:
    return {"severity": "error", "kind": kind, "span": _span_dict(span),
            "message": message}


def _emit(diags: list, as_json: bool, path: str):
    if as_json:
        print(json.dumps(diags, indent=2))
        return
    for d in diags:
        s = d["span"]
        print(f"{path}:{s['startLine']}:{s['startCol']}: "
              f"{d['kind']}: {d['message']}")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        sys.exit(EXIT_IO_ERROR)


def _check_file(path: str, as_json: bool) -> int:
    text = _read(path)
    try:
        term = parse_term(text)
    except ParseError as e:
        _emit([_diagnostic("ParseError", e.span, e.message)], as_json, path)
        return EXIT_PARSE_ERROR
    try:
        qt = typecheck_program(term)
    except TypeCheckError as e:
        _emit([_diagnostic(e.kind.value, e.span, e.message)], as_json, path)
        return EXIT_TYPE_ERROR
    if as_json:
        print(json.dumps([]))
    else:
        print(f"{path}: ok: {qtype_to_str(qt)}")
    return EXIT_OK


def cmd_check(args) -> int:
    if args.all:
        target = Path(args.path)
        if not target.is_dir():
            print(f"error: {args.path} is not a directory", file=sys.stderr)
            return EXIT_IO_ERROR
        worst = EXIT_OK
        for path in sorted(target.glob("*.rt")):
            code = _check_file(str(path), args.json)
            worst = max(worst, code)
        return worst
    return _check_file(args.path, args.json)


def cmd_run(args) -> int:
    text = _read(args.path)
    try:
        term = parse_term(text)
    except ParseError as e:
        _emit([_diagnostic("ParseError", e.span, e.message)], args.json, args.path)
        return EXIT_PARSE_ERROR
    try:
        typecheck_program(term)
    except TypeCheckError as e:
        _emit([_diagnostic(e.kind.value, e.span, e.message)], args.json, args.path)
        return EXIT_TYPE_ERROR
    if args.preserve:
        report = preservation_check(term, fuel=args.fuel, name=args.path)
        if not report.ok:
            print(json.dumps(report.to_dict(), indent=2))
            return EXIT_ORACLE_FAILURE
    current, store, steps = term, Store(), 0
    while steps < args.fuel:
        out = step(current, store)
        if isinstance(out, AlreadyValue):
            break
        if isinstance(out, Stuck):
            print(f"stuck after {steps} steps: {out.reason}")
            return EXIT_ORACLE_FAILURE
        if args.trace:
            print(f"step {steps}: {out.rule}")
        current, store = out.term, out.store
        steps += 1
    if is_value(current):
        print(term_to_str(current))
    else:
        print(f"fuel exhausted after {steps} steps")
    return EXIT_OK


def cmd_graph(args) -> int:
    text = _read(args.path)
    try:
        term = parse_term(text)
    except ParseError as e:
        _emit([_diagnostic("ParseError", e.span, e.message)], args.json, args.path)
        return EXIT_PARSE_ERROR
    try:
        bindings = collect_bindings(term)
    except TypeCheckError as e:
        _emit([_diagnostic(e.kind.value, e.span, e.message)], args.json, args.path)
        return EXIT_TYPE_ERROR
    sys.stdout.write(to_dot(bindings))
    if args.render:
        render_figure(bindings, args.render)
    return EXIT_OK


def cmd_fuzz(args) -> int:
    seed = int(os.environ.get("REACHCK_SEED", "0"))
    well_typed = 0
    for i in range(args.count):
        term = gen_well_typed(seed + i, size=args.size)
        try:
            typecheck_program(term)
            well_typed += 1
        except TypeCheckError:
            pass
        if args.print_terms:
            print(term_to_str(term))
    print(f"generated {args.count} programs, {well_typed} well-typed "
          f"(seed {seed})")
    return EXIT_OK if well_typed == args.count else EXIT_ORACLE_FAILURE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="reachck",
        description="reachability-qualifier checker, evaluator, and "
                    "metatheory harness for .rt programs")
    sub = ap.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="type check a program")
    p_check.add_argument("path")
    p_check.add_argument("--json", action="store_true")
    p_check.add_argument("--all", action="store_true",
                         help="check every .rt file in a directory")
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="evaluate a program")
    p_run.add_argument("path")
    p_run.add_argument("--json", action="store_true")
    p_run.add_argument("--fuel", type=int, default=100000)
    p_run.add_argument("--trace", action="store_true",
                       help="log the reduction rule of every step")
    p_run.add_argument("--preserve", action="store_true",
                       help="re-typecheck after every step")
    p_run.set_defaults(func=cmd_run)

    p_graph = sub.add_parser("graph", help="emit the reachability graph as DOT")
    p_graph.add_argument("path")
    p_graph.add_argument("--json", action="store_true")
    p_graph.add_argument("--render", metavar="FILE",
                         help="also draw the graph to an image file")
    p_graph.set_defaults(func=cmd_graph)

    p_fuzz = sub.add_parser("fuzz", help="generate well-typed programs")
    p_fuzz.add_argument("--count", type=int, default=100)
    p_fuzz.add_argument("--size", type=int, default=5)
    p_fuzz.add_argument("--print-terms", action="store_true")
    p_fuzz.set_defaults(func=cmd_fuzz)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = args.func(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
