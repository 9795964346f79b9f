"""Command-line front end.

Exit codes: 0 success, 1 assertion violation, 2 load error, 3 usage
error, 4 runtime error raised by a builtin (or the step limit).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from termhide import __version__
from termhide.bench import DEFAULT_SIZES, LIBRARIES, OP_KINDS, corpus_text, emit_csv, emit_gnuplot, run_matrix
from termhide.engine import MODES, CheckConfig, Engine, parse_discharge
from termhide.errors import LoadError
from termhide.escaping import escape_of
from termhide.modules import flatten
from termhide.parser import parse_module
from termhide.printer import format_answer, format_conditions, format_module
from termhide.shallow import shallow_program

EXIT_OK, EXIT_VIOLATION, EXIT_LOAD, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_source(name: str) -> str:
    """A file path, or ``@name`` for a bundled corpus file."""
    if name.startswith("@"):
        base = name[1:]
        try:
            return corpus_text(base if base.endswith(".mpl") else base + ".mpl")
        except FileNotFoundError:
            raise LoadError("parse-error", "", name, "no such bundled module") from None
    try:
        return Path(name).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError("parse-error", "", name, exc.strerror or str(exc)) from None


def load(files):
    return flatten([parse_module(_read_source(f)) for f in files])


def _sizes(text: str):
    try:
        sizes = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("sizes must be comma-separated integers") from None
    if not sizes:
        raise argparse.ArgumentTypeError("no sizes given")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="termhide", description="Modular logic programs with hidden functors and run-time checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="load modules and report problems")
    c.add_argument("files", nargs="+")

    r = sub.add_parser("run", help="run a query")
    r.add_argument("files", nargs="+")
    r.add_argument("-q", "--query", required=True)
    r.add_argument("--mode", choices=MODES, default="safe-rt")
    r.add_argument("--shallow", action="store_true")
    r.add_argument("--discharge", metavar="FILE")
    r.add_argument("--trace", metavar="PATH")
    r.add_argument("--module", help="module context for the query (default: module of the last file; 'user' for a client)")
    r.add_argument("--max-answers", type=int, default=10)
    r.add_argument("--max-steps", type=int, default=None)

    e = sub.add_parser("explain", help="print conditions, escaping terms or the shallow interface")
    e.add_argument("kind", choices=("conditions", "escape", "shallow"))
    e.add_argument("module")
    e.add_argument("files", nargs="*", help="default: the bundled corpus file named after the module")

    b = sub.add_parser("bench", help="run the benchmark matrix")
    b.add_argument("--library", action="append", choices=sorted(LIBRARIES))
    b.add_argument("--op", action="append", choices=OP_KINDS)
    b.add_argument("--mode", action="append", choices=MODES)
    b.add_argument("--shallow", choices=("no", "yes", "both"), default="both")
    b.add_argument("--sizes", type=_sizes, default=DEFAULT_SIZES)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", metavar="PATH")
    b.add_argument("--gnuplot", metavar="PATH")

    sub.add_parser("version", help="print the version")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        return _dispatch(args, out)
    except UsageError as exc:
        print(f"termhide: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LoadError as exc:
        print(f"termhide: load error: {exc}", file=sys.stderr)
        return EXIT_LOAD


def _dispatch(args, out) -> int:
    if args.command == "version":
        print(f"termhide {__version__}", file=out)
        return EXIT_OK
    if args.command == "check":
        prog = load(args.files)
        for m in prog.library_modules():
            info = prog.modules[m]
            n = sum(len(prog.conditions.get(s, ())) for s in info.defs)
            print(f"{m}: {len(info.exps)} exported, {len(info.hidden)} hidden, {n} conditions", file=out)
        return EXIT_OK
    if args.command == "run":
        return _run(args, out)
    if args.command == "explain":
        return _explain(args, out)
    return _bench(args, out)


def _run(args, out) -> int:
    discharge = frozenset()
    if args.discharge:
        if args.mode != "safe-ct-rt":
            raise UsageError("--discharge requires --mode safe-ct-rt")
        try:
            discharge = parse_discharge(Path(args.discharge).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read {args.discharge}: {exc.strerror}") from None
    if args.max_answers < 1:
        raise UsageError("--max-answers must be at least 1")
    prog = load(args.files)
    module = args.module or parse_module(_read_source(args.files[-1])).name
    if module not in prog.modules:
        raise UsageError(f"unknown module {module}")
    eng = Engine(prog, CheckConfig(args.mode, args.shallow, discharge), max_steps=args.max_steps)
    v = eng.solve(args.query, module=module, trace=bool(args.trace), max_answers=args.max_answers)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            for s in v.trace:
                f.write(s.line() + "\n")
    for i, a in enumerate(v.answers):
        if i:
            print(";", file=out)
        print(format_answer(a), file=out)
    if v.violation is not None:
        w = v.violation
        print(f"violation: {w.condition} ({w.kind})", file=out)
        print(f"  goal: {w.goal}", file=out)
        store = ", ".join(f"{k} = {t}" for k, t in w.store.items())
        print(f"  store: {store or 'true'}", file=out)
        return EXIT_VIOLATION
    if v.error is not None:
        print(f"error: {v.error}", file=out)
        return EXIT_RUNTIME
    if not v.answers:
        print("false.", file=out)
    return EXIT_OK


def _explain(args, out) -> int:
    files = args.files or ["@" + args.module]
    prog = load(files)
    if args.module not in prog.library_modules():
        raise UsageError(f"unknown module {args.module}")
    if args.kind == "conditions":
        out.write(format_conditions(prog, args.module))
    elif args.kind == "escape":
        out.write(escape_of(args.module, prog).text())
    else:
        out.write(format_module(shallow_program(prog), args.module))
    return EXIT_OK


def _bench(args, out) -> int:
    if args.reps < 3:
        raise UsageError("--reps must be at least 3")
    sizes = tuple(args.sizes)
    if any(a >= b for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
        raise UsageError("--sizes must be positive and strictly increasing")
    shallow = {"no": (False,), "yes": (True,), "both": (False, True)}[args.shallow]
    rows = run_matrix(args.library, args.op or OP_KINDS, args.mode or MODES, shallow, sizes, args.reps, args.seed)
    if args.gnuplot:
        emit_gnuplot(rows, args.gnuplot)
    if args.csv:
        emit_csv(rows, args.csv)
    if not args.csv and not args.gnuplot:
        out.write(emit_csv(rows))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
