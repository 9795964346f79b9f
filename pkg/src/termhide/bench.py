"""Corpus libraries, benchmark drivers, timing and CSV output.

A benchmark cell is (library, op kind, checking mode, shallow flag, N).
The driver builds a structure of N keys (a fixed-seed permutation of
1..N) once, then times the operation as queries issued from the ``user``
pseudo-module, so every call crosses the library's module boundary.
"""

from __future__ import annotations

import csv
import gc
import io
import random
import statistics
import time
from dataclasses import dataclass
from importlib import resources

from termhide.engine import MODES, CheckConfig, Engine, Query, parse_discharge
from termhide.modules import FlatProgram, flatten
from termhide.parser import ModuleSource, parse_module

DEFAULT_SIZES = (64, 256, 1024, 4096, 8192)
MIN_BATCH_NS = 10_000_000
CSV_HEADER = ("library", "op", "mode", "shallow", "n", "ns_per_op", "checks")
OP_KINDS = ("const", "log")


@dataclass(frozen=True)
class Library:
    name: str
    module: str
    empty: str  # binds T
    insert: str  # K, T0 -> T
    peek: str  # T0 -> K


LIBRARIES = {
    "binary-tree": Library("binary-tree", "bt", "empty_tree(T)", "insert(K,T0,T)", "peek_root(T0,K)"),
    "avl-tree": Library("avl-tree", "avl", "avl_empty(T)", "avl_insert(K,T0,T)", "avl_peek(T0,K)"),
    "heap": Library("heap", "heap", "heap_empty(T)", "heap_insert(K,T0,T)", "heap_min(T0,K)"),
}


def corpus_text(name: str) -> str:
    """Source of a bundled file, e.g. ``bt.mpl`` or ``bt.discharge``."""
    return resources.files("termhide.corpus").joinpath(name).read_text(encoding="utf-8")


def build_corpus() -> list[ModuleSource]:
    return [parse_module(corpus_text(LIBRARIES[n].module + ".mpl")) for n in LIBRARIES]


_programs: dict = {}
_structures: dict = {}


def library_program(name: str) -> FlatProgram:
    prog = _programs.get(name)
    if prog is None:
        prog = _programs[name] = flatten([parse_module(corpus_text(LIBRARIES[name].module + ".mpl"))])
    return prog


def discharge_for(name: str) -> frozenset:
    return parse_discharge(corpus_text(LIBRARIES[name].module + ".discharge"))


def config_for(name: str, mode: str, shallow: bool = False) -> CheckConfig:
    """Checking configuration for a corpus library; safe-ct-rt uses the
    library's shipped discharge ledger."""
    return CheckConfig(mode, shallow, discharge_for(name) if mode == "safe-ct-rt" else frozenset())


def keys_for(n: int, seed: int = 0) -> list[int]:
    return random.Random(seed * 1_000_003 + n).sample(range(1, n + 1), n)


def build_structure(name: str, n: int, seed: int = 0):
    """The library's structure holding ``keys_for(n, seed)``."""
    key = (name, n, seed)
    hit = _structures.get(key)
    if hit is not None:
        return hit
    lib = LIBRARIES[name]
    eng = Engine(library_program(name), CheckConfig("unsafe"))
    t = eng.solve(lib.empty, max_answers=1).answers[0]["T"]
    q = Query.parse(lib.insert, eng.prog)
    for k in keys_for(n, seed):
        v = eng.solve(q.bind(K=k, T0=t), max_answers=1)
        t = v.answers[0]["T"]
    _structures[key] = t
    return t


@dataclass(frozen=True)
class BenchmarkSpec:
    library: str
    op_kind: str  # const | log
    mode: CheckConfig
    sizes: tuple = DEFAULT_SIZES
    repetitions: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.library not in LIBRARIES:
            raise ValueError(f"unknown library {self.library!r}")
        if self.op_kind not in OP_KINDS:
            raise ValueError(f"op_kind must be one of {OP_KINDS}")
        sizes = tuple(self.sizes)
        if not sizes or any(a >= b for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
            raise ValueError("sizes must be positive and strictly increasing")
        if self.repetitions < 3:
            raise ValueError("at least 3 repetitions are required")
        object.__setattr__(self, "sizes", sizes)


@dataclass(frozen=True)
class BenchRow:
    library: str
    op: str
    mode: str
    shallow: bool
    n: int
    ns_per_op: float
    checks: int


class HarnessError(RuntimeError):
    pass


def _ops(spec: BenchmarkSpec, eng: Engine, n: int) -> list:
    lib = LIBRARIES[spec.library]
    t = build_structure(spec.library, n, spec.seed)
    if spec.op_kind == "const":
        return [Query.parse(lib.peek, eng.prog).bind(T0=t)]
    q = Query.parse(lib.insert, eng.prog)
    rng = random.Random(spec.seed + 7 * n)
    return [q.bind(K=rng.randint(1, 2 * n), T0=t) for _ in range(16)]


def _run_op(eng: Engine, q):
    v = eng.solve(q, max_answers=1)
    if not v.ok or not v.answers:
        what = v.violation or v.error or "no answer"
        raise HarnessError(f"benchmark operation failed: {what}")
    return v


def _batch(eng: Engine, ops: list, iters: int) -> int:
    perf = time.perf_counter_ns
    m = len(ops)
    t0 = perf()
    for i in range(iters):
        eng.solve(ops[i % m], max_answers=1)
    return perf() - t0


def measure_cells(cells: list, repetitions: int) -> list[float]:
    """Median ns per operation for each ``(engine, ops)`` cell.

    Each cell is calibrated so that one batch runs at least
    ``MIN_BATCH_NS`` (the calibration batches double as warm-up); the
    timed batches then go round-robin over the cells so that slow drift
    of the host affects all cells alike.
    """
    enabled = gc.isenabled()
    gc.disable()
    try:
        iters = []
        for eng, ops in cells:
            k = 1
            while True:
                took = _batch(eng, ops, k)
                if took >= MIN_BATCH_NS:
                    break
                k = max(k * 2, int(k * MIN_BATCH_NS / max(took, 1)) + 1)
            iters.append(k)
        samples: list[list[float]] = [[] for _ in cells]
        for _ in range(repetitions):
            for j, (eng, ops) in enumerate(cells):
                samples[j].append(_batch(eng, ops, iters[j]) / iters[j])
        return [statistics.median(xs) for xs in samples]
    finally:
        if enabled:
            gc.enable()


def measure(eng: Engine, ops: list, repetitions: int) -> float:
    return measure_cells([(eng, ops)], repetitions)[0]


def prepare(spec: BenchmarkSpec, n: int, eng: Engine | None = None):
    """``(engine, ops, checks)`` for one size of ``spec``; runs every op
    once to validate it."""
    eng = eng or Engine(library_program(spec.library), spec.mode)
    ops = _ops(spec, eng, n)
    checks = _run_op(eng, ops[0]).stats.conditions
    for q in ops[1:]:
        _run_op(eng, q)
    return eng, ops, checks


def run_benchmark(spec: BenchmarkSpec) -> list[BenchRow]:
    eng = Engine(library_program(spec.library), spec.mode)
    prepared = [prepare(spec, n, eng) for n in spec.sizes]
    times = measure_cells([(e, ops) for e, ops, _ in prepared], spec.repetitions)
    return [
        BenchRow(spec.library, spec.op_kind, spec.mode.mode, spec.mode.shallow, n, ns, checks)
        for n, (_, _, checks), ns in zip(spec.sizes, prepared, times)
    ]


def count_checks(library: str, op_kind: str, mode: str, shallow: bool, n: int, seed: int = 0) -> int:
    """Condition evaluations for the cell's canonical operation (no timing)."""
    spec = BenchmarkSpec(library, op_kind, config_for(library, mode, shallow), (n,), 3, seed)
    eng = Engine(library_program(library), spec.mode)
    return _run_op(eng, _ops(spec, eng, n)[0]).stats.conditions


def run_matrix(libraries=None, ops=OP_KINDS, modes=MODES, shallow=(False, True), sizes=DEFAULT_SIZES, repetitions=5, seed=0) -> list[BenchRow]:
    rows = []
    for lib in libraries or list(LIBRARIES):
        for op in ops:
            for mode in modes:
                for sh in shallow:
                    spec = BenchmarkSpec(lib, op, config_for(lib, mode, sh), tuple(sizes), repetitions, seed)
                    rows.extend(run_benchmark(spec))
    return rows


def _sort_key(r: BenchRow):
    return (r.library, r.op, MODES.index(r.mode), r.shallow, r.n)


def _fields(r: BenchRow) -> list:
    return [r.library, r.op, r.mode, "yes" if r.shallow else "no", r.n, f"{r.ns_per_op:.0f}", r.checks]


def emit_csv(rows, dest=None) -> str:
    """Write rows as CSV to ``dest`` (path or file object) and return the
    text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=_sort_key):
        w.writerow(_fields(r))
    return _deliver(buf.getvalue(), dest)


def emit_gnuplot(rows, dest=None) -> str:
    """Same columns, whitespace separated, header as a comment."""
    lines = ["# " + " ".join(CSV_HEADER)]
    lines += [" ".join(str(f) for f in _fields(r)) for r in sorted(rows, key=_sort_key)]
    return _deliver("\n".join(lines) + "\n", dest)


def _deliver(text: str, dest) -> str:
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text
