"""Random program, query and regtype generators shared by the tests."""

from __future__ import annotations

import random
import re

from termhide.bench import LIBRARIES, library_program
from termhide.modules import flatten
from termhide.parser import parse_module

# ---------------------------------------------------------------------------
# tiny two-module programs

POOL = {
    "wrap": ["wrap(X, h(X))."],
    "unwrap": ["unwrap(h(X), X)."],
    "start": ["start(_, z)."],
    "twice": ["twice(X, h(h(X)))."],
    "depth": ["depth(z, z).", "depth(h(X), N) :- depth(X, N)."],
    "same": ["same(X, X)."],
    "first": ["first(a, b).", "first(b, a).", "first(X, X) :- X < 3."],
    "choose": ["choose(_, z).", "choose(_, h(z)).", "choose(X, X)."],
    "small": ["small(X, Y) :- X < 4, Y = X.", "small(X, z) :- X >= 4."],
    "spin": ["spin(X, Y) :- spin(X, Y)."],
}
PROPS = ("t", "u", "key", "term", "int")
ARGS = ("a", "b", "0", "1", "5", "z", "h(z)", "h(a)", "X")

LIB_HEADER = """\
:- regtype key/1.
key(X) :- int(X).
:- regtype t/1.
t(z).
t(h(X)) :- t(X).
:- regtype u/1.
u(a).
u(b).
"""


def _assertion(rng, name):
    pre = ", ".join(f"{rng.choice(PROPS)}({v})" for v in "XY")
    post = ", ".join(f"{rng.choice(PROPS)}({v})" for v in "XY")
    return f":- pred {name}(X, Y) : {pre} => {post}."


def tiny_program(rng: random.Random):
    """Sources of a random ``lib``/``app`` pair and the predicates a
    ``user`` query may call."""
    names = rng.sample(sorted(POOL), rng.randint(3, 6))
    if "spin" in names and rng.random() < 0.7:
        names.remove("spin")
    exports = [n for n in names if rng.random() < 0.8] or names[:1]
    hidden = [h for h in ("h/1", "z/0") if rng.random() < 0.8]
    lines = [f":- module(lib, [{','.join(n + '/2' for n in exports)}])."]
    lines += [f":- hide({h})." for h in hidden]
    lines.append(LIB_HEADER)
    for n in names:
        for _ in range(rng.choice((0, 1, 1, 2))):
            lines.append(_assertion(rng, n))
        lines.extend(POOL[n])
    lib = "\n".join(lines) + "\n"
    goes = []
    app = [":- module(app, [go/2, go2/2]).", f":- use_module(lib, [{','.join(n + '/2' for n in exports)}])."]
    app.append(":- regtype u/1.\nu(a).\nu(b).")
    for g in ("go", "go2"):
        chain = [rng.choice(exports) for _ in range(rng.randint(1, 3))]
        vs = ["X"] + [f"V{i}" for i in range(len(chain) - 1)] + ["Y"]
        body = ", ".join(f"{p}({a}, {b})" for p, a, b in zip(chain, vs, vs[1:]))
        if rng.random() < 0.5:
            app.append(f":- pred {g}(X, Y) : {rng.choice(('u', 'term', 'int'))}(X) => term(Y).")
        app.append(f"{g}(X, Y) :- {body}.")
        goes.append(g)
    return lib, "\n".join(app) + "\n", exports + goes


def tiny_queries(rng: random.Random, callable_, n: int):
    out = []
    for _ in range(n):
        p = rng.choice(callable_)
        a = rng.choice(ARGS)
        b = rng.choice(("Y", "Y", "z", "h(z)", "a"))
        out.append(f"{p}({a}, {b})")
    return out


def load(*texts):
    return flatten([parse_module(t) for t in texts])


# ---------------------------------------------------------------------------
# corpus driver queries

FORGED = ("tree(empty,1,empty)", "empty", "nil", "node(nil,1,nil,b)", "heap(nil)", "foo")


def corpus_query(rng: random.Random, library: str, ops: int | None = None, invalid: float = 0.15) -> str:
    """A conjunction building a structure and querying it; some steps use
    forged structures or ill-typed keys."""
    lib = LIBRARIES[library]
    goals = [lib.empty.replace("T", "T0")]
    cur = "T0"
    ops = rng.randint(1, 7) if ops is None else ops
    for i in range(1, ops + 1):
        nxt = f"T{i}"
        r = rng.random()
        key = str(rng.randint(0, 20))
        src = cur
        if r < invalid / 3:
            key = rng.choice(("a", "K", "f(1)"))
        elif r < 2 * invalid / 3:
            src = rng.choice(FORGED)
        elif r < invalid:
            src = "_"
        if rng.random() < 0.75:
            goals.append(_subst(lib.insert, K=key, T0=src, T=nxt))
            cur = nxt
        else:
            goals.append(_subst(lib.peek, T0=src, K=f"R{i}"))
    if library == "binary-tree" and rng.random() < 0.3:
        goals.append(f"lookup({rng.randint(0, 20)},{cur})")
    return ", ".join(goals)


def _subst(template: str, **given) -> str:
    return re.sub(r"\b(T0|T|K)\b", lambda m: given.get(m.group(1), m.group(1)), template)


def corpus_program():
    """All three libraries loaded together."""
    from termhide.bench import build_corpus

    return flatten(build_corpus())


def program_for(library: str):
    return library_program(library)


# ---------------------------------------------------------------------------
# regtypes over a small alphabet

ALPHABET = (("a", 0), ("f", 1), ("g", 2))


def random_regtypes(rng: random.Random, k: int = 5):
    """``k`` deterministic regtypes ``r0..r{k-1}`` over a, f/1, g/2 and
    int, as ``(source, productions)``; later types tend to relax earlier
    ones so that containments occur."""
    lines = [":- module(rt, [])."]
    types: list[dict] = []
    for i in range(k):
        if types and rng.random() < 0.5:
            base = dict(rng.choice(types))
            prods = {f: list(args) for f, args in base.items()}
            for f in list(prods):
                prods[f] = [rng.choice((a, "term", a, f"r{rng.randrange(i)}")) for a in prods[f]]
            if rng.random() < 0.5:
                f, n = rng.choice(ALPHABET)
                prods.setdefault((f, n), [rng.choice(("int", "term", f"r{rng.randrange(i)}")) for _ in range(n)])
            if rng.random() < 0.2:
                prods.setdefault(("int", 0), [])
        else:
            prods = {}
            for f, n in ALPHABET:
                if rng.random() < 0.6:
                    prods[(f, n)] = [rng.choice(("int", "term", f"r{i}", *(f"r{j}" for j in range(i)))) for _ in range(n)]
            if rng.random() < 0.3 or not prods:
                prods[("int", 0)] = []
        types.append(prods)
        lines.append(f":- regtype r{i}/1.")
        for (f, n), args in sorted(prods.items()):
            if f == "int":
                lines.append(f"r{i}(X) :- int(X).")
                continue
            vs = [f"X{j}" for j in range(n)]
            head = f"r{i}({f}({','.join(vs)}))" if n else f"r{i}({f})"
            body = [f"{p}({v})" for p, v in zip(args, vs) if p != "term"]
            lines.append(head + (" :- " + ", ".join(body) if body else "") + ".")
    return "\n".join(lines) + "\n", types


LEAVES = ("a", "b", 0)


def universe(depth: int) -> list:
    """All terms over a, b, 0, f/1, g/2 up to ``depth``, as tuples."""
    u = list(LEAVES)
    for _ in range(depth - 1):
        u = list(LEAVES) + [("f", x) for x in u] + [("g", x, y) for x in u for y in u]
    return u


def members(types: list, depth: int) -> list[set]:
    """Members of each type among ``universe(depth)``, by direct bottom-up
    reading of the productions."""
    k = len(types)
    univ = list(LEAVES)
    cur = [set() for _ in range(k)]
    for i, prods in enumerate(types):
        if ("int", 0) in prods:
            cur[i].add(0)
        if ("a", 0) in prods:
            cur[i].add("a")
    for _ in range(depth - 1):
        def sel(p, prev_univ=univ, prev=cur):
            if p == "term":
                return prev_univ
            if p == "int":
                return [0]
            return prev[int(p[1:])]

        nxt = []
        for i, prods in enumerate(types):
            s = {x for x in (0, "a") if x in cur[i]}
            if ("f", 1) in prods:
                s.update(("f", x) for x in sel(prods[("f", 1)][0]))
            if ("g", 2) in prods:
                a1, a2 = prods[("g", 2)]
                ys = list(sel(a2))
                s.update(("g", x, y) for x in sel(a1) for y in ys)
            nxt.append(s)
        univ = list(LEAVES) + [("f", x) for x in univ] + [("g", x, y) for x in univ for y in univ]
        cur = nxt
    return cur



# ---------------------------------------------------------------------------
# acceptance report lines, printed by conftest at the end of the run

REPORT: list[str] = []


def report(tag: str, title: str, ok: bool, detail: str = "") -> bool:
    line = f"{tag} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    REPORT.append(line)
    print(line)
    return ok
