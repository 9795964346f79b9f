import random

from hypothesis import given, settings
from hypothesis import strategies as st

from termhide.bench import LIBRARIES, config_for, library_program
from termhide.engine import MODES, CheckConfig, Engine, Query
from termhide.escaping import escape_of
from termhide.modules import load_texts
from termhide.parser import parse_module
from termhide.printer import format_module
from termhide.regtypes import Grammar
from termhide.shallow import containment, id_map, shallow_interface, shallow_program, spec
from termhide.terms import Symbol

BT = library_program("binary-tree")
SBT = shallow_program(BT)


def s(name, module="bt"):
    return Symbol(name, 1, module)


def test_containment_examples():
    g = Grammar(SBT)
    assert containment(s("val_tree"), s("val_tree#"), SBT, g)
    assert not containment(s("val_tree#"), s("val_tree"), SBT, g)
    assert containment(s("val_key"), Symbol("int", 1, "$builtin"), SBT, g)
    assert containment(Symbol("int", 1, "$builtin"), s("val_key"), SBT, g)
    assert containment(s("val_tree"), Symbol("term", 1, "$builtin"), SBT, g)
    assert not containment(s("val_key"), s("val_tree"), SBT, g)


def test_spec_examples():
    esc = escape_of("bt", BT)
    name, clauses = spec(s("val_tree"), esc, BT)
    assert name == "val_tree#" and len(clauses) == 2
    assert spec(s("val_key"), esc, BT) == ("val_key", None)


def test_spec_idempotent():
    esc = escape_of("bt", SBT)
    assert spec(s("val_tree#"), esc, SBT) == ("val_tree#", None)
    assert shallow_program(SBT) is SBT


def test_shallow_output():
    text = format_module(SBT, "bt")
    assert "val_tree#(empty).\nval_tree#(tree(_,_,_)).\n" in text
    assert ":- pred insert(A1,A2,A3) : val_key(A1), val_tree#(A2), term(A3) => val_key(A1), val_tree(A2), val_tree(A3).\n" in text
    assert "insert(A1,A2,A3) :- insert$inner(A1,A2,A3).\n" in text
    # internal recursion goes to the inner copy
    assert "insert$inner(A1,A2,A5)" in text


def test_printed_shallow_modules_reparse():
    for lib in LIBRARIES:
        m = LIBRARIES[lib].module
        sp = shallow_program(library_program(lib))
        text = format_module(sp, m)
        again = load_texts([text], internal=True)
        assert format_module(again, m) == text


def test_id_map():
    ids = id_map(SBT)
    assert ids["bt:insert$inner/3#0"] == "bt:insert/3#0"
    assert ids["bt:insert/3#1"] == "bt:insert/3#1"


def test_top_escape_is_identity():
    prog = load_texts([":- module(m, [p/1]).\n:- hide(h/1).\n:- regtype t/1.\nt(h(X)) :- int(X).\n:- pred p(X) : t(X) => term(X).\np(h(1))."])
    assert escape_of("m", prog).has_top
    out = shallow_interface("m", prog)
    pre = [a for a in out.assertions if a.head.sym.name == "p"][0].pre
    assert pre[0].sym.name == "t"


def test_no_exports_unchanged():
    prog = load_texts([":- module(m, []).\np(1)."])
    assert shallow_interface("m", prog) is prog.source("m")


def test_hidden_count_in_corpus():
    assert [len(library_program(n).modules[LIBRARIES[n].module].hidden) for n in LIBRARIES] == [2, 2, 3]


BUGGY = """\
:- module(w, [mk/1, step/2]).
:- hide(c/1).
:- regtype small/1.
small(c(X)) :- int(X).
:- regtype k/1.
k(X) :- int(X).
:- pred mk(X) : term(X) => small(X).
mk(c(0)).
:- pred step(X, Y) : small(X), term(Y) => small(Y).
step(c(N), c(M)) :- bump(N, M).
step(c(N), oops) :- N > 1.
bump(0, 1).
bump(1, 2).
bump(2, a).
"""


def test_wrapper_violations_map_to_origins():
    prog = load_texts([BUGGY])
    queries = [
        "mk(X), step(X, Y), step(Y, Z)",
        "mk(X), step(X, Y), step(Y, Z), step(Z, W)",
        "step(c(0), Y)",
        "mk(X), step(X, Y), step(Y, Z), step(Z, W), step(W, V)",
    ]
    for mode in MODES:
        full = Engine(prog, CheckConfig(mode))
        sh = Engine(prog, CheckConfig(mode, shallow=True))
        for q in queries:
            a, b = full.solve(q, max_answers=3), sh.solve(q, max_answers=3)
            assert a.signature() == b.signature(), (mode, q)
    v = Engine(prog, CheckConfig("safe-rt", shallow=True)).solve(queries[1])
    assert v.violation.condition == "w:step$inner/2#1" and v.violation.origin == "w:step/2#1"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-5, 50), max_size=12), st.sampled_from(sorted(LIBRARIES)))
def test_shallow_precondition_agrees_on_escaping_terms(keys, lib):
    """Built structures and user terms are exactly the escaping terms the
    shallow test sees; on them the shallow and full tests agree."""
    prog = library_program(lib)
    sp = shallow_program(prog)
    m = LIBRARIES[lib].module
    eng = Engine(prog, config_for(lib, "unsafe"))
    t = eng.solve(LIBRARIES[lib].empty, max_answers=1).answers[0]["T"]
    ins = Query.parse(LIBRARIES[lib].insert, prog)
    samples = [t]
    for k in keys:
        t = eng.solve(ins.bind(K=k, T0=t), max_answers=1).answers[0]["T"]
        samples.append(t)
    samples += [parse_module(f":- module(x, []).\nx({f}).").clauses[0].head.args[0] for f in ("nil", "empty", "f(1)")]
    g, gs = Grammar(prog), Grammar(sp)
    esc = escape_of(m, prog)
    for x in samples:
        assert esc.check(x, {}, g)
    for sym in sp.modules[m].exps:
        for sa, fa in zip(sp.assertions.get(sym, []), prog.assertions.get(sym, [])):
            for ls, lf in zip(sa.pre, fa.pre):
                for x in samples:
                    assert gs.member(ls.prop, x, {}) == g.member(lf.prop, x, {})


def test_forgeries_rejected_by_shallow_checks():
    rng = random.Random(3)
    for lib in LIBRARIES:
        eng = Engine(library_program(lib), config_for(lib, "client-safe", True))
        q = LIBRARIES[lib].insert.replace("T0", rng.choice(["tree(empty,1,empty)", "node(nil,1,nil,b)", "heap(nil)"]))
        v = eng.solve(q.replace("K", "1"), module="user")
        assert v.violation is not None and v.violation.kind == "calls"
