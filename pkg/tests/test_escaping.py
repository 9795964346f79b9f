import random
from dataclasses import replace

import pytest

import programs as P
from termhide.bench import LIBRARIES, config_for, library_program
from termhide.engine import Engine
from termhide.escaping import escape_of, escaping_terms, materialize
from termhide.modules import load_texts
from termhide.regtypes import Grammar, usr_check
from termhide.terms import Struct, Symbol, Var, subterms

BT = library_program("binary-tree")


def sym(name, module="bt"):
    return Symbol(name, 1, module)


def test_bt_description():
    e = escaping_terms("bt", BT)
    assert not e.has_top
    assert e.props == {sym("val_tree"), sym("val_key")}


def test_bt_materialized():
    esc = escape_of("bt", BT)
    assert esc.text().splitlines() == [
        "esc_bt(bt:empty).",
        "esc_bt(bt:tree(A1,A2,A3)) :- val_tree(A1), val_key(A2), val_tree(A3).",
        "esc_bt(A1) :- usr(A1).",
    ]


def _mod(body):
    return load_texts([":- module(m, [p/1]).\n:- hide(h/1).\n:- regtype k/1.\nk(X) :- int(X).\n:- regtype t/1.\nt(h(X)) :- k(X).\n" + body])


def test_no_assertions_only_usr():
    prog = _mod("p(_).")
    esc = escape_of("m", prog)
    assert esc.clauses == [] and not esc.has_top
    assert esc.text() == "esc_m(A1) :- usr(A1).\n"


def test_user_only_props_add_nothing():
    prog = _mod(":- pred p(X) : term(X) => k(X).\np(1).")
    assert escape_of("m", prog).clauses == []


def test_term_gives_top():
    prog = _mod(":- pred p(X) : int(X) => term(X).\np(1).")
    esc = escape_of("m", prog)
    assert esc.has_top and esc.text() == "esc_m(A1) :- term(A1).\n"
    assert esc.check(Struct(Symbol("h", 1, "m"), (Struct(Symbol("zz", 0, "m")),)), {}, Grammar(prog))


def test_imported_preconditions_escape():
    lib = ":- module(l, [put/1]).\n:- regtype any/1.\nany(X) :- int(X).\n:- pred put(X) : any(X).\nput(_).\n"
    cli = ":- module(c, []).\n:- use_module(l, [put/1]).\n:- hide(s/1).\ngo :- put(s(1)).\n"
    prog = load_texts([lib, cli])
    assert escaping_terms("c", prog).props == {Symbol("any", 1, "l")}


def test_usr_check():
    bt_empty = Struct(Symbol("empty", 0, "bt"))
    f = Symbol("f", 1)
    assert usr_check(Struct(f, (1,)))
    assert usr_check(Var(0))
    assert not usr_check(Struct(f, (bt_empty,)))
    assert usr_check(Var(0), {})


def test_materialize_monotone():
    # more exported properties never shrink the set of accepted terms
    text = ":- module(m, [p/1, q/1]).\n:- hide(h/1).\n:- hide(z/0).\n:- regtype a/1.\na(z).\n:- regtype b/1.\nb(h(X)) :- a(X).\n"
    small = load_texts([text + ":- pred p(X) : int(X) => a(X).\np(z).\nq(_)."])
    big = load_texts([text + ":- pred p(X) : int(X) => a(X).\np(z).\n:- pred q(X) : int(X) => b(X).\nq(_)."])
    es, eb = escape_of("m", small), escape_of("m", big)
    z = Struct(Symbol("z", 0, "m"))
    hz = Struct(Symbol("h", 1, "m"), (z,))
    samples = [z, hz, Struct(Symbol("h", 1, "m"), (hz,)), Struct(Symbol("f", 1), (hz,)), 3]
    gs, gb = Grammar(small), Grammar(big)
    for t in samples:
        if es.check(t, {}, gs):
            assert eb.check(t, {}, gb)
    assert not es.check(hz, {}, gs) and eb.check(hz, {}, gb)


def test_user_wrapper_around_hidden_is_kept():
    text = (
        ":- module(m, [p/1]).\n:- hide(z/0).\n:- regtype zt/1.\nzt(z).\n:- regtype w/1.\nw(box(X)) :- zt(X).\n"
        ":- pred p(X) : term(X) => w(X).\np(box(z)).\n"
    )
    prog = load_texts([text])
    esc = escape_of("m", prog)
    box = Struct(Symbol("box", 1), (Struct(Symbol("z", 0, "m")),))
    assert esc.check(box, {}, Grammar(prog))
    assert "esc_m(box(A1)) :- zt(A1)." in esc.text()


def test_materialize_unknown_prop():
    e = escaping_terms("bt", BT)
    with pytest.raises(KeyError):
        materialize(replace(e, props=e.props | {sym("nope")}), BT)


# -- boundary capture ----------------------------------------------------


def _hidden(t, m):
    return [x for x in subterms(t) if isinstance(x, Struct) and x.sym.module == m]


def test_boundary_capture_covers_foreign_states():
    """Every hidden term seen by a literal outside its module was part of
    an argument that crossed the boundary out of that module earlier."""
    rng = random.Random(11)
    for lib in LIBRARIES:
        m = LIBRARIES[lib].module
        prog = library_program(lib)
        eng = Engine(prog, config_for(lib, "client-safe"))
        for _ in range(60):
            captured = set()

            def boundary(term, frm, to, direction):
                if frm == m:
                    captured.update(_hidden(term, m))

            def observe(goal, module):
                if module != m:
                    for x in _hidden(Struct(Symbol("$args", len(goal.args)), goal.args), m):
                        assert x in captured, (lib, x)

            q = P.corpus_query(rng, lib, ops=rng.randint(2, 8), invalid=0.0)
            v = eng.solve(q, on_boundary=boundary, on_call=observe, max_answers=1)
            assert v.ok
