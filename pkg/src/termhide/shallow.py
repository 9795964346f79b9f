"""Shallow properties and the shallow-interface module transformation.

``spec`` specializes a property with respect to a module's escape
description by dropping body literals that the description already
guarantees.  ``shallow_interface`` wraps every exported predicate
``p`` as ``p :- p$inner``, points internal calls at ``p$inner`` and
gives the wrapper's conditions the specialized preconditions.
"""

from __future__ import annotations

from dataclasses import replace

from termhide.escaping import MaterializedEscape, escaping_terms, materialize
from termhide.modules import BUILTIN, FlatProgram
from termhide.parser import ModuleSource, RawClause
from termhide.regtypes import Grammar
from termhide.terms import Struct, Symbol, Var

INNER = "$inner"
SHALLOW = "#"


def containment(p: Symbol, q: Symbol, prog: FlatProgram, grammar: Grammar | None = None) -> bool:
    """Sound test of language(p) <= language(q) over the program's regtypes."""
    return (grammar or _grammar(prog)).contains(p, q)


def _grammar(prog):
    g = prog.cache.get("grammar")
    if g is None:
        g = prog.cache["grammar"] = Grammar(prog)
    return g


def _raw(t, names: dict):
    """Compiled template -> unqualified source term with named variables."""
    c = t.__class__
    if c is Var:
        v = names.get(t)
        if v is None:
            v = names[t] = Var(len(names), f"V{len(names) + 1}")
        return v
    if c is int:
        return t
    return Struct(Symbol(t.sym.name, t.sym.arity), tuple(_raw(a, names) for a in t.args))


def spec(prop: Symbol, esc: MaterializedEscape, prog: FlatProgram, grammar: Grammar | None = None):
    """Shallow version of ``prop``: ``(name, raw clauses)``.  Returns the
    original name and ``None`` when nothing could be dropped."""
    if prop.module == BUILTIN or esc.has_top or prop.module != esc.module:
        return prop.name, None
    grammar = grammar or _grammar(prog)
    by_head: dict = {}
    for arg, body in esc.clauses:
        lits: dict = {}
        for g in body:
            lits.setdefault(g.args[0].id, set()).add(g.sym)
        by_head.setdefault(arg.sym, []).append([frozenset(lits.get(a.id, ())) for a in arg.args])
    changed = False
    clauses = []
    for c in prog.preds[prop].clauses:
        arg = c.head.args[0]
        body = list(c.body)
        if arg.__class__ is Struct and arg.sym.module == esc.module and arg.sym in by_head:
            pos = {a.id: j for j, a in enumerate(arg.args)}
            kept = []
            for g in body:
                j = pos.get(g.args[0].id)
                guaranteed = j is not None and all(any(grammar.contains(r, g.sym) for r in ec[j]) for ec in by_head[arg.sym])
                if guaranteed:
                    changed = True
                else:
                    kept.append(g)
            body = kept
        names: dict = {}
        clauses.append((_raw(c.head.args[0], names), [_raw(g, names) for g in body]))
    if not changed:
        return prop.name, None
    name = prop.name if prop.name.endswith(SHALLOW) else prop.name + SHALLOW
    out = []
    for arg, body in clauses:
        out.append(RawClause(Struct(Symbol(name, 1), (arg,)), body, 0, 0))
    return name, out


def _rename_goal(g, exported: set):
    if isinstance(g, Struct) and g.sym.key in exported:
        return Struct(Symbol(g.sym.name + INNER, g.sym.arity), g.args)
    return g


def _wrap(src: ModuleSource) -> ModuleSource:
    """M': wrappers for exported predicates, both copies keep the original
    assertions."""
    exported = set(src.exports)
    clauses = []
    for rc in src.clauses:
        head = _rename_goal(rc.head, exported)
        clauses.append(RawClause(head, [_rename_goal(g, exported) for g in rc.body], rc.line, rc.nvars))
    for name, arity in src.exports:
        args = tuple(Var(i, f"A{i + 1}") for i in range(arity))
        clauses.append(RawClause(Struct(Symbol(name, arity), args), [Struct(Symbol(name + INNER, arity), args)], 0, arity))
    asserts = []
    for ra in src.assertions:
        asserts.append(ra)
        if ra.head.sym.key in exported:
            asserts.append(replace(ra, head=_rename_goal(ra.head, exported)))
    return replace(src, clauses=clauses, assertions=asserts, internal=True)


def shallow_interface(m: str, prog: FlatProgram) -> ModuleSource:
    src = prog.source(m)
    if not src.exports:
        return src
    wrapped = _wrap(src)
    prog1 = prog.replace([wrapped])
    g1 = _grammar(prog1)
    esc = materialize(escaping_terms(m, prog1, grammar=g1), prog1, g1)
    exported = set(src.exports)
    specialized: dict = {}  # prop Symbol -> name
    extra = []
    asserts = []
    for ra in wrapped.assertions:
        if ra.head.sym.key not in exported:
            asserts.append(ra)
            continue
        pre = []
        for lit in ra.pre:
            q = prog1.cache["qualifiers"][m]
            key = lit.sym.key
            sym = Symbol(*key, BUILTIN) if key in (("int", 1), ("term", 1)) else q.pred(key, "assertion")
            name = specialized.get(sym)
            if name is None:
                name, clauses = spec(sym, esc, prog1, g1)
                specialized[sym] = name
                if clauses is not None:
                    extra.append(((name, 1), clauses))
            pre.append(Struct(Symbol(name, 1), lit.args))
        asserts.append(replace(ra, pre=pre))
    regtypes = list(wrapped.regtypes)
    clauses = list(wrapped.clauses)
    for key, cls in extra:
        if key not in regtypes:
            regtypes.append(key)
            clauses.extend(cls)
    return replace(wrapped, assertions=asserts, regtypes=regtypes, clauses=clauses)


def shallow_program(prog: FlatProgram) -> FlatProgram:
    """``prog`` with every library module replaced by its shallow
    interface (cached on the program)."""
    if "shallow_of" in prog.cache:
        return prog
    hit = prog.cache.get("shallow")
    if hit is None:
        hit = prog.replace([shallow_interface(m, prog) for m in prog.library_modules()])
        hit.cache["shallow_of"] = prog
        prog.cache["shallow"] = hit
    return hit


def id_map(shallow: FlatProgram) -> dict:
    """Condition id -> id of the original condition it stands for."""
    return {c.id: c.origin for c in shallow.all_conditions()}
