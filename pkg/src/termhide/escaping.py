"""Over-approximation of the terms that can escape a module.

The description is a union of property names (plus ``usr``).  Materializing
it yields a regtype ``esc_<m>/1`` whose clauses are the productions with
a head functor hidden in ``m`` (or a user functor that may carry hidden
subterms), reachable from those properties, followed by the ``usr``
fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from termhide.assertions import lit_names
from termhide.modules import BUILTIN, FlatProgram
from termhide.regtypes import INT, TERM, USR, Grammar, Production, usr_check
from termhide.terms import USER, Struct, Symbol, deref, variant_key


@dataclass(frozen=True)
class EscapeDescription:
    module: str
    props: frozenset  # property symbols
    has_top: bool = False
    includes_usr: bool = True


@dataclass
class MaterializedEscape:
    """``esc_<m>/1`` as clause templates ``(head_arg, body)``; variables
    are ``Var(i)`` local to each clause."""

    module: str
    sym: Symbol
    clauses: list = field(default_factory=list)
    has_top: bool = False

    def productions(self) -> list[Production]:
        if self.has_top:
            return [Production("any")]
        out = []
        for arg, body in self.clauses:
            lits: dict = {}
            for g in body:
                lits.setdefault(g.args[0].id, set()).add(g.sym)
            out.append(Production("func", arg.sym, tuple(frozenset(lits.get(a.id, ())) for a in arg.args)))
        out.append(Production("var", None, (frozenset((USR,)),)))
        return out

    def check(self, t, s: dict, grammar: Grammar) -> bool:
        """Does ``esc_m(t)`` succeed without binding variables of ``t``?"""
        if self.has_top:
            return True
        t = deref(t, s)
        if t.__class__ is Struct:
            for arg, body in self.clauses:
                if arg.sym != t.sym:
                    continue
                if all(grammar.member(g.sym, t.args[arg.args.index(g.args[0])], s) for g in body):
                    return True
        return usr_check(t, s)

    def text(self) -> str:
        from termhide.printer import format_clause

        name = self.sym.name
        if self.has_top:
            return f"{name}(A1) :- term(A1).\n"
        lines = []
        for arg, body in self.clauses:
            head = Struct(self.sym, (arg,))
            lines.append(format_clause(head, body, qualify=True))
        lines.append(f"{name}(A1) :- usr(A1).")
        return "\n".join(lines) + "\n"


def escaping_terms(m: str, prog: FlatProgram, refine: dict | None = None, grammar: Grammar | None = None) -> EscapeDescription:
    """Property names constraining the arguments of exported predicates on
    success and of imported predicates on call, with subsumed names
    pruned.  ``refine`` may map a predicate symbol to tighter conditions
    (e.g. from analysis) used instead of the declared ones."""
    refine = refine or {}
    info = prog.modules[m]
    names: set = set()
    for sym in info.exps:
        for c in refine.get(sym, prog.conditions.get(sym, ())):
            if c.kind == "success":
                names |= lit_names(c.post, range(sym.arity))
    for sym in info.imps:
        if sym.module in (m, BUILTIN):
            continue
        for c in refine.get(sym, prog.conditions.get(sym, ())):
            if c.kind == "calls":
                for conj in c.pre:
                    names |= lit_names(conj, range(sym.arity))
    has_top = TERM in names
    names.discard(TERM)
    grammar = grammar or Grammar(prog)
    return EscapeDescription(m, frozenset(_prune(names, grammar)), has_top)


def _prune(names: set, grammar: Grammar) -> set:
    """Drop P when some other Q in the set contains it (ties keep the
    first name in sorted order)."""
    order = sorted(names, key=str)
    keep = set(order)
    for p in order:
        for q in order:
            if p is q or q not in keep or p not in keep:
                continue
            if grammar.contains(p, q):
                if grammar.contains(q, p) and str(q) > str(p):
                    continue
                keep.discard(p)
                break
    return keep


def reachable(props, grammar: Grammar) -> tuple[list, bool]:
    """Properties reachable through variable productions (``p(X) :- q(X)``)
    and whether ``term`` is among them."""
    seen: list = []
    top = False
    stack = sorted(props, key=str, reverse=True)
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        if p == TERM:
            top = True
            continue
        seen.append(p)
        if p in (INT, USR):
            continue
        for prod in grammar.productions(p):
            if prod.kind == "var":
                if not prod.args[0]:
                    top = True
                stack.extend(sorted(prod.args[0], key=str, reverse=True))
    return seen, top


def materialize(e: EscapeDescription, prog: FlatProgram, grammar: Grammar | None = None) -> MaterializedEscape:
    m = e.module
    grammar = grammar or Grammar(prog)
    sym = Symbol(f"esc_{m}", 1, m)
    for p in e.props:
        if p not in (INT, USR) and p not in prog.preds:
            raise KeyError(f"undefined property {p}")
    props, top = reachable(e.props, grammar)
    out = MaterializedEscape(m, sym, has_top=e.has_top or top)
    if out.has_top:
        return out
    seen = set()
    clauses = []
    for p in props:
        if p in (INT, USR):
            continue
        for c in prog.preds[p].clauses:
            arg = c.head.args[0]
            if arg.__class__ is not Struct:
                continue
            if arg.sym.module == m or not _user_safe(c, grammar):
                key = variant_key(Struct(Symbol("$clause", 1 + len(c.body)), (arg,) + tuple(c.body)))
                if key in seen:
                    continue
                seen.add(key)
                clauses.append((arg, tuple(c.body)))
    clauses.sort(key=lambda cb: (cb[0].sym.name, cb[0].sym.arity, cb[0].sym.module))
    out.clauses = clauses
    return out


def _user_safe(clause, grammar: Grammar) -> bool:
    """A user-functor clause whose arguments can only hold user terms is
    already covered by the ``usr`` fallback."""
    arg = clause.head.args[0]
    if arg.sym.module != USER:
        return False
    lits: dict = {}
    for g in clause.body:
        lits.setdefault(g.args[0].id, set()).add(g.sym)
    for a in arg.args:
        props = lits.get(a.id)
        if not props or not any(grammar.contains(p, USR) for p in props):
            return False
    return True


def escape_of(m: str, prog: FlatProgram) -> MaterializedEscape:
    """Cached materialized escape description of ``m``."""
    cache = prog.cache.setdefault("escape", {})
    hit = cache.get(m)
    if hit is None:
        g = prog.cache.get("grammar") or prog.cache.setdefault("grammar", Grammar(prog))
        hit = cache[m] = materialize(escaping_terms(m, prog, grammar=g), prog, g)
    return hit
