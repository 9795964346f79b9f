"""Regular types as tree grammars: productions, containment, membership.

Every regtype clause is one production.  ``p(f(X,Y)) :- q(X)`` becomes a
``func`` production for ``f/2`` whose argument constraints are ``({q}, {})``
(an empty set means unconstrained).  ``p(V) :- q(V), r(V)`` is a ``var``
production: any term satisfying both ``q`` and ``r``.  Integer constants
give ``const`` productions.  The builtins ``int``, ``term`` and ``usr`` have
single pseudo-productions.
"""

from __future__ import annotations

from dataclasses import dataclass

from termhide.modules import BUILTIN, FlatProgram
from termhide.terms import USER, Struct, Symbol, Var, deref

INT = Symbol("int", 1, BUILTIN)
TERM = Symbol("term", 1, BUILTIN)
USR = Symbol("usr", 1, BUILTIN)


@dataclass(frozen=True)
class Production:
    kind: str  # func | const | var | int | any | usr
    head: object = None  # Symbol for func, int for const
    args: tuple = ()  # tuple of frozensets of property symbols


def usr_check(t, s: dict | None = None) -> bool:
    """True iff every functor of ``t`` (resolved under ``s``) is a ``user``
    functor.  Integers and unbound variables count as user terms."""
    s = s or {}
    stack = [t]
    while stack:
        t = deref(stack.pop(), s)
        if t.__class__ is Struct:
            if t.sym.module != USER:
                return False
            stack.extend(t.args)
    return True


def productions_of(pred) -> list[Production]:
    out = []
    for c in pred.clauses:
        arg = c.head.args[0]
        lits: dict[int, set] = {}
        for g in c.body:
            lits.setdefault(g.args[0].id, set()).add(g.sym)
        if arg.__class__ is Var:
            out.append(Production("var", None, (frozenset(lits.get(arg.id, ())),)))
        elif arg.__class__ is int:
            out.append(Production("const", arg))
        else:
            out.append(Production("func", arg.sym, tuple(frozenset(lits.get(a.id, ())) for a in arg.args)))
    return out


class Grammar:
    """Regtype productions of a program with a containment cache.

    ``extra`` maps additional (generated) property symbols to production
    lists, e.g. escape descriptions that are not part of the program.
    """

    def __init__(self, prog: FlatProgram, extra: dict | None = None):
        self.prog = prog
        self.extra = dict(extra or {})
        self._prods: dict = {}
        self.cache: dict = {}  # (p, q) -> True | False, top-level results only
        self._false: set = set()
        self._matchers: dict = {}

    def productions(self, p: Symbol) -> list[Production]:
        if p == INT:
            return [Production("int")]
        if p == TERM:
            return [Production("any")]
        if p == USR:
            return [Production("usr")]
        if p in self.extra:
            return self.extra[p]
        prods = self._prods.get(p)
        if prods is None:
            pred = self.prog.preds.get(p)
            if pred is None or not pred.is_regtype:
                raise KeyError(f"{p} is not a regtype")
            prods = self._prods[p] = productions_of(pred)
        return prods

    # -- containment ---------------------------------------------------

    def contains(self, p: Symbol, q: Symbol) -> bool:
        """Sound (possibly incomplete) test of language(p) <= language(q).

        Pairs revisited while their own proof is in progress are assumed to
        hold (greatest fixpoint).  Only top-level answers and refutations
        are memoized: a refutation stays valid under any assumptions, a
        proof found under assumptions may not.
        """
        key = (p, q)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        res = self._contains(p, q, set())
        self.cache[key] = res
        return res

    def _contains(self, p, q, assumed) -> bool:
        if q == TERM or p == q:
            return True
        key = (p, q)
        if key in self._false:
            return False
        if key in assumed or self.cache.get(key) is True:
            return True
        assumed.add(key)
        ok = all(self._prod_in(prod, q, assumed, set()) for prod in self.productions(p))
        assumed.discard(key)
        if not ok:
            self._false.add(key)
        return ok

    def _conj_in(self, P: frozenset, R: frozenset, assumed) -> bool:
        P = P or frozenset((TERM,))
        return all(any(self._contains(p, r, assumed) for p in P) for r in R)

    def _prod_in(self, prod: Production, q: Symbol, assumed, visiting) -> bool:
        if q == TERM:
            return True
        if q == INT:
            return prod.kind in ("int", "const") or (prod.kind == "var" and any(self._contains(p, INT, assumed) for p in prod.args[0]))
        if q == USR:
            if prod.kind in ("int", "const", "usr"):
                return True
            if prod.kind == "func":
                return prod.head.module == USER and all(self._conj_in(a, frozenset((USR,)), assumed) for a in prod.args)
            if prod.kind == "var":
                return any(self._contains(p, USR, assumed) for p in prod.args[0])
            return False
        if prod.kind == "var" and any(self._contains(p, q, assumed) for p in prod.args[0]):
            return True
        vkey = (id(prod), q)
        if vkey in visiting:
            return False
        visiting.add(vkey)
        try:
            for qp in self.productions(q):
                if qp.kind == "var":
                    if all(self._prod_in(prod, r, assumed, visiting) for r in qp.args[0]):
                        return True
                elif qp.kind == "func":
                    if prod.kind == "func" and prod.head == qp.head:
                        if all(self._conj_in(pa, qa, assumed) for pa, qa in zip(prod.args, qp.args)):
                            return True
                elif qp.kind == "const":
                    if prod.kind == "const" and prod.head == qp.head:
                        return True
            return False
        finally:
            visiting.discard(vkey)

    # -- membership ----------------------------------------------------

    def matcher(self, p: Symbol) -> "_Matcher":
        """Compiled membership test for ``p``; built once per property."""
        m = self._matchers.get(p)
        if m is None:
            m = self._build_matcher(p)
        return m

    def _build_matcher(self, p: Symbol) -> "_Matcher":
        if p == TERM:
            m = self._matchers[p] = _Matcher(_ANY)
            return m
        if p == INT:
            m = self._matchers[p] = _Matcher(_INT)
            return m
        if p == USR:
            m = self._matchers[p] = _Matcher(_USR)
            return m
        prods = self.productions(p)
        if len(prods) == 1 and prods[0].kind == "var" and len(prods[0].args[0]) == 1:
            # alias such as val_key(X) :- int(X); guard against p(X) :- p(X)
            (q,) = prods[0].args[0]
            if q != p:
                self._matchers[p] = _Matcher(_GENERAL, prop=p)  # placeholder for cycles
                m = self._matchers[p] = self.matcher(q)
                return m
        if all(pr.kind in ("func", "const") for pr in prods):
            m = self._matchers[p] = _Matcher(_TABLE, prop=p)
            for pr in prods:
                if pr.kind == "const":
                    m.consts.add(pr.head)
            for pr in prods:
                if pr.kind == "func":
                    m.table[pr.head] = tuple(
                        (i, tuple(self.matcher(r) for r in sorted(props - {TERM}, key=str)))
                        for i, props in enumerate(pr.args)
                        if props - {TERM}
                    )
            return m
        m = self._matchers[p] = _Matcher(_GENERAL, prop=p)
        return m

    def member(self, p: Symbol, t, s: dict) -> bool:
        """Does ``p(t)`` succeed without binding any variable of ``t``?

        Structural equivalent of running the regtype clauses as a
        sub-derivation and demanding an entailed answer.
        """
        stack = [(self.matcher(p), t)]
        pop = stack.pop
        push = stack.append
        while stack:
            m, t = pop()
            while t.__class__ is Var:
                b = s.get(t)
                if b is None:
                    break
                t = b
            k = m.kind
            if k is _TABLE:
                c = t.__class__
                if c is Struct:
                    sub = m.table.get(t.sym)
                    if sub is None:
                        return False
                    args = t.args
                    for i, ms in sub:
                        a = args[i]
                        for mm in ms:
                            if mm.kind is _INT:
                                while a.__class__ is Var:
                                    b = s.get(a)
                                    if b is None:
                                        return False
                                    a = b
                                if a.__class__ is not int:
                                    return False
                            else:
                                push((mm, a))
                elif c is not int or t not in m.consts:
                    return False
            elif k is _INT:
                if t.__class__ is not int:
                    return False
            elif k is _USR:
                if not usr_check(t, s):
                    return False
            elif k is _GENERAL:
                if not self._member_general(m.prop, t, s):
                    return False
        return True

    def _member_general(self, p: Symbol, t, s: dict) -> bool:
        """Membership for properties mixing variable and functor productions."""
        c = t.__class__
        for prod in self.productions(p):
            if prod.kind == "var":
                if all(self.member(r, t, s) for r in prod.args[0]):
                    return True
            elif prod.kind == "func":
                if c is Struct and t.sym == prod.head:
                    if all(self.member(r, a, s) for props, a in zip(prod.args, t.args) for r in props):
                        return True
            elif prod.kind == "const":
                if c is int and t == prod.head:
                    return True
            elif prod.kind == "int":
                if c is int:
                    return True
            elif prod.kind == "any":
                return True
            elif prod.kind == "usr":
                if usr_check(t, s):
                    return True
        return False


_ANY, _INT, _USR, _TABLE, _GENERAL = "any", "int", "usr", "table", "general"


class _Matcher:
    __slots__ = ("kind", "prop", "table", "consts")

    def __init__(self, kind, prop=None):
        self.kind = kind
        self.prop = prop
        self.table: dict = {}
        self.consts: set = set()
