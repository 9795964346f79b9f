"""Pred assertions and their normalized assertion conditions.

A predicate with assertions ``pred H : Pre_i => Post_i`` (i = 1..n) gets
one *calls* condition whose precondition is the disjunction of all
``Pre_i`` and one *success* condition per assertion.  Condition ids have
the form ``<module>:<name>/<arity>#<k>`` with ``k = 0`` for the calls
condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from termhide.errors import LoadError
from termhide.terms import Struct, Symbol, Var

INNER_SUFFIX = "$inner"
TOP = "term"


@dataclass(frozen=True)
class PropLit:
    """``prop(A_arg)``: a unary property applied to head argument ``arg``."""

    prop: Symbol
    arg: int


@dataclass(frozen=True)
class PredAssertion:
    pred: Symbol
    pre: tuple  # conjunction of PropLit
    post: tuple


@dataclass(frozen=True)
class AssertionCondition:
    id: str
    kind: str  # "calls" | "success"
    pred: Symbol
    pre: tuple  # calls: tuple of conjunctions (DNF); success: one conjunction
    post: tuple = ()
    origin: str = ""  # id of the condition this one was derived from

    @property
    def index(self) -> int:
        return int(self.id.rsplit("#", 1)[1])


def condition_id(pred: Symbol, k: int) -> str:
    return f"{pred.module}:{pred.name}/{pred.arity}#{k}"


def origin_id(pred: Symbol, k: int) -> str:
    name = pred.name
    if name.endswith(INNER_SUFFIX):
        name = name[: -len(INNER_SUFFIX)]
    return f"{pred.module}:{name}/{pred.arity}#{k}"


def normalize(assertions: Iterable[PredAssertion]) -> list[AssertionCondition]:
    """Assertion conditions C_0..C_n for the assertions of one predicate."""
    assertions = list(assertions)
    if not assertions:
        return []
    pred = assertions[0].pred
    if any(a.pred != pred for a in assertions):
        raise ValueError("normalize expects assertions of a single predicate")
    conds = [AssertionCondition(condition_id(pred, 0), "calls", pred, tuple(a.pre for a in assertions), (), origin_id(pred, 0))]
    for k, a in enumerate(assertions, 1):
        conds.append(AssertionCondition(condition_id(pred, k), "success", pred, a.pre, a.post, origin_id(pred, k)))
    return conds


def lit_names(conj: Iterable[PropLit], args: Iterable[int]) -> set[Symbol]:
    """Property symbols P with some literal P(A) in ``conj``, A in ``args``."""
    args = set(args)
    return {lit.prop for lit in conj if lit.arg in args}


# ---------------------------------------------------------------------------
# loading


def _prop_literal(t, headvars: dict, q, prog, mod: str, line: int) -> PropLit:
    from termhide.modules import BUILTIN

    where = f"line {line}"
    if not (isinstance(t, Struct) and t.sym.arity == 1 and isinstance(t.args[0], Var)):
        raise LoadError("malformed-assertion", mod, where, f"{t!r} is not a unary property of a head variable")
    v = t.args[0]
    if v.name not in headvars:
        raise LoadError("malformed-assertion", mod, where, f"variable {v.name} does not occur in the head")
    key = t.sym.key
    if key in (("int", 1), ("term", 1)):
        sym = Symbol(key[0], 1, BUILTIN)
    else:
        try:
            sym = q.pred(key, where)
        except LoadError:
            raise LoadError("malformed-assertion", mod, where, f"unknown property {key[0]}/1") from None
        pred = prog.preds.get(sym)
        if sym.module != mod and key not in q.imports:
            raise LoadError("malformed-assertion", mod, where, f"property {key[0]}/1 is neither local nor imported")
        if pred is None or not pred.is_regtype:
            raise LoadError("malformed-assertion", mod, where, f"{key[0]}/1 is not a regtype visible in {mod}")
    return PropLit(sym, headvars[v.name])


def normalize_module(src, q, prog):
    """PredAssertions and their conditions for every asserted predicate of
    ``src``; returns two dicts keyed by predicate symbol."""
    by_pred: dict[Symbol, list[PredAssertion]] = {}
    local = set(src.predicates())
    for ra in src.assertions:
        where = f"line {ra.line}"
        key = ra.head.sym.key
        if key not in local:
            raise LoadError("malformed-assertion", src.name, where, f"assertion for undefined predicate {key[0]}/{key[1]}")
        headvars: dict[str, int] = {}
        for i, a in enumerate(ra.head.args):
            if not isinstance(a, Var) or a.name == "_" or a.name in headvars:
                raise LoadError("malformed-assertion", src.name, where, "assertion head must have distinct named variables")
            headvars[a.name] = i
        pre = tuple(_prop_literal(t, headvars, q, prog, src.name, ra.line) for t in ra.pre)
        post = tuple(_prop_literal(t, headvars, q, prog, src.name, ra.line) for t in ra.post)
        sym = Symbol(key[0], key[1], src.name)
        by_pred.setdefault(sym, []).append(PredAssertion(sym, pre, post))
    return by_pred, {sym: normalize(asrts) for sym, asrts in by_pred.items()}


def check_regtype_determinism(pred) -> None:
    """Regtype clauses must be ``p(V) :- ...`` or ``p(f(V1..Vn)) :- ...``
    (distinct variables, or a constant) with unary body literals over
    those variables, and at most one clause per head functor."""
    from termhide.modules import BUILTIN

    mod = pred.sym.module
    seen = set()
    for c in pred.clauses:
        where = f"line {c.line}"
        arg = c.head.args[0]
        if isinstance(arg, Var):
            key = None
            hvars = {arg.id}
        elif isinstance(arg, int):
            key = arg
            hvars = set()
        else:
            key = arg.sym
            hvars = set()
            for a in arg.args:
                if not isinstance(a, Var) or a.id in hvars:
                    raise LoadError("parse-error", mod, where, f"regtype {pred.sym.name}: head arguments must be distinct variables")
                hvars.add(a.id)
        if key in seen:
            raise LoadError("duplicate-definition", mod, where, f"regtype {pred.sym.name} has two clauses for the same head functor")
        seen.add(key)
        for g in c.body:
            if g.sym.arity != 1 or not isinstance(g.args[0], Var) or g.args[0].id not in hvars:
                raise LoadError("parse-error", mod, where, f"regtype {pred.sym.name}: body literals must be unary properties of head variables")
            if g.sym.module == BUILTIN and g.sym.name not in ("int", "term", "usr"):
                raise LoadError("parse-error", mod, where, f"regtype {pred.sym.name}: {g.sym.name}/1 is not a property")


def parse_conditions(text: str, prog) -> list[AssertionCondition]:
    """Read conditions back from their printed form (one per line)."""
    from termhide.modules import BUILTIN
    from termhide.parser import conj_to_list, read_term
    from termhide.terms import Symbol as Sym

    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        for kind in ("calls", "success"):
            at = line.find(f".{kind}(")
            if at > 0:
                break
        else:
            raise ValueError(f"not a condition: {line}")
        cid = line[:at]
        module, rest = cid.split(":", 1)
        name, k = rest.rsplit("#", 1)
        t, varmap, _ = read_term(line[at + 1 :], internal=True)
        head = t.args[0]
        pos = {v.name: i for i, v in enumerate(head.args)}
        pred = Sym(head.sym.name, head.sym.arity, module)
        q = prog.cache["qualifiers"][module]

        def lits(conj):
            res = []
            for g in conj_to_list(conj):
                key = g.sym.key
                sym = Sym(key[0], 1, BUILTIN) if key in (("int", 1), ("term", 1)) else q.pred(key, "condition")
                res.append(PropLit(sym, pos[g.args[0].name]))
            return tuple(res)

        if kind == "calls":
            disj = []
            stack = [t.args[1]]
            while stack:
                d = stack.pop()
                if isinstance(d, Struct) and d.sym == Sym(";", 2):
                    stack.append(d.args[1])
                    stack.append(d.args[0])
                else:
                    disj.append(lits(d))
            out.append(AssertionCondition(cid, "calls", pred, tuple(disj), (), origin_id(pred, int(k))))
        else:
            out.append(AssertionCondition(cid, "success", pred, lits(t.args[1]), lits(t.args[2]), origin_id(pred, int(k))))
    return out
