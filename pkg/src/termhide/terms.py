"""Herbrand terms, module-qualified symbols, and syntactic unification.

Integers are plain Python ``int`` values.  Variables are :class:`Var`
objects carrying a derivation-scoped integer id; compound terms and atoms
are :class:`Struct` values whose functor is a :class:`Symbol`.

A substitution is a plain ``dict`` mapping ``Var`` to term.  Bindings made
by :func:`unify` are recorded on an optional trail so that a caller can
undo them with :func:`undo`.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple, Union

USER = "user"


class Symbol(NamedTuple):
    """A functor or predicate symbol: name, arity and owning module."""

    name: str
    arity: int
    module: str = USER

    def __str__(self) -> str:
        return f"{self.module}:{self.name}/{self.arity}"

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)


class Var:
    __slots__ = ("id", "name")

    def __init__(self, id: int, name: str | None = None):
        self.id = id
        self.name = name

    def __repr__(self) -> str:
        return self.name or f"_G{self.id}"


class Struct:
    """Compound term (or atom when ``args`` is empty).

    ``ground`` is computed once at construction so that resolving and
    occurs-checking can skip ground subterms in O(1).
    """

    __slots__ = ("sym", "args", "ground")

    def __init__(self, sym: Symbol, args: tuple = ()):
        if len(args) != sym.arity:
            raise ValueError(f"{sym} applied to {len(args)} arguments")
        self.sym = sym
        self.args = args
        g = True
        for a in args:
            c = a.__class__
            if c is Var or (c is Struct and not a.ground):
                g = False
                break
        self.ground = g

    def __eq__(self, other):
        # Structural equality; variables compare by identity.
        if other.__class__ is not Struct:
            return False
        return self.sym == other.sym and self.args == other.args

    def __hash__(self):
        return hash((self.sym, self.args))

    def __repr__(self) -> str:
        from termhide.printer import format_term

        return format_term(self, qualify=True)


Term = Union[Var, Struct, int]


def atom(name: str, module: str = USER) -> Struct:
    return Struct(Symbol(name, 0, module))


def struct(name: str, *args: Term, module: str = USER) -> Struct:
    return Struct(Symbol(name, len(args), module), tuple(args))


def is_int(t) -> bool:
    return t.__class__ is int


class VarFactory:
    """Issues fresh variables with strictly increasing ids."""

    __slots__ = ("next_id",)

    def __init__(self, start: int = 0):
        self.next_id = start

    def __call__(self, name: str | None = None) -> Var:
        v = Var(self.next_id, name)
        self.next_id += 1
        return v


def deref(t: Term, s: dict) -> Term:
    while t.__class__ is Var:
        b = s.get(t)
        if b is None:
            return t
        t = b
    return t


def occurs(v: Var, t: Term, s: dict) -> bool:
    stack = [t]
    while stack:
        t = deref(stack.pop(), s)
        c = t.__class__
        if c is Var:
            if t is v:
                return True
        elif c is Struct and not t.ground:
            stack.extend(t.args)
    return False


def _bind(v: Var, t: Term, s: dict, trail: list | None) -> bool:
    if t.__class__ is not int and occurs(v, t, s):
        return False
    s[v] = t
    if trail is not None:
        trail.append(v)
    return True


def unify(t1: Term, t2: Term, s: dict, trail: list | None = None) -> bool:
    """Destructively extend ``s`` with an mgu of ``t1`` and ``t2``.

    Returns False on failure; bindings made before the failure stay in
    ``s`` and are listed on ``trail`` (when given) for the caller to undo.
    When two unbound variables meet, the younger one (higher id) is bound
    so that older variables are only bound by genuine constraints.
    """
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a = deref(a, s)
        b = deref(b, s)
        if a is b:
            continue
        ca = a.__class__
        cb = b.__class__
        if ca is Var:
            if cb is Var:
                if a.id < b.id:
                    a, b = b, a
                s[a] = b
                if trail is not None:
                    trail.append(a)
                continue
            if not _bind(a, b, s, trail):
                return False
            continue
        if cb is Var:
            if not _bind(b, a, s, trail):
                return False
            continue
        if ca is int or cb is int:
            if ca is not cb or a != b:
                return False
            continue
        if a.sym != b.sym:
            return False
        if a.ground and b.ground:
            if a != b:
                return False
            continue
        stack.extend(zip(a.args, b.args))
    return True


def undo(s: dict, trail: list, mark: int) -> None:
    while len(trail) > mark:
        del s[trail.pop()]


def mgu(t1: Term, t2: Term, s: dict | None = None) -> dict | None:
    """Functional wrapper around :func:`unify`: returns a new substitution
    or None, leaving ``s`` untouched."""
    out = dict(s or {})
    return out if unify(t1, t2, out) else None


def resolve(t: Term, s: dict) -> Term:
    """Apply ``s`` to ``t`` transitively; the result holds only unbound
    variables."""
    t = deref(t, s)
    if t.__class__ is not Struct or t.ground:
        return t
    return Struct(t.sym, tuple([resolve(a, s) for a in t.args]))


apply = resolve


def term_vars(t: Term, s: dict | None = None) -> list[Var]:
    """Unbound variables of ``t`` in first-occurrence (left-to-right) order."""
    s = s or {}
    seen: dict[Var, None] = {}
    stack = [t]
    while stack:
        t = deref(stack.pop(), s)
        c = t.__class__
        if c is Var:
            seen.setdefault(t)
        elif c is Struct and not t.ground:
            stack.extend(reversed(t.args))
    return list(seen)


def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        t = stack.pop()
        yield t
        if t.__class__ is Struct:
            stack.extend(reversed(t.args))


def instantiate(t: Term, frame: list, new_var) -> Term:
    """Copy a clause template whose variables are ``Var(i)`` with ``i`` an
    index into ``frame``; unset slots receive fresh variables."""
    c = t.__class__
    if c is Var:
        v = frame[t.id]
        if v is None:
            v = frame[t.id] = new_var()
        return v
    if c is int or t.ground:
        return t
    return Struct(t.sym, tuple([instantiate(a, frame, new_var) for a in t.args]))


def variant_key(t: Term, s: dict | None = None):
    """A hashable key equal for alpha-equivalent (variant) terms."""
    s = s or {}
    names: dict[Var, int] = {}

    def walk(t):
        t = deref(t, s)
        c = t.__class__
        if c is Var:
            return ("$v", names.setdefault(t, len(names)))
        if c is int:
            return t
        if t.ground:
            return t
        return (t.sym, tuple(walk(a) for a in t.args))

    return walk(t)
