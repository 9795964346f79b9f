"""Flattening of multi-module programs.

Every functor occurrence is qualified at load time: a functor declared
hidden in the enclosing module gets that module as qualifier, all others
get ``user``.  Predicate symbols are qualified by their defining module,
so two modules may define the same name/arity without clashing.

The result is a :class:`FlatProgram` with explicit ``defs``/``exps``/
``imps`` sets per module and compiled clauses ready for the interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from termhide.errors import LoadError
from termhide.parser import ModuleSource, parse_module, read_term
from termhide.terms import USER, Struct, Symbol, Var

BUILTIN = "$builtin"

# name/arity -> kind; comparisons are tests over ground integers
BUILTINS = {
    ("=", 2): "unify",
    ("<", 2): "cmp",
    (">", 2): "cmp",
    ("=<", 2): "cmp",
    (">=", 2): "cmp",
    ("=:=", 2): "cmp",
    ("=\\=", 2): "cmp",
    ("int", 1): "type",
    ("term", 1): "type",
    ("usr", 1): "type",
    ("true", 0): "true",
}


def builtin_symbol(name: str, arity: int) -> Symbol:
    return Symbol(name, arity, BUILTIN)


@dataclass(eq=False)
class Clause:
    """A compiled clause.  Variables are ``Var(i)`` with ``i`` indexing a
    per-activation frame of ``nvars`` slots."""

    head: Struct
    body: tuple
    nvars: int
    module: str
    index: int
    line: int = 0
    key: object = None  # principal functor of the first argument, or None

    def __post_init__(self):
        if self.head.args:
            a = self.head.args[0]
            if a.__class__ is Struct:
                self.key = a.sym
            elif a.__class__ is int:
                self.key = a


@dataclass
class Predicate:
    sym: Symbol
    clauses: list = field(default_factory=list)
    is_regtype: bool = False
    # first-argument index: key -> clauses; var-headed clauses appear under
    # every key and in ``unindexed``
    _index: dict | None = None
    _var_clauses: list | None = None

    def candidates(self, first):
        """Clauses whose first head argument can match ``first`` (already
        dereferenced), in textual order."""
        if self._index is None:
            self._build_index()
        c = first.__class__
        if c is Var or not self.sym.arity:
            return self.clauses
        key = first.sym if c is Struct else first
        hit = self._index.get(key)
        return self._var_clauses if hit is None else hit

    def _build_index(self):
        idx: dict = {}
        var_clauses = [c for c in self.clauses if c.key is None]
        for c in self.clauses:
            if c.key is not None and c.key not in idx:
                idx[c.key] = [d for d in self.clauses if d.key is None or d.key == c.key]
        self._index = idx
        self._var_clauses = var_clauses


@dataclass
class ModuleInfo:
    name: str
    source: ModuleSource | None
    defs: set = field(default_factory=set)
    exps: set = field(default_factory=set)
    imps: set = field(default_factory=set)
    hidden: set = field(default_factory=set)  # hidden functor symbols
    regtypes: set = field(default_factory=set)


@dataclass
class FlatProgram:
    modules: dict  # name -> ModuleInfo (includes the 'user' pseudo-module)
    preds: dict  # Symbol -> Predicate
    conditions: dict  # pred Symbol -> list[AssertionCondition]
    assertions: dict  # pred Symbol -> list[PredAssertion]
    sources: list  # ModuleSource, in load order
    cache: dict = field(default_factory=dict, repr=False)

    def mods(self, sym: Symbol) -> str:
        return sym.module

    def defs(self, m: str) -> set:
        return self.modules[m].defs

    def exps(self, m: str) -> set:
        return self.modules[m].exps

    def imps(self, m: str) -> set:
        return self.modules[m].imps

    def hidden(self, m: str) -> set:
        return self.modules[m].hidden

    def library_modules(self) -> list[str]:
        return [s.name for s in self.sources]

    def source(self, m: str) -> ModuleSource:
        for s in self.sources:
            if s.name == m:
                return s
        raise KeyError(m)

    def condition(self, cid: str):
        for conds in self.conditions.values():
            for c in conds:
                if c.id == cid:
                    return c
        raise KeyError(cid)

    def all_conditions(self) -> list:
        return [c for sym in sorted(self.conditions) for c in self.conditions[sym]]

    def lookup(self, name: str, arity: int, module: str | None = None) -> Symbol:
        """Find a predicate symbol by name/arity (optionally within a module)."""
        hits = [s for s in self.preds if s.name == name and s.arity == arity and (module is None or s.module == module)]
        if len(hits) != 1:
            raise KeyError(f"{name}/{arity}")
        return hits[0]

    def query(self, text: str, module: str = USER):
        """Parse a query goal in the context of ``module``."""
        from termhide.engine import Query

        return Query.parse(text, self, module)

    def replace(self, sources: Iterable[ModuleSource]) -> "FlatProgram":
        """A new program with the given sources substituted by name."""
        repl = {s.name: s for s in sources}
        return flatten([repl.get(s.name, s) for s in self.sources])


# ---------------------------------------------------------------------------


class _Qualifier:
    """Resolves names in the context of one module."""

    def __init__(self, name, hidden_keys, local_preds, imports, exporters, definers):
        self.name = name
        self.hidden_keys = hidden_keys
        self.local_preds = local_preds
        self.imports = imports  # key -> module
        self.exporters = exporters  # key -> [modules]
        self.definers = definers  # key -> [modules]

    def data(self, t):
        if t.__class__ is Struct:
            mod = self.name if t.sym.key in self.hidden_keys else USER
            return Struct(Symbol(t.sym.name, t.sym.arity, mod), tuple(self.data(a) for a in t.args))
        return t

    def pred(self, key, where: str) -> Symbol:
        if key in BUILTINS:
            return builtin_symbol(*key)
        if key in self.local_preds:
            return Symbol(key[0], key[1], self.name)
        if key in self.imports:
            return Symbol(key[0], key[1], self.imports[key])
        exp = self.exporters.get(key, [])
        if self.name == USER and len(exp) == 1:
            return Symbol(key[0], key[1], exp[0])
        if self.name == USER and len(exp) > 1:
            raise LoadError("visibility-violation", self.name, where, f"{key[0]}/{key[1]} is exported by several modules: {sorted(exp)}")
        defs = self.definers.get(key, [])
        if len(defs) == 1:
            # not imported: resolves, but the interpreter will refuse the call
            return Symbol(key[0], key[1], defs[0])
        raise LoadError("visibility-violation", self.name, where, f"undefined predicate {key[0]}/{key[1]}")

    def goal(self, g, where: str):
        if g.__class__ is Var:
            raise LoadError("parse-error", self.name, where, "variable goals are not supported")
        if g.__class__ is not Struct:
            raise LoadError("parse-error", self.name, where, f"goal {g!r} is not callable")
        sym = self.pred(g.sym.key, where)
        return Struct(sym, tuple(self.data(a) for a in g.args))


def _index_vars(t, mapping: dict):
    """Renumber variables densely for compiled clause templates."""
    c = t.__class__
    if c is Var:
        v = mapping.get(t)
        if v is None:
            v = mapping[t] = Var(len(mapping), t.name)
        return v
    if c is Struct and not t.ground:
        return Struct(t.sym, tuple(_index_vars(a, mapping) for a in t.args))
    return t


def flatten(sources: Iterable[ModuleSource]) -> FlatProgram:
    from termhide.assertions import check_regtype_determinism, normalize_module

    sources = list(sources)
    names = [s.name for s in sources]
    seen: set = set()
    for s in sources:
        if s.name in seen:
            raise LoadError("duplicate-definition", s.name, "module", f"module {s.name} loaded twice")
        seen.add(s.name)

    local_preds = {s.name: set(s.predicates()) | set(s.regtypes) for s in sources}
    exporters: dict = {}
    definers: dict = {}
    for s in sources:
        for key in s.exports:
            exporters.setdefault(key, []).append(s.name)
        for key in local_preds[s.name]:
            definers.setdefault(key, []).append(s.name)

    modules: dict[str, ModuleInfo] = {}
    preds: dict[Symbol, Predicate] = {}
    quals: dict[str, _Qualifier] = {}

    for s in sources:
        _validate_source(s, local_preds, {x.name: x for x in sources})
        imports = {key: m for m, keys in s.imports.items() for key in keys}
        q = _Qualifier(s.name, set(s.hidden), local_preds[s.name], imports, exporters, definers)
        quals[s.name] = q
        info = ModuleInfo(s.name, s)
        info.hidden = {Symbol(n, a, s.name) for n, a in s.hidden}
        info.regtypes = {Symbol(n, a, s.name) for n, a in s.regtypes}
        info.defs = {Symbol(n, a, s.name) for n, a in local_preds[s.name]} | info.hidden
        info.exps = {Symbol(n, a, s.name) for n, a in s.exports}
        info.imps = {Symbol(n, a, m) for m, keys in s.imports.items() for n, a in keys}
        modules[s.name] = info
        for key in local_preds[s.name]:
            sym = Symbol(key[0], key[1], s.name)
            preds[sym] = Predicate(sym, is_regtype=key in s.regtypes)

    for s in sources:
        q = quals[s.name]
        info = modules[s.name]
        for i, rc in enumerate(s.clauses):
            where = f"clause {i + 1} (line {rc.line})"
            hsym = Symbol(rc.head.sym.name, rc.head.sym.arity, s.name)
            head = Struct(hsym, tuple(q.data(a) for a in rc.head.args))
            body = tuple(q.goal(g, where) for g in rc.body)
            mapping: dict = {}
            head = _index_vars(head, mapping)
            body = tuple(_index_vars(g, mapping) for g in body)
            pred = preds[hsym]
            pred.clauses.append(Clause(head, body, len(mapping), s.name, len(pred.clauses), rc.line))
            # every symbol used here but defined elsewhere counts as imported
            for t in (head,) + body:
                for sym in _symbols(t):
                    if sym.module != BUILTIN and sym not in info.defs:
                        info.imps.add(sym)

    for s in sources:
        for key in s.regtypes:
            sym = Symbol(key[0], key[1], s.name)
            if not preds[sym].clauses:
                raise LoadError("parse-error", s.name, "regtype", f"regtype {key[0]}/{key[1]} has no clauses")
            if key[1] != 1:
                raise LoadError("parse-error", s.name, "regtype", f"regtype {key[0]}/{key[1]} must be unary")
            check_regtype_determinism(preds[sym])

    user = ModuleInfo(USER, None)
    for s in sources:
        user.imps |= modules[s.name].exps
    modules[USER] = user
    quals[USER] = _Qualifier(USER, set(), set(), {}, exporters, definers)

    prog = FlatProgram(modules, preds, {}, {}, sources)
    prog.cache["qualifiers"] = quals
    for s in sources:
        asserts, conds = normalize_module(s, quals[s.name], prog)
        prog.assertions.update(asserts)
        prog.conditions.update(conds)
    return prog


def _symbols(t):
    stack = [t]
    while stack:
        t = stack.pop()
        if t.__class__ is Struct:
            yield t.sym
            stack.extend(t.args)


def _validate_source(s: ModuleSource, local_preds: dict, by_name: dict):
    hidden = set(s.hidden)
    for key in s.exports:
        if key in hidden:
            raise LoadError("hidden-functor-leak", s.name, "module", f"hidden symbol {key[0]}/{key[1]} is exported")
        if key not in local_preds[s.name]:
            raise LoadError("parse-error", s.name, "module", f"exported {key[0]}/{key[1]} is not defined")
    for m, keys in s.imports.items():
        other = by_name.get(m)
        for key in keys:
            if other is None or key not in other.exports:
                raise LoadError("import-not-exported", s.name, f"use_module({m})", f"{key[0]}/{key[1]} is not exported by {m}")
            if key in local_preds[s.name]:
                raise LoadError("duplicate-definition", s.name, f"use_module({m})", f"{key[0]}/{key[1]} is both imported and defined")
            if key in hidden:
                # a hidden functor sharing name/arity with an imported predicate
                raise LoadError("duplicate-definition", s.name, f"use_module({m})", f"{key[0]}/{key[1]} is both hidden and imported")
    for key in local_preds[s.name]:
        if key in BUILTINS:
            raise LoadError("duplicate-definition", s.name, "clauses", f"cannot redefine builtin {key[0]}/{key[1]}")
    if len(set(s.regtypes)) != len(s.regtypes):
        raise LoadError("duplicate-definition", s.name, "regtype", "regtype declared twice")


def load_texts(texts: Iterable[str], internal: bool = False) -> FlatProgram:
    return flatten([parse_module(t, internal) for t in texts])


def load_files(paths: Iterable[str | Path], internal: bool = False) -> FlatProgram:
    return load_texts([Path(p).read_text(encoding="utf-8") for p in paths], internal)


def visible(g: Symbol, m: str, p: FlatProgram) -> bool:
    """May module ``m`` resolve a goal on predicate ``g``?"""
    if g.module == BUILTIN:
        return True
    n = g.module
    if n == m:
        return g in p.modules[m].defs
    return g in p.modules[n].exps and g in p.modules[m].imps


def qualify_term(text: str, p: FlatProgram, module: str = USER, internal: bool = False):
    """Parse a data term written in ``module``; returns (term, varmap)."""
    t, varmap, _ = read_term(text, internal)
    return p.cache["qualifiers"][module].data(t), varmap
