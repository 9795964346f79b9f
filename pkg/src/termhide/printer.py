"""Pretty-printing of terms, clauses, assertions and modules.

Printed clauses use normalized variable names ``A1..An`` (first
occurrence order, per clause) and ``_`` for variables that occur once.
"""

from __future__ import annotations

from termhide.terms import USER, Struct, Var, deref

_INFIX = {"=", "<", ">", "=<", ">=", "=:=", "=\\="}


class VarNamer:
    """Assigns ``_A``, ``_B``, ... (or a custom scheme) to variables."""

    def __init__(self, names: dict | None = None, fmt=None, singletons=frozenset()):
        self.names = dict(names or {})
        self.fmt = fmt or _alpha
        self.singletons = singletons

    def __call__(self, v: Var) -> str:
        if v in self.singletons:
            return "_"
        n = self.names.get(v)
        if n is None:
            n = self.names[v] = self.fmt(len(self.names))
        return n


def _alpha(i: int) -> str:
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = chr(65 + r) + s
    return "_" + s


def _atom_text(name: str) -> str:
    if name in ("[]",) or name[:1].islower():
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_term(t, qualify: bool = False, namer=None, s: dict | None = None) -> str:
    """Render a term.  With ``qualify`` non-user functors are prefixed
    by their module (``bt:empty``)."""
    namer = namer or VarNamer()
    out: list[str] = []
    _fmt(t, qualify, namer, s or {}, out)
    return "".join(out)


def _fmt(t, qualify, namer, s, out):
    t = deref(t, s)
    c = t.__class__
    if c is Var:
        out.append(namer(t))
        return
    if c is int:
        out.append(str(t))
        return
    sym = t.sym
    if sym.name == "[|]" and sym.arity == 2 and sym.module == USER:
        out.append("[")
        _fmt(t.args[0], qualify, namer, s, out)
        tail = deref(t.args[1], s)
        while tail.__class__ is Struct and tail.sym == sym:
            out.append(",")
            _fmt(tail.args[0], qualify, namer, s, out)
            tail = deref(tail.args[1], s)
        if not (tail.__class__ is Struct and tail.sym.name == "[]" and tail.sym.arity == 0):
            out.append("|")
            _fmt(tail, qualify, namer, s, out)
        out.append("]")
        return
    if sym.name in _INFIX and sym.arity == 2:
        _fmt(t.args[0], qualify, namer, s, out)
        out.append(f" {sym.name} ")
        _fmt(t.args[1], qualify, namer, s, out)
        return
    if qualify and sym.module != USER and not sym.module.startswith("$"):
        out.append(sym.module + ":")
    out.append(_atom_text(sym.name))
    if t.args:
        out.append("(")
        for i, a in enumerate(t.args):
            if i:
                out.append(",")
            _fmt(a, qualify, namer, s, out)
        out.append(")")


def format_answer(answer: dict, qualify: bool = False) -> str:
    """``X = t1, Y = t2`` with shared variable names across bindings."""
    if not answer:
        return "true"
    namer = VarNamer()
    return ", ".join(f"{n} = {format_term(t, qualify, namer)}" for n, t in answer.items())


# ---------------------------------------------------------------------------
# clause-level printing


def _count_vars(terms, counts: dict):
    stack = list(terms)
    while stack:
        t = stack.pop()
        if t.__class__ is Var:
            counts[t] = counts.get(t, 0) + 1
        elif t.__class__ is Struct and not t.ground:
            stack.extend(t.args)


def clause_namer(terms, singletons: bool = True) -> VarNamer:
    counts: dict = {}
    _count_vars(terms, counts)
    single = frozenset(v for v, k in counts.items() if k == 1) if singletons else frozenset()
    return VarNamer(fmt=lambda i: f"A{i + 1}", singletons=single)


def format_goal(g, qualify: bool = False, namer=None) -> str:
    """A goal: the predicate name is never qualified, its arguments are
    printed like terms."""
    if g.__class__ is Struct and g.args and not (g.sym.name in _INFIX and g.sym.arity == 2):
        namer = namer or VarNamer()
        return _atom_text(g.sym.name) + "(" + ",".join(format_term(a, qualify, namer) for a in g.args) + ")"
    if g.__class__ is Struct and not g.args:
        return _atom_text(g.sym.name)
    return format_term(g, qualify, namer)


def format_clause(head, body=(), qualify: bool = False) -> str:
    namer = clause_namer((head, *body))
    h = format_goal(head, qualify, namer)
    if not body:
        return h + "."
    return h + " :- " + ", ".join(format_goal(g, qualify, namer) for g in body) + "."


def _lits(conj, head_args, namer) -> str:
    if not conj:
        return "true"
    return ", ".join(f"{lit.prop.name}({format_term(head_args[lit.arg], namer=namer)})" for lit in conj)


def format_assertion(a, head_args) -> str:
    namer = VarNamer(fmt=lambda i: f"A{i + 1}")
    head = format_term(Struct(a.pred, tuple(head_args)), namer=namer)
    return f":- pred {head} : {_lits(a.pre, head_args, namer)} => {_lits(a.post, head_args, namer)}."


def _head_vars(arity: int):
    return [Var(i) for i in range(arity)]


def format_condition(c) -> str:
    args = _head_vars(c.pred.arity)
    namer = VarNamer(fmt=lambda i: f"A{i + 1}")
    head = format_term(Struct(c.pred, tuple(args)), namer=namer)

    def conj(lits):
        return "(" + (",".join(f"{l.prop.name}({format_term(args[l.arg], namer=namer)})" for l in lits) or "true") + ")"

    if c.kind == "calls":
        pre = ";".join(conj(d) for d in c.pre) if c.pre else "(fail)"
        if len(c.pre) > 1:
            pre = "(" + pre + ")"
        return f"{c.id}.calls({head},{pre})"
    return f"{c.id}.success({head},{conj(c.pre)},{conj(c.post)})"


def format_conditions(prog, module: str) -> str:
    lines = []
    for sym in sorted(prog.conditions, key=lambda s: (s.name, s.arity)):
        if sym.module != module:
            continue
        lines.extend(format_condition(c) for c in prog.conditions[sym])
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# module-level printing


def format_module(prog, module: str) -> str:
    """Print a (flattened) module back in source syntax: header, hides,
    regtypes sorted by name, then predicates sorted by name with their
    assertions before their clauses."""
    info = prog.modules[module]
    src = info.source
    lines = []
    exports = ",".join(f"{n}/{a}" for n, a in src.exports)
    lines.append(f":- module({module}, [{exports}]).")
    for m, keys in src.imports.items():
        lines.append(f":- use_module({m}, [{','.join(f'{n}/{a}' for n, a in keys)}]).")
    for n, a in sorted(src.hidden):
        lines.append(f":- hide({n}/{a}).")
    mine = [s for s in prog.preds if s.module == module]
    regs = sorted((s for s in mine if prog.preds[s].is_regtype), key=lambda s: (s.name, s.arity))
    others = sorted((s for s in mine if not prog.preds[s].is_regtype), key=lambda s: (s.name, s.arity))
    for sym in regs:
        lines.append(f":- regtype {sym.name}/{sym.arity}.")
        lines.extend(_clause_lines(prog.preds[sym]))
    for sym in others:
        for a in prog.assertions.get(sym, []):
            lines.append(format_assertion(a, _head_vars(sym.arity)))
        lines.extend(_clause_lines(prog.preds[sym]))
    return "\n".join(lines) + "\n"


def _clause_lines(pred):
    return [format_clause(c.head, c.body) for c in pred.clauses]
