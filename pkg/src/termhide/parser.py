"""Reader for the module source language (`.mpl` files).

The syntax is a small Prolog subset: facts and rules with ``,``
conjunction, integers, lists, the comparison builtins, and the
declarations ``module/2``, ``use_module/2``, ``hide``, ``regtype`` and
``pred``.  Terms are returned *unqualified*: every functor carries the
``user`` module and variables are named; :mod:`termhide.modules` does the
qualification when it flattens a set of modules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from termhide.errors import LoadError
from termhide.terms import Struct, Symbol, Var, atom, struct

SYMBOL_CHARS = "+-*/\\^<>=~:.?@&"

INFIX = {
    ":-": (1200, "xfx"),
    "=>": (1050, "xfx"),
    ":": (1040, "xfx"),
    ";": (1100, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "/": (400, "yfx"),
}
PREFIX = {":-": 1200, "pred": 1150, "hide": 1150, "regtype": 1150}


@dataclass
class Token:
    kind: str  # atom, var, int, punct, end, qatom
    text: str
    line: int
    col: int
    spaced: bool  # preceded by layout


_NAME = re.compile(r"[a-z][A-Za-z0-9_]*")
_INTERNAL_NAME = re.compile(r"[a-z][A-Za-z0-9_$]*#?")
_VAR = re.compile(r"[A-Z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


def tokenize(text: str, internal: bool = False) -> list[Token]:
    name_re = _INTERNAL_NAME if internal else _NAME
    toks: list[Token] = []
    i, line, col0 = 0, 1, 0
    n = len(text)
    spaced = True
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col0 = i + 1
            i += 1
            spaced = True
            continue
        if ch.isspace():
            i += 1
            spaced = True
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            spaced = True
            continue
        col = i - col0 + 1
        if ch.isdigit():
            m = _INT.match(text, i)
            toks.append(Token("int", m.group(), line, col, spaced))
            i = m.end()
        elif ch.islower():
            m = name_re.match(text, i)
            toks.append(Token("atom", m.group(), line, col, spaced))
            i = m.end()
        elif ch.isupper() or ch == "_":
            m = _VAR.match(text, i)
            toks.append(Token("var", m.group(), line, col, spaced))
            i = m.end()
        elif ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise LoadError("parse-error", "", f"{line}:{col}", "unterminated quoted atom")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            toks.append(Token("qatom", "".join(buf), line, col, spaced))
            i = j + 1
        elif ch in "()[],|":
            toks.append(Token("punct", ch, line, col, spaced))
            i += 1
        elif ch == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
            toks.append(Token("end", ".", line, col, spaced))
            i += 1
        elif ch == "-" and i + 1 < n and text[i + 1].isdigit() and _negative_ok(toks):
            m = _INT.match(text, i + 1)
            toks.append(Token("int", "-" + m.group(), line, col, spaced))
            i = m.end()
        elif ch in SYMBOL_CHARS:
            j = i
            while j < n and text[j] in SYMBOL_CHARS:
                if text[j] == "." and (j + 1 >= n or text[j + 1].isspace() or text[j + 1] == "%"):
                    break
                j += 1
            toks.append(Token("atom", text[i:j], line, col, spaced))
            i = j
        elif ch == ";":
            toks.append(Token("atom", ";", line, col, spaced))
            i += 1
        else:
            raise LoadError("parse-error", "", f"{line}:{col}", f"unexpected character {ch!r}")
        spaced = False
    return toks


def _negative_ok(toks: list[Token]) -> bool:
    if not toks:
        return True
    t = toks[-1]
    if t.kind in ("int", "var", "qatom"):
        return False
    if t.kind == "punct" and t.text in ")]":
        return False
    if t.kind == "atom" and t.text not in INFIX and t.text not in PREFIX:
        return False
    return True


class _Parser:
    def __init__(self, toks: list[Token], module: str = ""):
        self.toks = toks
        self.pos = 0
        self.module = module
        self.varmap: dict[str, Var] = {}
        self.nvars = 0

    def error(self, msg: str, tok: Token | None = None) -> LoadError:
        tok = tok or self.peek()
        where = f"{tok.line}:{tok.col}" if tok else "eof"
        return LoadError("parse-error", self.module, where, msg)

    def peek(self, k: int = 0) -> Token | None:
        j = self.pos + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self.error(f"expected {text or kind}, found {tok.text!r}", tok)
        return tok

    def fresh_var(self, name: str) -> Var:
        if name == "_":
            v = Var(self.nvars, "_")
            self.nvars += 1
            return v
        v = self.varmap.get(name)
        if v is None:
            v = self.varmap[name] = Var(self.nvars, name)
            self.nvars += 1
        return v

    def clause(self):
        self.varmap = {}
        self.nvars = 0
        first = self.peek()
        t = self.parse(1200)
        self.expect("end")
        return t, first.line

    def _infix_op(self, tok: Token | None):
        if tok is None:
            return None
        if tok.kind == "atom" and tok.text in INFIX:
            return INFIX[tok.text]
        if tok.kind == "punct" and tok.text == ",":
            return INFIX[","]
        return None

    def parse(self, maxprec: int):
        left, lprec = self.primary(maxprec)
        while True:
            tok = self.peek()
            op = self._infix_op(tok)
            if op is None:
                return left
            prec, typ = op
            if prec > maxprec:
                return left
            lmax = prec if typ == "yfx" else prec - 1
            if lprec > lmax:
                return left
            self.next()
            rmax = prec if typ == "xfy" else prec - 1
            right = self.parse(rmax)
            left = struct(tok.text, left, right)
            lprec = prec

    def _starts_term(self, tok: Token | None) -> bool:
        if tok is None or tok.kind == "end":
            return False
        if tok.kind == "punct":
            return tok.text in "(["
        if tok.kind == "atom" and tok.text in INFIX:
            return False
        return True

    def primary(self, maxprec: int):
        tok = self.next()
        if tok.kind == "int":
            return int(tok.text), 0
        if tok.kind == "var":
            return self.fresh_var(tok.text), 0
        if tok.kind == "punct":
            if tok.text == "(":
                t = self.parse(1200)
                self.expect("punct", ")")
                return t, 0
            if tok.text == "[":
                return self.list_tail(), 0
            raise self.error(f"unexpected {tok.text!r}", tok)
        if tok.kind in ("atom", "qatom"):
            name = tok.text
            nxt = self.peek()
            if nxt is not None and nxt.kind == "punct" and nxt.text == "(" and not nxt.spaced:
                self.next()
                args = [self.parse(999)]
                while self.peek() is not None and self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    args.append(self.parse(999))
                self.expect("punct", ")")
                return struct(name, *args), 0
            if tok.kind == "atom" and name in PREFIX and self._starts_term(nxt):
                prec = PREFIX[name]
                if prec > maxprec:
                    prec = 999
                arg = self.parse(prec - 1)
                return struct(name, arg), prec
            if tok.kind == "atom" and name in INFIX:
                prec = INFIX[name][0]
                return atom(name), (prec if prec <= maxprec else 0)
            return atom(name), 0
        raise self.error(f"unexpected {tok.text!r}", tok)

    def list_tail(self):
        tok = self.peek()
        if tok is not None and tok.kind == "punct" and tok.text == "]":
            self.next()
            return atom("[]")
        items = [self.parse(999)]
        tail = atom("[]")
        while True:
            tok = self.next()
            if tok.kind == "punct" and tok.text == ",":
                items.append(self.parse(999))
                continue
            if tok.kind == "punct" and tok.text == "|":
                tail = self.parse(999)
                self.expect("punct", "]")
                break
            if tok.kind == "punct" and tok.text == "]":
                break
            raise self.error(f"expected , | or ] in list, found {tok.text!r}", tok)
        for it in reversed(items):
            tail = struct("[|]", it, tail)
        return tail


def read_terms(text: str, internal: bool = False, module: str = ""):
    """Yield ``(term, line, nvars)`` for every clause in ``text``."""
    p = _Parser(tokenize(text, internal), module)
    while p.peek() is not None:
        t, line = p.clause()
        yield t, line, p.nvars


def read_term(text: str, internal: bool = False):
    """Parse a single term (a trailing ``.`` is optional).

    Returns the term and a name->variable map in first-occurrence order.
    """
    text = text.strip()
    if not text.endswith("."):
        text += " ."
    p = _Parser(tokenize(text, internal))
    t, _ = p.clause()
    if p.peek() is not None:
        raise p.error("trailing input after term")
    return t, dict(p.varmap), p.nvars


# ---------------------------------------------------------------------------
# Module sources


@dataclass
class RawClause:
    head: Struct
    body: list
    line: int
    nvars: int


@dataclass
class RawAssertion:
    head: Struct
    pre: list
    post: list
    line: int


@dataclass
class ModuleSource:
    """A parsed (unflattened) module."""

    name: str
    exports: list = field(default_factory=list)  # [(name, arity)]
    imports: dict = field(default_factory=dict)  # module -> [(name, arity)]
    hidden: list = field(default_factory=list)  # [(name, arity)]
    regtypes: list = field(default_factory=list)  # [(name, arity)]
    clauses: list = field(default_factory=list)  # [RawClause]
    assertions: list = field(default_factory=list)  # [RawAssertion]
    internal: bool = False

    def predicates(self) -> list[tuple[str, int]]:
        seen: dict = {}
        for c in self.clauses:
            seen.setdefault((c.head.sym.name, c.head.sym.arity))
        return list(seen)


def conj_to_list(t) -> list:
    """Flatten a ``,``-conjunction; ``true`` is the empty conjunction."""
    out = []
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Struct) and t.sym == Symbol(",", 2):
            stack.append(t.args[1])
            stack.append(t.args[0])
        elif isinstance(t, Struct) and t.sym == Symbol("true", 0):
            continue
        else:
            out.append(t)
    return out


def _pred_spec(t, mod: str, line: int) -> tuple[str, int]:
    if (
        isinstance(t, Struct)
        and t.sym == Symbol("/", 2)
        and isinstance(t.args[0], Struct)
        and t.args[0].sym.arity == 0
        and isinstance(t.args[1], int)
        and t.args[1] >= 0
    ):
        return (t.args[0].sym.name, t.args[1])
    raise LoadError("parse-error", mod, str(line), f"bad predicate indicator {t!r}")


def _spec_list(t, mod: str, line: int) -> list[tuple[str, int]]:
    out = []
    while isinstance(t, Struct) and t.sym == Symbol("[|]", 2):
        out.append(_pred_spec(t.args[0], mod, line))
        t = t.args[1]
    if not (isinstance(t, Struct) and t.sym == Symbol("[]", 0)):
        raise LoadError("parse-error", mod, str(line), "expected a list of predicate indicators")
    return out


def _specs(t, mod, line):
    if isinstance(t, Struct) and t.sym.name in ("[|]", "[]"):
        return _spec_list(t, mod, line)
    return [_pred_spec(t, mod, line)]


def parse_module(text: str, internal: bool = False) -> ModuleSource:
    """Parse one module's source text.

    ``internal=True`` admits ``$`` and a trailing ``#`` in names, which
    only generated code (wrappers, shallow properties) uses.
    """
    src: ModuleSource | None = None
    for t, line, nvars in read_terms(text, internal):
        mod = src.name if src else ""
        if isinstance(t, Struct) and t.sym == Symbol(":-", 1):
            d = t.args[0]
            if not isinstance(d, Struct):
                raise LoadError("parse-error", mod, str(line), "malformed directive")
            key = (d.sym.name, d.sym.arity)
            if key == ("module", 2):
                if src is not None:
                    raise LoadError("parse-error", mod, str(line), "duplicate module declaration")
                name = d.args[0]
                if not (isinstance(name, Struct) and name.sym.arity == 0):
                    raise LoadError("parse-error", mod, str(line), "module name must be an atom")
                if name.sym.name == "user":
                    raise LoadError("parse-error", "user", str(line), "module name 'user' is reserved")
                src = ModuleSource(name.sym.name, internal=internal)
                src.exports = _spec_list(d.args[1], src.name, line)
                continue
            if src is None:
                raise LoadError("parse-error", "", str(line), "file must start with :- module(Name, Exports).")
            if key == ("use_module", 2):
                m = d.args[0]
                if not (isinstance(m, Struct) and m.sym.arity == 0):
                    raise LoadError("parse-error", mod, str(line), "use_module needs a module name")
                src.imports.setdefault(m.sym.name, []).extend(_spec_list(d.args[1], mod, line))
            elif key == ("hide", 1):
                src.hidden.extend(_specs(d.args[0], mod, line))
            elif key == ("regtype", 1):
                src.regtypes.extend(_specs(d.args[0], mod, line))
            elif key == ("pred", 1):
                src.assertions.append(_parse_pred(d.args[0], mod, line))
            else:
                raise LoadError("parse-error", mod, str(line), f"unknown declaration {d.sym.name}/{d.sym.arity}")
            continue
        if src is None:
            raise LoadError("parse-error", "", str(line), "file must start with :- module(Name, Exports).")
        if isinstance(t, Struct) and t.sym == Symbol(":-", 2):
            head, body = t.args[0], conj_to_list(t.args[1])
        else:
            head, body = t, []
        if not isinstance(head, Struct):
            raise LoadError("parse-error", mod, str(line), "clause head must be an atom or compound")
        if head.sym.name in (",", ":-", "=>"):
            raise LoadError("parse-error", mod, str(line), "malformed clause")
        src.clauses.append(RawClause(head, body, line, nvars))
    if src is None:
        raise LoadError("parse-error", "", "1", "empty module text")
    return src


def _parse_pred(t, mod: str, line: int) -> RawAssertion:
    post = []
    if isinstance(t, Struct) and t.sym == Symbol("=>", 2):
        t, post_t = t.args
        post = conj_to_list(post_t)
    pre = []
    if isinstance(t, Struct) and t.sym == Symbol(":", 2):
        t, pre_t = t.args
        pre = conj_to_list(pre_t)
    if not isinstance(t, Struct):
        raise LoadError("parse-error", mod, str(line), "pred assertion needs a head")
    return RawAssertion(t, pre, post, line)
