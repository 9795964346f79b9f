"""Query evaluation under the plain modular semantics and with run-time
assertion checking (RTC).

The machine is iterative: a goal sequence is a linked list of ``Call``
and ``Ret`` items, the store is a substitution dict with a trail, and
choicepoints remember the trail mark plus the remaining candidate clauses.
Search is depth-first, left-to-right, in textual clause order.

In RTC mode a call first evaluates the active *calls* condition (a
violation aborts the whole query), then the guards of the active *success*
conditions; the guards that hold travel on the ``Ret`` item and their
postconditions are checked when the call returns.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from termhide.errors import EvaluationError, VisibilityError
from termhide.modules import BUILTIN, FlatProgram, visible
from termhide.parser import conj_to_list, read_term
from termhide.regtypes import Grammar, usr_check
from termhide.terms import USER, Struct, Symbol, Var, VarFactory, deref, instantiate, occurs, resolve, undo, unify

MODES = ("unsafe", "client-safe", "safe-rt", "safe-ct-rt")

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


@dataclass(frozen=True)
class CheckConfig:
    mode: str = "safe-rt"
    shallow: bool = False
    discharge: frozenset = frozenset()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown checking mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "discharge", frozenset(self.discharge))
        if self.discharge and self.mode != "safe-ct-rt":
            raise ValueError("a discharge set is only meaningful in safe-ct-rt mode")


def parse_discharge(text: str) -> frozenset:
    """Condition ids proven statically, one per line; ``%`` starts a
    comment.  ``<id>@internal`` discharges the condition only for calls
    made from inside the defining module."""
    out = set()
    for line in text.splitlines():
        line = line.split("%", 1)[0].strip()
        if line:
            out.add(line)
    return frozenset(out)


@dataclass
class Stats:
    conditions: int = 0  # assertion conditions evaluated
    literals: int = 0  # property literals evaluated
    boundary_literals: int = 0  # ... for calls crossing a module boundary
    steps: int = 0  # reductions in the main derivation


@dataclass
class Violation:
    condition: str
    origin: str
    kind: str  # calls | success
    goal: str
    store: dict

    def __str__(self):
        return f"{self.condition} ({self.kind})"


@dataclass
class Verdict:
    answers: list = field(default_factory=list)  # [{name: term}]
    violation: Violation | None = None
    error: str | None = None
    stats: Stats = field(default_factory=Stats)
    trace: list | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None and self.error is None

    def signature(self) -> tuple:
        """Comparable summary: answers (in order), violated condition
        (mapped to its origin) and runtime error."""
        from termhide.printer import format_answer

        answers = tuple(format_answer(a, qualify=True) for a in self.answers)
        v = (self.violation.origin, self.violation.kind) if self.violation else None
        return (answers, v, self.error)


class TraceState(NamedTuple):
    rule: str  # init | constraint | resolve | redo | return | err
    kind: str  # call | ret | retchk | err | empty
    head: str
    module: str
    checks: tuple | None
    depth: int
    store: str

    def line(self) -> str:
        extra = f" {list(self.checks)}" if self.checks is not None else ""
        return f"{self.rule}\t{self.kind} {self.head}@{self.module}{extra}\t{self.depth}"


def erase_errors(trace: list) -> list:
    """Drop a terminal error state and turn every checked return marker
    into a plain return marker."""
    out = [s for s in trace if s.kind != "err"]
    return [s._replace(kind="ret", checks=None) if s.kind == "retchk" else s for s in out]


class Call:
    __slots__ = ("goal", "module")

    def __init__(self, goal, module):
        self.goal = goal
        self.module = module


class Ret:
    __slots__ = ("goal", "module", "caller", "checks")

    def __init__(self, goal, module, caller, checks):
        self.goal = goal
        self.module = module
        self.caller = caller
        self.checks = checks


class _Abort(Exception):
    pass


# ---------------------------------------------------------------------------


class Query:
    """A parsed query: qualified goals plus its named variables."""

    def __init__(self, goals: tuple, names: dict, module: str, nvars: int):
        self.goals = goals
        self.names = names  # name -> Var
        self.module = module
        self.nvars = nvars
        self.given: dict = {}

    @classmethod
    def parse(cls, text: str, prog: FlatProgram, module: str = USER) -> "Query":
        t, varmap, nvars = read_term(text)
        q = prog.cache["qualifiers"][module]
        goals = tuple(q.goal(g, "query") for g in conj_to_list(t))
        return cls(goals, varmap, module, nvars)

    def bind(self, **given) -> "Query":
        """A copy with some named variables fixed to (ground) terms."""
        out = Query(self.goals, self.names, self.module, self.nvars)
        out.given = {**self.given, **given}
        return out


class Engine:
    def __init__(self, prog: FlatProgram, config: CheckConfig | None = None, *, fast_checks: bool = True, max_steps: int | None = None):
        self.config = config or CheckConfig()
        if self.config.shallow:
            from termhide.shallow import shallow_program

            prog = shallow_program(prog)
        self.prog = prog
        self.fast_checks = fast_checks
        self.max_steps = max_steps
        self.grammar = prog.cache.get("grammar")
        if self.grammar is None:
            self.grammar = prog.cache["grammar"] = Grammar(prog)
        self._active_cache: dict = {}
        self._visible_cache: dict = {}

    # -- condition selection ---------------------------------------------

    def active_conditions(self, sym, caller: str) -> tuple:
        key = (sym, caller)
        hit = self._active_cache.get(key)
        if hit is None:
            hit = self._active_cache[key] = tuple(_active(self.prog, self.config, sym, caller))
        return hit

    # -- running -----------------------------------------------------------

    def solve(
        self,
        query,
        *,
        module: str = USER,
        semantics: str = "rtc",
        trace: bool = False,
        max_answers: int | None = None,
        on_boundary: Callable | None = None,
        on_call: Callable | None = None,
    ) -> Verdict:
        """Run ``query`` depth-first.

        ``on_boundary(term, from_module, to_module, direction)`` sees every
        argument of a call or return crossing a module boundary;
        ``on_call(goal, module)`` sees every user-predicate literal as it
        is selected.  Both receive resolved terms.
        """
        if isinstance(query, str):
            query = Query.parse(query, self.prog, module)
        run = _Run(self, query, semantics == "rtc", trace, on_boundary, on_call)
        return run.execute(max_answers)


def _active(prog, cfg, sym, caller):
    conds = prog.conditions.get(sym)
    if not conds or cfg.mode == "unsafe":
        return []
    internal = caller == sym.module
    if cfg.mode == "client-safe":
        if internal or sym not in prog.modules[sym.module].exps:
            return []
        return list(conds)
    if cfg.mode == "safe-rt":
        return list(conds)
    d = cfg.discharge
    out = []
    for c in conds:
        if c.id in d or c.origin in d:
            continue
        if internal and (c.id + "@internal" in d or c.origin + "@internal" in d):
            continue
        out.append(c)
    return out


class _Run:
    """State of one query evaluation."""

    def __init__(self, engine: Engine, query: Query, rtc: bool, trace: bool, on_boundary, on_call=None):
        self.engine = engine
        self.prog = engine.prog
        self.preds = engine.prog.preds
        self.checking = rtc and engine.config.mode != "unsafe"
        self.semantics_rtc = rtc
        self.s: dict = {}
        self.trail: list = []
        self.newvar = VarFactory(query.nvars + 1)
        self.stats = Stats()
        self.trace = [] if trace else None
        self.on_boundary = on_boundary
        self.on_call = on_call
        self.grammar = engine.grammar
        self.query = query
        self.qvars = [(n, v) for n, v in query.names.items() if n not in query.given]
        for n, t in query.given.items():
            v = query.names[n]
            self.s[v] = self._import_term(t)

    def _import_term(self, t):
        if t.__class__ is Struct and not t.ground:
            # rename foreign variables apart from this derivation
            mapping: dict = {}

            def cp(t):
                c = t.__class__
                if c is Var:
                    v = mapping.get(t)
                    if v is None:
                        v = mapping[t] = self.newvar()
                    return v
                if c is Struct and not t.ground:
                    return Struct(t.sym, tuple(cp(a) for a in t.args))
                return t

            return cp(t)
        if t.__class__ is Var:
            return self.newvar()
        return t

    # -- driver ------------------------------------------------------------

    def execute(self, max_answers) -> Verdict:
        verdict = Verdict(stats=self.stats, trace=self.trace)
        goals = None
        for g in reversed(self.query.goals):
            goals = (Call(g, self.query.module), goals)
        self._record("init", goals)

        def on_answer():
            verdict.answers.append({n: resolve(v, self.s) for n, v in self.qvars})
            return max_answers is not None and len(verdict.answers) >= max_answers

        try:
            self._search(goals, on_answer, main=True)
        except _Violation as exc:
            verdict.violation = exc.violation
        except EvaluationError as exc:
            verdict.error = str(exc)
        return verdict

    # -- tracing -----------------------------------------------------------

    def _record(self, rule, goals, err=None):
        if self.trace is None:
            return
        from termhide.printer import format_term, VarNamer

        namer = VarNamer()
        store = ", ".join(f"{n}={format_term(resolve(v, self.s), qualify=True, namer=namer)}" for n, v in self.qvars)
        if err is not None:
            self.trace.append(TraceState(rule, "err", err, "", None, 1, store))
            return
        depth = 0
        g = goals
        while g is not None:
            depth += 1
            g = g[1]
        if goals is None:
            self.trace.append(TraceState(rule, "empty", "", "", None, 0, store))
            return
        item = goals[0]
        head = format_term(resolve(item.goal, self.s), qualify=True, namer=namer)
        if item.__class__ is Call:
            self.trace.append(TraceState(rule, "call", head, item.module, None, depth, store))
        elif self.semantics_rtc:
            ids = tuple(sorted(c.id for c in item.checks))
            self.trace.append(TraceState(rule, "retchk", head, item.module, ids, depth, store))
        else:
            self.trace.append(TraceState(rule, "ret", head, item.module, None, depth, store))

    # -- search ------------------------------------------------------------

    def _search(self, goals, on_answer, main: bool) -> bool:
        """Run ``goals``; ``on_answer`` returns True to stop.  Returns True
        if stopped by ``on_answer``."""
        s = self.s
        trail = self.trail
        preds = self.preds
        cps: list = []
        stats = self.stats
        max_steps = self.engine.max_steps
        record = self.trace is not None and main
        checking = self.checking and main
        boundary = self.on_boundary if main else None
        observe = self.on_call if main else None
        while True:
            if goals is None:
                if on_answer():
                    return True
                goals = self._backtrack(cps, record)
                if goals is False:
                    return False
                continue
            if main:
                stats.steps += 1
                if max_steps is not None and stats.steps > max_steps:
                    raise EvaluationError(f"step limit {max_steps} exceeded")
            item, rest = goals
            if item.__class__ is Call:
                g = item.goal
                sym = g.sym
                if sym.module == BUILTIN:
                    if self._builtin(g):
                        goals = rest
                        if record:
                            self._record("constraint", goals)
                    else:
                        goals = self._backtrack(cps, record)
                        if goals is False:
                            return False
                    continue
                caller = item.module
                if observe is not None:
                    observe(resolve(g, s), caller)
                vkey = (sym, caller)
                vis = self.engine._visible_cache.get(vkey)
                if vis is None:
                    vis = self.engine._visible_cache[vkey] = visible(sym, caller, self.prog)
                if not vis:
                    raise VisibilityError(str(sym), caller)
                pred = preds[sym]
                checks = ()
                if checking:
                    conds = self.engine.active_conditions(sym, caller)
                    if conds:
                        checks = self._check_call(g, conds, caller != sym.module, goals)
                if boundary is not None and caller != sym.module:
                    for a in g.args:
                        boundary(resolve(a, s), caller, sym.module, "call")
                if sym.arity:
                    cands = pred.candidates(deref(g.args[0], s))
                else:
                    cands = pred.clauses
                goals = self._try(item, rest, cands, 0, checks, cps)
                if goals is None:
                    goals = self._backtrack(cps, record)
                    if goals is False:
                        return False
                elif record:
                    self._record("resolve", goals)
            else:
                if item.checks:
                    self._check_return(item, goals)
                if boundary is not None and item.caller != item.module:
                    for a in item.goal.args:
                        boundary(resolve(a, s), item.module, item.caller, "return")
                goals = rest
                if record:
                    self._record("return", goals)

    def _try(self, item, rest, cands, start, checks, cps):
        """Resolve ``item`` with the first unifiable clause from ``start``;
        push a choicepoint if alternatives remain."""
        s = self.s
        trail = self.trail
        g = item.goal
        gargs = g.args
        n = len(cands)
        for i in range(start, n):
            cl = cands[i]
            mark = len(trail)
            frame = [None] * cl.nvars
            if self._unify_head(cl.head.args, gargs, frame):
                if i + 1 < n:
                    cps.append((item, rest, cands, i + 1, checks, mark))
                goals = (Ret(g, cl.module, item.module, checks), rest)
                newvar = self.newvar
                for b in reversed(cl.body):
                    goals = (Call(instantiate(b, frame, newvar), cl.module), goals)
                return goals
            undo(s, trail, mark)
        return None

    def _backtrack(self, cps, record):
        while cps:
            item, rest, cands, i, checks, mark = cps.pop()
            undo(self.s, self.trail, mark)
            goals = self._try(item, rest, cands, i, checks, cps)
            if goals is not None:
                if record:
                    self._record("redo", goals)
                return goals
        return False

    def _unify_head(self, hargs, gargs, frame) -> bool:
        s = self.s
        for h, g in zip(hargs, gargs):
            if not self._uh(h, g, frame, s):
                return False
        return True

    def _uh(self, h, g, frame, s) -> bool:
        c = h.__class__
        if c is Var:
            cur = frame[h.id]
            if cur is None:
                frame[h.id] = g
                return True
            return unify(cur, g, s, self.trail)
        g = deref(g, s)
        gc = g.__class__
        if c is int:
            if gc is int:
                return g == h
            if gc is Var:
                s[g] = h
                self.trail.append(g)
                return True
            return False
        if gc is Var:
            if h.ground:
                s[g] = h
            else:
                t = instantiate(h, frame, self.newvar)
                if occurs(g, t, s):
                    return False
                s[g] = t
            self.trail.append(g)
            return True
        if gc is not Struct or g.sym != h.sym:
            return False
        if h.ground:
            return g.ground and g == h or (not g.ground and unify(h, g, s, self.trail))
        for ha, ga in zip(h.args, g.args):
            if not self._uh(ha, ga, frame, s):
                return False
        return True

    # -- builtins ----------------------------------------------------------

    def _builtin(self, g) -> bool:
        name = g.sym.name
        s = self.s
        if name == "=":
            return unify(g.args[0], g.args[1], s, self.trail)
        if name == "true":
            return True
        if name == "int":
            return deref(g.args[0], s).__class__ is int
        if name == "term":
            return True
        if name == "usr":
            return usr_check(g.args[0], s)
        a = deref(g.args[0], s)
        b = deref(g.args[1], s)
        if a.__class__ is Var or b.__class__ is Var:
            raise EvaluationError(f"instantiation error in {name}/2")
        if a.__class__ is not int or b.__class__ is not int:
            from termhide.printer import format_term

            raise EvaluationError(f"type error: {name}/2 expects integers, got {format_term(resolve(a, s))} and {format_term(resolve(b, s))}")
        if name == "<":
            return a < b
        if name == ">":
            return a > b
        if name == "=<":
            return a <= b
        if name == ">=":
            return a >= b
        if name == "=:=":
            return a == b
        return a != b

    # -- checks ------------------------------------------------------------

    def _entails(self, lit, args, memo, boundary_call) -> bool:
        key = (lit.prop, lit.arg)
        hit = memo.get(key)
        self.stats.literals += 1
        if boundary_call:
            self.stats.boundary_literals += 1
        if hit is None:
            if self.engine.fast_checks:
                hit = self.grammar.member(lit.prop, args[lit.arg], self.s)
            else:
                hit = self.check_trivially(lit.prop, args[lit.arg])
            memo[key] = hit
        return hit

    def _check_call(self, g, conds, boundary_call, goals):
        memo: dict = {}
        checks = []
        args = g.args
        for c in conds:
            self.stats.conditions += 1
            if c.kind == "calls":
                if not any(all(self._entails(l, args, memo, boundary_call) for l in conj) for conj in c.pre):
                    self._violate(c, g, goals)
            elif all(self._entails(l, args, memo, boundary_call) for l in c.pre):
                checks.append(c)
        return tuple(checks)

    def _check_return(self, item, goals):
        memo: dict = {}
        args = item.goal.args
        boundary_call = item.caller != item.module
        for c in item.checks:
            self.stats.conditions += 1
            if not all(self._entails(l, args, memo, boundary_call) for l in c.post):
                self._violate(c, item.goal, goals)

    def _violate(self, cond, goal, goals):
        from termhide.printer import format_term

        if self.trace is not None:
            self._record("err", goals, err=cond.id)
        store = {n: format_term(resolve(v, self.s), qualify=True) for n, v in self.qvars}
        raise _Violation(Violation(cond.id, cond.origin, cond.kind, format_term(resolve(goal, self.s), qualify=True), store))

    def check_trivially(self, prop, term) -> bool:
        """Run ``prop(term)`` as a sub-derivation and accept only an answer
        that binds no pre-existing variable.  Free variables are replaced
        by unique constants first, so any answer found is such an answer
        and the search cannot enumerate instances of an open term."""
        mark = len(self.trail)
        goal = Struct(prop, (skolemize(resolve(term, self.s)),))
        module = prop.module if prop.module != BUILTIN else USER
        try:
            return self._search((Call(goal, module), None), lambda: True, main=False)
        finally:
            undo(self.s, self.trail, mark)


def skolemize(t, names: dict | None = None):
    """Replace each variable by a distinct ``user`` constant that no source
    text can spell (``$`` is not a name character)."""
    names = {} if names is None else names
    c = t.__class__
    if c is Var:
        k = names.get(t)
        if k is None:
            k = names[t] = Struct(Symbol(f"$sk{len(names)}", 0, USER))
        return k
    if c is Struct and not t.ground:
        return Struct(t.sym, tuple(skolemize(a, names) for a in t.args))
    return t


class _Violation(Exception):
    def __init__(self, violation: Violation):
        super().__init__(str(violation))
        self.violation = violation


def solve(query, prog: FlatProgram, config: CheckConfig | None = None, **kw) -> Verdict:
    """Convenience wrapper: build an :class:`Engine` and run one query."""
    eng_kw = {k: kw.pop(k) for k in ("fast_checks", "max_steps") if k in kw}
    return Engine(prog, config, **eng_kw).solve(query, **kw)


def check_trivially(conj, store: dict, prog: FlatProgram) -> bool:
    """Does each ``(prop_symbol, term)`` pair in ``conj`` succeed under
    ``store`` without adding bindings?  Uses the generic sub-derivation."""
    eng = Engine(prog, CheckConfig("unsafe"))
    run = _Run(eng, Query((), {}, USER, 0), False, False, None)
    run.s = dict(store)
    top = 0
    for v in store:
        top = max(top, v.id + 1)
    run.newvar = VarFactory(top)
    before = dict(run.s)
    ok = all(run.check_trivially(p, t) for p, t in conj)
    assert run.s == before
    return ok
