"""Surface syntax for ``.qccs`` files: a tokenizer, a recursive-descent parser and a pretty printer.

Process grammar (tightest first: prefix, restriction, ``||``, ``+``; binary
operators associate to the left)::

    proc := "nil" | "tau" "." proc | op "[" vars "]" "." proc
          | chan "?" var "." proc | chan "!" var "." proc
          | proc "+" proc | proc "||" proc | proc "\\" "{" chans "}"
          | Name "(" vars ")" | Name | "(" proc ")"
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import qnum
from .qnum import QState, QuantumError, SuperOp, VarType
from .terms import (
    NIL, Const, ConstDef, Env, Input, Nil, Op, Output, Par, Process, Restrict, Sum, Tau, TermError,
    check_definition, well_formed,
)

KEYWORDS = {
    "nil", "tau", "type", "chan", "var", "op", "state", "proc", "check", "on", "kraus", "gate", "measure",
    "branch", "of", "channel", "unitary", "computational", "with", "states", "not", "bisim", "rbisim",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<ket>\|[^|>\s]+>)
  | (?P<par>\|\|)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?i?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[?!.+\-*/\\{}\[\]():,;=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


class ParseError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError([Diagnostic(line, col, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                if kind == "ident" and s in KEYWORDS:
                    kind = "kw"
                toks.append(Token(kind, s, line, col))
            col += len(s)
        pos = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


# -- placeholders produced before name resolution ----------------------------


@dataclass(frozen=True)
class _OpName:
    name: str
    params: tuple[float, ...]
    tok: Token


@dataclass(frozen=True)
class _Ref:
    name: str
    args: tuple[str, ...] | None
    tok: Token


@dataclass
class Check:
    kind: str
    left: str
    right: str
    states: tuple[str, ...]
    negate: bool
    line: int


@dataclass
class SourceFile:
    env: Env = field(default_factory=Env)
    ops: dict[str, SuperOp] = field(default_factory=dict)
    states: dict[str, QState] = field(default_factory=dict)
    procs: dict[str, Process] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    def process(self, name: str) -> Process:
        """A named process, or a constant applied to its own parameters."""
        if name in self.procs:
            return self.procs[name]
        if name in self.env.defs:
            d = self.env.defs[name]
            return Const(name, d.params)
        return parse_process(name, self)

    def state(self, name: str) -> QState:
        try:
            return self.states[name]
        except KeyError:
            raise KeyError(f"unknown state {name!r}") from None


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.chan_pos: dict[str, Token] = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError([Diagnostic(tok.line, tok.col, msg)])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "kw", "par")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            self.error(f"expected {what}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def idents(self, what: str) -> list[Token]:
        out = [self.ident(what)]
        while self.accept(","):
            out.append(self.ident(what))
        return out

    # numbers -----------------------------------------------------------

    def number(self) -> complex:
        v = self._sum()
        return v

    def _sum(self) -> complex:
        v = self._product()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            r = self._product()
            v = v + r if op == "+" else v - r
        return v

    def _product(self) -> complex:
        v = self._unary()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            r = self._unary()
            if op == "/" and r == 0:
                self.error("division by zero")
            v = v * r if op == "*" else v / r
        return v

    def _unary(self) -> complex:
        if self.accept("-"):
            return -self._unary()
        if self.accept("+"):
            return self._unary()
        t = self.tok
        if t.kind == "num":
            self.i += 1
            if t.text.endswith("i"):
                return complex(0, float(t.text[:-1]))
            return complex(float(t.text))
        if t.kind == "ident" and t.text in ("i", "pi", "e") and self.peek().text != "(":
            self.i += 1
            return {"i": 1j, "pi": complex(math.pi), "e": complex(math.e)}[t.text]
        if t.kind == "ident" and t.text in ("sqrt", "exp", "cos", "sin") and self.peek().text == "(":
            self.i += 1
            self.expect("(")
            a = self._sum()
            self.expect(")")
            fn = {"sqrt": cmath.sqrt, "exp": cmath.exp, "cos": cmath.cos, "sin": cmath.sin}[t.text]
            return complex(fn(a))
        if self.accept("("):
            v = self._sum()
            self.expect(")")
            return v
        self.error(f"expected a number, found {t.text or 'end of input'!r}")

    def real(self) -> float:
        t = self.tok
        v = self.number()
        if abs(v.imag) > 0:
            self.error("expected a real number", t)
        return v.real

    def vector(self) -> list[complex]:
        self.expect("[")
        vals = [self.number()]
        while self.accept(","):
            vals.append(self.number())
        self.expect("]")
        return vals

    def matrix(self) -> np.ndarray:
        t = self.tok
        self.expect("[")
        rows = [self.vector()]
        while self.accept(","):
            rows.append(self.vector())
        self.expect("]")
        if len({len(r) for r in rows}) != 1:
            self.error("matrix rows have different lengths", t)
        return np.array(rows, dtype=complex)

    # processes ---------------------------------------------------------

    def proc(self) -> Process:
        p = self.par()
        while self.accept("+"):
            p = Sum(p, self.par())
        return p

    def par(self) -> Process:
        p = self.res()
        while self.accept("||"):
            p = Par(p, self.res())
        return p

    def res(self) -> Process:
        p = self.prefix()
        while self.accept("\\"):
            self.expect("{")
            chans = []
            if not self.at("}"):
                toks = self.idents("channel name")
                for c in toks:
                    self.chan_pos.setdefault(c.text, c)
                chans = [c.text for c in toks]
            self.expect("}")
            p = Restrict(p, frozenset(chans))
        return p

    def prefix(self) -> Process:
        t = self.tok
        if self.accept("nil"):
            return NIL
        if self.accept("tau"):
            self.expect(".")
            return Tau(self.prefix())
        if self.accept("("):
            p = self.proc()
            self.expect(")")
            return p
        if t.kind != "ident":
            self.error(f"expected a process, found {t.text or 'end of input'!r}")
        name = self.ident()
        nxt = self.tok
        if self.accept("?") or self.accept("!"):
            x = self.ident("variable")
            self.expect(".")
            body = self.prefix()
            cls = Input if nxt.text == "?" else Output
            self.chan_pos.setdefault(name.text, name)
            return cls(name.text, x.text, body)
        params: tuple[float, ...] = ()
        args = None
        if self.at("("):
            if self.peek().kind in ("num",) or self.peek().text in ("-", "+") or (
                    self.peek().kind == "ident" and self.peek().text in ("pi", "sqrt") and self.peek(2).text != ","):
                self.expect("(")
                ps = [self.real()]
                while self.accept(","):
                    ps.append(self.real())
                self.expect(")")
                params = tuple(ps)
                if not self.at("["):
                    self.error("expected '[' after gate parameters")
            else:
                self.expect("(")
                args = []
                if not self.at(")"):
                    args = [a.text for a in self.idents("variable")]
                self.expect(")")
        if self.accept("["):
            xs = [a.text for a in self.idents("variable")]
            self.expect("]")
            self.expect(".")
            body = self.prefix()
            return Op(_OpName(name.text, params, name), tuple(xs), body)
        return _Ref(name.text, tuple(args) if args is not None else None, name)


# -- file-level parsing -----------------------------------------------------


def parse_file(text: str, fresh_per_type: int = 1) -> SourceFile:
    """Parse and resolve a whole source file; raises ParseError with positioned diagnostics."""
    p = _Parser(text)
    raw_ops, raw_states, raw_procs, raw_defs = [], [], [], []
    sf = SourceFile()
    env = sf.env
    env.fresh_per_type = fresh_per_type
    var_order: list[str] = []
    while p.tok.kind != "eof":
        t = p.tok
        if p.accept("type"):
            name = p.ident("type name")
            p.expect("=")
            dt = p.tok
            if dt.kind != "num" or not dt.text.isdigit():
                p.error("type dimension must be a positive integer")
            p.i += 1
            dim = int(dt.text)
            if dim < 2:
                p.error(f"type {name.text} must have dimension >= 2", dt)
            old = env.types.get(name.text)
            if old is not None and old.dim != dim and name.text != "qubit":
                p.error(f"type {name.text} declared twice", name)
            env.types[name.text] = VarType(name.text, dim)
            p.expect(";")
        elif p.accept("chan"):
            for c in p.idents("channel name"):
                env.channels.add(c.text)
            p.expect(";")
        elif p.accept("var"):
            names = p.idents("variable")
            p.expect(":")
            tname = p.ident("type name")
            if tname.text not in env.types:
                p.error(f"unknown type {tname.text!r}", tname)
            for n in names:
                if n.text in env.var_types:
                    p.error(f"variable {n.text!r} declared twice", n)
                env.declare(n.text, env.types[tname.text])
                var_order.append(n.text)
            p.expect(";")
        elif p.accept("op"):
            raw_ops.append(_parse_op(p, env))
        elif p.accept("state"):
            name = p.ident("state name")
            p.expect("=")
            items = [_parse_state_item(p)]
            while p.accept(","):
                items.append(_parse_state_item(p))
            p.expect(";")
            raw_states.append((name, items))
        elif p.accept("proc"):
            name = p.ident("process name")
            p.expect("=")
            body = p.proc()
            p.expect(";")
            raw_procs.append((name, body))
        elif p.accept("check"):
            negate = bool(p.accept("not"))
            kt = p.tok
            if not (p.accept("bisim") or p.accept("rbisim")):
                p.error("expected 'bisim' or 'rbisim'")
            a = p.ident("process name")
            b = p.ident("process name")
            states: tuple[str, ...] = ()
            if p.accept("with"):
                p.expect("states")
                p.expect("{")
                states = tuple(s.text for s in p.idents("state name"))
                p.expect("}")
            p.expect(";")
            sf.checks.append(Check(kt.text, a.text, b.text, states, negate, t.line))
        elif t.kind == "ident" and p.peek().text == "(":
            name = p.ident()
            p.expect("(")
            params = []
            if not p.at(")"):
                params = p.idents("parameter")
            p.expect(")")
            p.expect("=")
            body = p.proc()
            p.expect(";")
            raw_defs.append((name, params, body))
        else:
            p.error(f"expected a declaration, found {t.text!r}")
    _resolve(sf, raw_ops, raw_states, raw_procs, raw_defs, p.chan_pos)
    return sf


def _parse_slots(p: _Parser, env: Env) -> tuple[VarType, ...]:
    p.expect("(")
    slots = []
    while True:
        p.ident("slot name")
        p.expect(":")
        tn = p.ident("type name")
        if tn.text not in env.types:
            p.error(f"unknown type {tn.text!r}", tn)
        slots.append(env.types[tn.text])
        if not p.accept(","):
            break
    p.expect(")")
    return tuple(slots)


def _matrices(p: _Parser) -> list[np.ndarray]:
    p.expect("{")
    ms = [p.matrix()]
    while p.accept(";"):
        if p.at("}"):
            break
        ms.append(p.matrix())
    p.expect("}")
    return ms


def _parse_op(p: _Parser, env: Env):
    name = p.ident("operation name")
    domain = _parse_slots(p, env) if p.accept("on") else None
    p.expect("=")
    kt = p.tok
    spec: tuple
    if p.accept("kraus"):
        spec = ("kraus", _matrices(p))
    elif p.accept("unitary"):
        spec = ("unitary", p.matrix())
    elif p.accept("gate"):
        g = p.ident("gate name")
        params = ()
        if p.accept("("):
            params = [p.real()]
            while p.accept(","):
                params.append(p.real())
            p.expect(")")
        spec = ("gate", g, tuple(params))
    elif p.accept("measure"):
        if p.accept("computational"):
            spec = ("measure", None)
        else:
            spec = ("measure", _matrices(p))
    elif p.accept("branch"):
        it = p.tok
        if it.kind != "num" or not it.text.isdigit():
            p.error("expected a branch index")
        p.i += 1
        p.expect("of")
        src = p.ident("measurement name")
        spec = ("branch", int(it.text), src)
    elif p.accept("channel"):
        fam = p.ident("channel family")
        p.expect("(")
        arg = p.real()
        p.expect(")")
        spec = ("channel", fam, arg)
    else:
        p.error("expected kraus, unitary, gate, measure, branch or channel")
    if p.accept("on"):
        if domain is not None:
            p.error("slots given twice")
        domain = _parse_slots(p, env)
    p.expect(";")
    return name, domain, spec, kt


def _parse_state_item(p: _Parser):
    t = p.tok
    if p.accept("("):
        names = tuple(n.text for n in p.idents("variable"))
        p.expect(")")
    else:
        names = (p.ident("variable").text,)
    p.expect(":")
    vt = p.tok
    if vt.kind == "ket":
        p.i += 1
        value = ("ket", vt.text[1:-1])
    elif vt.kind == "ident":
        p.i += 1
        value = ("named", vt.text)
    elif p.at("["):
        if p.peek().text == "[":
            value = ("matrix", p.matrix())
        else:
            value = ("vector", np.array(p.vector(), dtype=complex))
    else:
        p.error("expected a ket, a named state, a vector or a matrix")
    return names, value, t


def _fail(tok: Token, msg: str):
    raise ParseError([Diagnostic(tok.line, tok.col, msg)])


def _build_op(name: Token, domain, spec, kt: Token, ops: dict[str, SuperOp], env: Env) -> SuperOp:
    label = name.text
    kind = spec[0]
    try:
        if kind == "kraus":
            ks = spec[1]
            if domain is None:
                domain = _infer_domain(ks[0].shape[0], env, kt)
            return SuperOp(domain, tuple(ks), label)
        if kind == "unitary":
            u = spec[1]
            if domain is None:
                domain = _infer_domain(u.shape[0], env, kt)
            return qnum.unitary_superop(u, domain, label)
        if kind == "gate":
            g, params = spec[1], spec[2]
            u = qnum.gate_matrix(g.text, *params)
            if domain is None:
                domain = _infer_domain(u.shape[0], env, kt)
            return qnum.unitary_superop(u, domain, label)
        if kind == "measure":
            if domain is None:
                domain = _infer_domain(spec[1][0].shape[0], env, kt) if spec[1] else (_qubit_type(env, kt),)
            ms = spec[1] if spec[1] is not None else qnum.computational_measurement(domain)
            return qnum.measurement_superop(ms, "total", domain, label)
        if kind == "branch":
            idx, src = spec[1], spec[2]
            if src.text not in ops:
                _fail(src, f"unknown measurement {src.text!r}")
            m = ops[src.text]
            return qnum.measurement_superop(m.kraus, idx, domain or m.domain, label)
        if kind == "channel":
            fam, arg = spec[1], spec[2]
            if fam.text not in qnum.CHANNELS:
                _fail(fam, f"unknown channel family {fam.text!r}; known: {', '.join(sorted(qnum.CHANNELS))}")
            return qnum.CHANNELS[fam.text](arg, domain or (_qubit_type(env, kt),)).relabel(label)
    except QuantumError as e:
        _fail(kt, f"operation {label}: {e}")
    raise AssertionError(kind)


def _qubit_type(env: Env, tok: Token) -> VarType:
    return _infer_domain(2, env, tok)[0]


def _infer_domain(d: int, env: Env, tok: Token) -> tuple[VarType, ...]:
    for t in env.types.values():
        if t.dim == d:
            return (t,)
    for t in env.types.values():
        n = round(math.log(d, t.dim)) if t.dim > 1 else 0
        if n >= 1 and t.dim**n == d:
            return (t,) * n
    _fail(tok, f"cannot infer slot types for a {d}-dimensional operation; add 'on (a:type, ...)'")


def _build_state(name: Token, items, env: Env) -> QState:
    reg = env.register()
    parts = {}
    for names, (kind, val), tok in items:
        for n in names:
            if n not in reg:
                _fail(tok, f"state {name.text}: unknown variable {n!r}")
        dims = [env.var_type(n).dim for n in names]
        d = math.prod(dims)
        try:
            if kind == "ket":
                if len(names) != 1:
                    _fail(tok, "a ket label applies to a single variable")
                m = qnum.projector(qnum.named_ket(val, d))
            elif kind == "named":
                if val in qnum.BELL:
                    if dims != [2, 2]:
                        _fail(tok, f"{val} needs a pair of qubit variables")
                    m = qnum.projector(qnum.BELL[val])
                elif val == "mixed":
                    m = np.eye(d, dtype=complex) / d
                else:
                    _fail(tok, f"unknown named state {val!r}")
            elif kind == "vector":
                if val.shape != (d,):
                    _fail(tok, f"vector of length {val.shape[0]} for a {d}-dimensional system")
                nv = np.linalg.norm(val)
                if abs(nv - 1) > 1e-9:
                    _fail(tok, f"state vector has norm {nv}")
                m = qnum.projector(val)
            else:
                if val.shape != (d, d):
                    _fail(tok, f"{val.shape[0]}x{val.shape[1]} matrix for a {d}-dimensional system")
                m = val
        except QuantumError as e:
            _fail(tok, str(e))
        parts[names] = m
    try:
        return QState.product(reg, parts)
    except QuantumError as e:
        _fail(name, f"state {name.text}: {e}")


def _resolve(sf: SourceFile, raw_ops, raw_states, raw_procs, raw_defs, chan_pos):
    env = sf.env
    for name, domain, spec, kt in raw_ops:
        if name.text in sf.ops:
            _fail(name, f"operation {name.text!r} declared twice")
        sf.ops[name.text] = _build_op(name, domain, spec, kt, sf.ops, env)
    def_names = {n.text: n for n, _, _ in raw_defs}
    proc_raw = {n.text: (n, b) for n, b in raw_procs}
    for n, _ in raw_procs:
        if n.text in def_names:
            _fail(n, f"{n.text!r} is both a named process and a constant")
    arities = {n.text: len(ps) for n, ps, _ in raw_defs}
    resolving: list[str] = []

    def named(name: str, tok: Token) -> Process:
        if name in sf.procs:
            return sf.procs[name]
        if name in resolving:
            _fail(tok, f"named process {name!r} refers to itself; use a constant definition for recursion")
        resolving.append(name)
        ntok, body = proc_raw[name]
        sf.procs[name] = resolve(body)
        resolving.pop()
        return sf.procs[name]

    def resolve(t) -> Process:
        if isinstance(t, _Ref):
            if t.name in def_names:
                args = t.args if t.args is not None else ()
                if len(args) != arities[t.name]:
                    _fail(t.tok, f"{t.name} expects {arities[t.name]} argument(s), got {len(args)}")
                for a in args:
                    _var(a, t.tok)
                return Const(t.name, args)
            if t.name in proc_raw:
                if t.args:
                    _fail(t.tok, f"named process {t.name!r} takes no arguments")
                return named(t.name, t.tok)
            _fail(t.tok, f"unknown process {t.name!r}")
        if isinstance(t, Nil):
            return t
        if isinstance(t, Tau):
            return Tau(resolve(t.body))
        if isinstance(t, Op):
            on: _OpName = t.op
            for x in t.vars:
                _var(x, on.tok)
            if on.name in sf.ops and not on.params:
                op = sf.ops[on.name]
            elif qnum.is_gate(on.name):
                try:
                    u = qnum.gate_matrix(on.name, *on.params)
                    dom = tuple(env.var_type(x) for x in t.vars)
                    op = qnum.unitary_superop(u, dom, qnum.named_gate(on.name, *on.params).label)
                except (QuantumError, TermError) as e:
                    _fail(on.tok, str(e))
            else:
                _fail(on.tok, f"unknown operation {on.name!r}")
            return Op(op, t.vars, resolve(t.body))
        if isinstance(t, (Input, Output)):
            if t.chan not in env.channels:
                _fail(chan_pos[t.chan], f"undeclared channel {t.chan!r}")
            if isinstance(t, Input):
                _binder(t.var, chan_pos[t.chan])
            else:
                _var(t.var, chan_pos[t.chan])
            return type(t)(t.chan, t.var, resolve(t.body))
        if isinstance(t, Sum):
            return Sum(resolve(t.left), resolve(t.right))
        if isinstance(t, Par):
            return Par(resolve(t.left), resolve(t.right))
        if isinstance(t, Restrict):
            for c in t.chans:
                if c not in env.channels:
                    _fail(chan_pos[c], f"undeclared channel {c!r}")
            return Restrict(resolve(t.body), t.chans)
        raise TypeError(t)

    def _var(x: str, tok: Token):
        if x not in env.var_types and x not in env.binder_types:
            _fail(tok, f"undeclared variable {x!r}")

    def _binder(x: str, tok: Token):
        # input binders need not be declared when only one type is in play
        if x in env.var_types or x in env.binder_types:
            return
        used = {t.name: t for t in env.var_types.values()} or {"qubit": env.types["qubit"]}
        if len(used) != 1:
            _fail(tok, f"binder {x!r} needs a declaration: several types are in scope")
        env.binder_types[x] = next(iter(used.values()))

    for n, params, _ in raw_defs:
        for x in params:
            _binder(x.text, x)
    for n, params, body in raw_defs:
        env.define(ConstDef(n.text, tuple(x.text for x in params), NIL))
    for n, params, body in raw_defs:
        env.define(ConstDef(n.text, tuple(x.text for x in params), resolve(body)))
    for n, _ in raw_procs:
        named(n.text, n)
    for n, params, _ in raw_defs:
        v = check_definition(env.defs[n.text], env)
        if v:
            _fail(n, f"definition of {n.text}: {v.message} (in {pretty(v.subterm)})")
    for n, _ in raw_procs:
        v = well_formed(sf.procs[n.text], env)
        if v:
            _fail(n, f"process {n.text}: {v.message} (in {pretty(v.subterm)})")
    for name, items in raw_states:
        if name.text in sf.states:
            _fail(name, f"state {name.text!r} declared twice")
        sf.states[name.text] = _build_state(name, items, env)


def parse_process(text: str, sf: SourceFile | None = None) -> Process:
    """Parse a single process expression against the declarations of ``sf``."""
    p = _Parser(text)
    raw = p.proc()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after process")
    sf = sf or SourceFile()
    return _resolve_expr(raw, sf)


def _resolve_expr(raw, sf: SourceFile) -> Process:
    env = sf.env

    def resolve(t) -> Process:
        if isinstance(t, _Ref):
            if t.name in env.defs:
                args = t.args if t.args is not None else ()
                return Const(t.name, tuple(args))
            if t.name in sf.procs and not t.args:
                return sf.procs[t.name]
            _fail(t.tok, f"unknown process {t.name!r}")
        if isinstance(t, Nil):
            return t
        if isinstance(t, Tau):
            return Tau(resolve(t.body))
        if isinstance(t, Op):
            on = t.op
            if on.name in sf.ops and not on.params:
                op = sf.ops[on.name]
            elif qnum.is_gate(on.name):
                try:
                    dom = tuple(env.var_type(x) for x in t.vars)
                except TermError:
                    dom = None
                try:
                    u = qnum.gate_matrix(on.name, *on.params)
                    op = qnum.unitary_superop(u, dom, qnum.named_gate(on.name, *on.params).label)
                except QuantumError as e:
                    _fail(on.tok, str(e))
            else:
                _fail(on.tok, f"unknown operation {on.name!r}")
            return Op(op, t.vars, resolve(t.body))
        if isinstance(t, (Input, Output)):
            return type(t)(t.chan, t.var, resolve(t.body))
        if isinstance(t, Sum):
            return Sum(resolve(t.left), resolve(t.right))
        if isinstance(t, Par):
            return Par(resolve(t.left), resolve(t.right))
        if isinstance(t, Restrict):
            return Restrict(resolve(t.body), t.chans)
        raise TypeError(t)

    return resolve(raw)


# -- pretty printing ----------------------------------------------------------

_SUM, _PAR, _RES, _ATOM = 1, 2, 3, 4


def pretty(p: Process) -> str:
    """Render a term with the fewest parentheses the grammar needs."""
    return _pp(p, _SUM)


def _wrap(s: str, prec: int, need: int) -> str:
    return f"({s})" if prec < need else s


def _pp(p: Process, need: int) -> str:
    if isinstance(p, Nil):
        return "nil"
    if isinstance(p, Const):
        return f"{p.name}({', '.join(p.args)})"
    if isinstance(p, Tau):
        return "tau." + _pp(p.body, _ATOM)
    if isinstance(p, Op):
        return f"{p.op.label}[{', '.join(p.vars)}]." + _pp(p.body, _ATOM)
    if isinstance(p, Input):
        return f"{p.chan}?{p.var}." + _pp(p.body, _ATOM)
    if isinstance(p, Output):
        return f"{p.chan}!{p.var}." + _pp(p.body, _ATOM)
    if isinstance(p, Sum):
        return _wrap(f"{_pp(p.left, _SUM)} + {_pp(p.right, _PAR)}", _SUM, need)
    if isinstance(p, Par):
        return _wrap(f"{_pp(p.left, _PAR)} || {_pp(p.right, _RES)}", _PAR, need)
    if isinstance(p, Restrict):
        return _wrap(f"{_pp(p.body, _RES)}\\{{{', '.join(sorted(p.chans))}}}", _RES, need)
    raise TypeError(f"not a process: {p!r}")
