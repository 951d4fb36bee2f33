"""Transition rules over configurations and finite LTS construction."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .qnum import QState, Register, VarType, apply_superop, permute_superop, same_space, QuantumError
from .terms import (
    Action, Const, Env, InAct, Input, Nil, Op, OpAct, OutAct, Output, Par, Process, Restrict, Sum, Tau, TAU,
    TermError, Subst, _pick_binder, _subst, canonical, fv, unfold,
)


class SemanticsError(RuntimeError):
    """A configuration cannot be stepped (undefined constant, unguarded recursion, empty input pool)."""


@dataclass(frozen=True)
class Configuration:
    process: Process
    state: QState

    @property
    def register(self) -> Register:
        return self.state.register

    def key(self, env: Env):
        return canonical(self.process, env), self.state.register.names, self.state.rounded_key()


@dataclass(frozen=True)
class Step:
    """A state-independent non-input transition ``P --action--> target``."""

    action: Action
    target: Process


@dataclass(frozen=True)
class InputStep:
    """An input on ``chan`` whose continuation is ``template`` with ``var`` as the hole."""

    chan: str
    var: str
    template: Process

    @property
    def forbidden(self) -> frozenset[str]:
        return fv(self.template) - {self.var}

    def instantiate(self, y: str, env: Env) -> Process:
        if y == self.var:
            return self.template
        return _subst(self.template, Subst({self.var: y}), env)


def canonical_op(a: OpAct) -> OpAct:
    """Same operation with variables sorted by name (slots permuted to match)."""
    order = sorted(range(len(a.vars)), key=lambda i: a.vars[i])
    if order == list(range(len(a.vars))):
        return a
    return OpAct(permute_superop(a.op, order), tuple(a.vars[i] for i in order))


# -- symbolic transitions ---------------------------------------------------


def steps(p: Process, env: Env, nf: bool = False) -> tuple[Step | InputStep, ...]:
    """All transitions of ``p`` as state-independent steps (inputs kept symbolic)."""
    cache = env.cache.setdefault(("steps", nf), {})
    hit = cache.get(p)
    if hit is None:
        hit = tuple(_dedupe(_steps(p, env, nf, frozenset()), env))
        cache[p] = hit
    return hit


def _dedupe(items, env):
    seen = set()
    for s in items:
        if isinstance(s, Step):
            a = s.action
            akey = ("op", canonical_op(a)) if isinstance(a, OpAct) else a
            k = (akey, canonical(s.target, env))
        else:
            k = ("in", s.chan, canonical(Input(s.chan, s.var, s.template), env))
        if k not in seen:
            seen.add(k)
            yield s


def _steps(p: Process, env: Env, nf: bool, unfolding: frozenset[str]) -> list[Step | InputStep]:
    if isinstance(p, Nil):
        return []
    if isinstance(p, Tau):
        return [Step(TAU, p.body)]
    if isinstance(p, Op):
        return [Step(OpAct(p.op, p.vars), p.body)]
    if isinstance(p, Output):
        return [Step(OutAct(p.chan, p.var), p.body)]
    if isinstance(p, Input):
        return [InputStep(p.chan, p.var, p.body)]
    if isinstance(p, Sum):
        return _steps(p.left, env, nf, unfolding) + _steps(p.right, env, nf, unfolding)
    if isinstance(p, Restrict):
        out = []
        for s in _steps(p.body, env, nf, unfolding):
            if isinstance(s, Step):
                a = s.action
                if isinstance(a, OutAct) and a.chan in p.chans:
                    continue
                out.append(Step(a, Restrict(s.target, p.chans)))
            elif s.chan not in p.chans:
                out.append(InputStep(s.chan, s.var, Restrict(s.template, p.chans)))
        return out
    if isinstance(p, Const):
        if p.name in unfolding:
            raise SemanticsError(f"unguarded recursion through {p.name}")
        try:
            body = unfold(p, env)
        except TermError as e:
            raise SemanticsError(str(e)) from e
        if nf:
            from .reduce import normal_form
            body = normal_form(body, env)
        return _steps(body, env, nf, unfolding | {p.name})
    if isinstance(p, Par):
        left = _steps(p.left, env, nf, unfolding)
        right = _steps(p.right, env, nf, unfolding)
        out: list[Step | InputStep] = []
        for s in left:
            out.append(_par_wrap(s, p.right, env, left_side=True))
        for s in right:
            out.append(_par_wrap(s, p.left, env, left_side=False))
        out.extend(_comm(left, right, env, left_inputs=True))
        out.extend(_comm(right, left, env, left_inputs=False))
        return out
    raise TypeError(f"not a process: {p!r}")


def _par_wrap(s, other: Process, env: Env, left_side: bool):
    if isinstance(s, Step):
        t = Par(s.target, other) if left_side else Par(other, s.target)
        return Step(s.action, t)
    var, template = s.var, s.template
    other_fv = fv(other)
    if var in other_fv:
        # keep the hole variable out of the sibling before closing over it
        new = _pick_binder(fv(template) | other_fv, env.var_type(var))
        template = _subst(template, Subst({var: new}), env)
        var = new
    t = Par(template, other) if left_side else Par(other, template)
    return InputStep(s.chan, var, t)


def _comm(inputs, outputs, env: Env, left_inputs: bool):
    for i in inputs:
        if not isinstance(i, InputStep):
            continue
        for o in outputs:
            if isinstance(o, Step) and isinstance(o.action, OutAct) and o.action.chan == i.chan:
                x = o.action.var
                if x in i.forbidden:
                    continue
                received = i.instantiate(x, env)
                t = Par(received, o.target) if left_inputs else Par(o.target, received)
                yield Step(TAU, t)


# -- configurations ---------------------------------------------------------


def input_targets(register: Register, vtype: VarType, forbidden: frozenset[str]) -> list[str]:
    """Register variables of the binder's type that respect the input side condition."""
    same = [n for n, t in register.vars if same_space(t, vtype)]
    if not same:
        raise SemanticsError(f"register has no variable of type {vtype.name} to receive into")
    return [n for n in same if n not in forbidden]


def enabled(c: Configuration, env: Env, nf: bool = False) -> list[tuple[Action, Configuration]]:
    """Every transition of ``c``, in a deterministic order."""
    out = []
    for s in steps(c.process, env, nf):
        if isinstance(s, Step):
            a = s.action
            if isinstance(a, OpAct):
                try:
                    state = apply_superop(a.op, a.vars, c.state)
                except QuantumError as e:
                    raise SemanticsError(str(e)) from e
            else:
                state = c.state
            out.append((a, Configuration(s.target, state)))
        else:
            vtype = env.var_type(s.var)
            for y in input_targets(c.register, vtype, s.forbidden):
                out.append((InAct(s.chan, y), Configuration(s.instantiate(y, env), c.state)))
    return out


# -- labelled transition systems --------------------------------------------


@dataclass
class Lts:
    nodes: list[Configuration] = field(default_factory=list)
    edges: list[tuple[int, Action, int]] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    truncated: set[int] = field(default_factory=set)
    root: int = 0

    def successors(self, i: int) -> Iterator[tuple[Action, int]]:
        for s, a, t in self.edges:
            if s == i:
                yield a, t

    @property
    def is_truncated(self) -> bool:
        return bool(self.truncated)

    def to_json(self, pretty) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {"id": i, "process": pretty(c.process), "state": c.state.fingerprint(), "depth": self.depth[i]}
                for i, c in enumerate(self.nodes)
            ],
            "edges": [{"source": s, "action": str(a), "target": t} for s, a, t in self.edges],
            "truncated": sorted(self.truncated),
        }

    def to_dot(self, pretty) -> str:
        lines = ["digraph lts {", "  rankdir=LR;", '  node [shape=box, fontname="monospace"];']
        for i, c in enumerate(self.nodes):
            text = pretty(c.process).replace("\\", "\\\\").replace('"', '\\"')
            label = f"{text}\\n{c.state.fingerprint()}"
            style = ", style=dashed" if i in self.truncated else ""
            peripheries = ", peripheries=2" if i == self.root else ""
            lines.append(f'  n{i} [label="{label}"{style}{peripheries}];')
        for s, a, t in self.edges:
            lines.append(f'  n{s} -> n{t} [label="{str(a)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_lts(c0: Configuration, env: Env, max_depth: int = 64, max_nodes: int = 10_000, nf: bool = False) -> Lts:
    """Breadth-first closure of ``enabled`` with node deduplication; bounds mark nodes truncated."""
    lts = Lts()
    index: dict = {}

    def add(c: Configuration, d: int) -> int | None:
        k = c.key(env)
        i = index.get(k)
        if i is not None:
            return i
        if len(lts.nodes) >= max_nodes:
            return None
        i = len(lts.nodes)
        index[k] = i
        lts.nodes.append(c)
        lts.depth.append(d)
        return i

    add(c0, 0)
    queue = deque([0])
    while queue:
        i = queue.popleft()
        d = lts.depth[i]
        moves = enabled(lts.nodes[i], env, nf)
        if d >= max_depth:
            if moves:
                lts.truncated.add(i)
            continue
        for a, c in moves:
            before = len(lts.nodes)
            j = add(c, d + 1)
            if j is None:
                lts.truncated.add(i)
                continue
            lts.edges.append((i, a, j))
            if j == before:
                queue.append(j)
    return lts


def lts_json(lts: Lts) -> str:
    from .parse import pretty
    return json.dumps(lts.to_json(pretty), indent=2, sort_keys=True)


def lts_dot(lts: Lts) -> str:
    from .parse import pretty
    return lts.to_dot(pretty)


def replay(c: Configuration, env: Env, limit: int = 64) -> tuple[list[Action], Configuration]:
    """Follow a deterministic run until no move is enabled; raise if a choice or a loop appears."""
    trace: list[Action] = []
    for _ in range(limit):
        moves = enabled(c, env)
        if not moves:
            return trace, c
        if len(moves) > 1:
            raise SemanticsError(f"run is not deterministic after {len(trace)} steps: "
                                 f"{', '.join(str(a) for a, _ in moves)}")
        a, c = moves[0]
        trace.append(a)
    raise SemanticsError(f"run did not stop within {limit} steps")
