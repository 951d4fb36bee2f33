"""Operation reduction: merging runs of quantum operations and process normal forms."""

from __future__ import annotations

from typing import Iterator, Sequence

from .qnum import TOL_CHANNEL, SuperOp, extend_superop, superop_compose, superop_equal
from .terms import (
    Action, Const, Env, Input, Nil, Op, OpAct, Output, Par, Process, Restrict, Sum, Tau, canonical,
)


def merge_ops(run: Sequence[OpAct]) -> OpAct:
    """Compose ``E1[X1] ... En[Xn]`` into one operation on ``X = X1 u ... u Xn`` (vars sorted)."""
    if len(run) == 1:
        return run[0]
    types = {}
    for a in run:
        for x, t in zip(a.vars, a.op.domain):
            types[x] = t
    target = tuple(sorted(types.items()))
    acc: SuperOp | None = None
    for a in run:
        ext = extend_superop(a.op, a.vars, target)
        acc = ext if acc is None else superop_compose(ext, acc)
    return OpAct(acc, tuple(n for n, _ in target))


def reduce_string(t: Sequence[Action]) -> list[Action]:
    """Replace every maximal run of adjacent operation actions by their composition."""
    out: list[Action] = []
    run: list[OpAct] = []
    for a in t:
        if isinstance(a, OpAct):
            run.append(a)
            continue
        if run:
            out.append(merge_ops(run))
            run = []
        out.append(a)
    if run:
        out.append(merge_ops(run))
    return out


def normal_form(p: Process, env: Env | None = None) -> Process:
    """The operation-reduction normal form: every chain of Op prefixes merged into one."""
    if isinstance(p, (Nil, Const)):
        return p
    if isinstance(p, Tau):
        return Tau(normal_form(p.body, env))
    if isinstance(p, Op):
        run = []
        t: Process = p
        while isinstance(t, Op):
            run.append(OpAct(t.op, t.vars))
            t = t.body
        m = merge_ops(run)
        return Op(m.op, m.vars, normal_form(t, env))
    if isinstance(p, Input):
        return Input(p.chan, p.var, normal_form(p.body, env))
    if isinstance(p, Output):
        return Output(p.chan, p.var, normal_form(p.body, env))
    if isinstance(p, Sum):
        return Sum(normal_form(p.left, env), normal_form(p.right, env))
    if isinstance(p, Par):
        return Par(normal_form(p.left, env), normal_form(p.right, env))
    if isinstance(p, Restrict):
        return Restrict(normal_form(p.body, env), p.chans)
    raise TypeError(f"not a process: {p!r}")


def one_step_reductions(p: Process) -> Iterator[Process]:
    """Every process reachable by merging a single adjacent pair of Op prefixes."""
    if isinstance(p, Op):
        if isinstance(p.body, Op):
            m = merge_ops([OpAct(p.op, p.vars), OpAct(p.body.op, p.body.vars)])
            yield Op(m.op, m.vars, p.body.body)
        for b in one_step_reductions(p.body):
            yield Op(p.op, p.vars, b)
    elif isinstance(p, (Tau,)):
        for b in one_step_reductions(p.body):
            yield Tau(b)
    elif isinstance(p, (Input, Output)):
        for b in one_step_reductions(p.body):
            yield type(p)(p.chan, p.var, b)
    elif isinstance(p, (Sum, Par)):
        for b in one_step_reductions(p.left):
            yield type(p)(b, p.right)
        for b in one_step_reductions(p.right):
            yield type(p)(p.left, b)
    elif isinstance(p, Restrict):
        for b in one_step_reductions(p.body):
            yield Restrict(b, p.chans)


def proc_equiv(p: Process, q: Process, env: Env, tol: float = TOL_CHANNEL) -> bool:
    """Alpha-equivalence where Op payloads compare by Choi matrix rather than by Kraus list."""
    return _eq(canonical(p, env), canonical(q, env), tol)


def _eq(p: Process, q: Process, tol: float) -> bool:
    if type(p) is not type(q):
        return False
    if isinstance(p, Nil):
        return True
    if isinstance(p, Const):
        return p == q
    if isinstance(p, Tau):
        return _eq(p.body, q.body, tol)
    if isinstance(p, Op):
        return (p.vars == q.vars and p.op.dim == q.op.dim
                and superop_equal(p.op, q.op, tol) and _eq(p.body, q.body, tol))
    if isinstance(p, (Input, Output)):
        return p.chan == q.chan and p.var == q.var and _eq(p.body, q.body, tol)
    if isinstance(p, (Sum, Par)):
        return _eq(p.left, q.left, tol) and _eq(p.right, q.right, tol)
    if isinstance(p, Restrict):
        return p.chans == q.chans and _eq(p.body, q.body, tol)
    raise TypeError(f"not a process: {p!r}")
