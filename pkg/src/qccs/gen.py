"""Seeded generators of well-formed finite processes, used by the property suites and selftest."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qnum
from .qnum import QUBIT, SuperOp
from .terms import (
    NIL, Env, Input, Op, Output, Par, Process, Restrict, Subst, Sum, Tau, canonical, fv, subst_apply,
)

FREE_VARS = ("x", "y", "z")
BINDERS = ("u", "v", "w")
CHANNELS = ("c", "d")
SPARE_CHANNEL = "e"  # declared but never produced by the generator


def default_ops() -> list[SuperOp]:
    ops = [qnum.named_gate(g) for g in ("H", "X", "Z", "S", "T", "CNOT")]
    ops.append(qnum.measurement_superop(qnum.computational_measurement(), "total", label="M"))
    ops.append(qnum.amplitude_damping(0.3).relabel("AD"))
    return ops


def make_env() -> Env:
    """Three free qubits, three binder names and two channels."""
    env = Env()
    for x in FREE_VARS:
        env.declare(x, QUBIT)
    for b in BINDERS:
        env.binder_types[b] = QUBIT
    env.channels.update(CHANNELS)
    env.channels.add(SPARE_CHANNEL)
    return env


@dataclass
class ProcessGen:
    """Random finite processes; every output respects the no-cloning side conditions."""

    rng: np.random.Generator
    max_depth: int = 4
    ops: list[SuperOp] = field(default_factory=default_ops)
    free: tuple[str, ...] = FREE_VARS

    def process(self, depth: int | None = None, avail: frozenset[str] | None = None) -> Process:
        depth = self.max_depth if depth is None else depth
        avail = frozenset(self.free) if avail is None else avail
        return self._gen(depth, avail, frozenset())

    def _gen(self, depth: int, avail: frozenset[str], bound: frozenset[str]) -> Process:
        r = self.rng
        if depth <= 0:
            return NIL
        kinds = ["nil", "tau", "op", "out", "in", "sum", "par", "res"]
        weights = np.array([1, 2, 3, 3, 3, 2, 2, 1], dtype=float)
        k = kinds[r.choice(len(kinds), p=weights / weights.sum())]
        pool = sorted(avail)
        if k == "tau":
            return Tau(self._gen(depth - 1, avail, bound))
        if k == "op":
            cands = [e for e in self.ops if e.arity <= len(pool)]
            if not cands:
                return Tau(self._gen(depth - 1, avail, bound))
            e = cands[r.integers(len(cands))]
            xs = tuple(r.choice(pool, size=e.arity, replace=False).tolist())
            return Op(e, xs, self._gen(depth - 1, avail, bound))
        if k == "out":
            if not pool:
                return NIL
            x = pool[r.integers(len(pool))]
            c = CHANNELS[r.integers(len(CHANNELS))]
            return Output(c, x, self._gen(depth - 1, avail - {x}, bound))
        if k == "in":
            free_b = [b for b in BINDERS if b not in bound]
            if not free_b:
                return Tau(self._gen(depth - 1, avail, bound))
            b = free_b[r.integers(len(free_b))]
            c = CHANNELS[r.integers(len(CHANNELS))]
            return Input(c, b, self._gen(depth - 1, avail | {b}, bound | {b}))
        if k == "sum":
            return Sum(self._gen(depth - 1, avail, bound), self._gen(depth - 1, avail, bound))
        if k == "par":
            mask = r.integers(2, size=len(pool)).astype(bool) if pool else np.zeros(0, bool)
            left = frozenset(v for v, m in zip(pool, mask) if m)
            return Par(self._gen(depth - 1, left, bound), self._gen(depth - 1, avail - left, bound))
        if k == "res":
            n = int(r.integers(1, len(CHANNELS) + 1))
            chans = frozenset(r.choice(CHANNELS, size=n, replace=False).tolist())
            return Restrict(self._gen(depth - 1, avail, bound), chans)
        return NIL

    def substitution(self, p: Process, env: Env) -> Subst:
        """A random injective renaming under which ``p`` has no variable conflict."""
        r = self.rng
        names = list(env.register().names)
        free = sorted(fv(p))
        targets = [n for n in names if n not in free]
        r.shuffle(targets)
        pairs = {}
        for x in free:
            if targets and r.random() < 0.6:
                pairs[x] = targets.pop()
        return Subst(pairs, env)

    def alpha_variant(self, p: Process, env: Env) -> Process:
        """Rename every input binder to an unused name, keeping the term alpha-equivalent."""
        spare = iter([f"{b}{k}" for k in range(1, 100) for b in BINDERS])

        def go(t: Process) -> Process:
            if isinstance(t, Input):
                y = next(spare)
                env.binder_types.setdefault(y, env.var_type(t.var))
                body = subst_apply(t.body, Subst({t.var: y}), env, check=False)
                return Input(t.chan, y, go(body))
            for cls, attrs in ((Tau, ("body",)), (Op, ("body",)), (Output, ("body",)), (Restrict, ("body",))):
                if isinstance(t, cls):
                    return _with(t, body=go(t.body))
            if isinstance(t, (Sum, Par)):
                return type(t)(go(t.left), go(t.right))
            return t

        q = go(p)
        assert canonical(q, env) == canonical(p, env)
        return q


LAWS = ("sum_comm", "sum_assoc", "sum_idem", "sum_nil", "par_comm", "par_assoc", "par_nil", "res_unused", "res_res")


def split_vars(rng: np.random.Generator, parts: int, names: tuple[str, ...] = FREE_VARS) -> list[frozenset[str]]:
    """Partition ``names`` into ``parts`` disjoint (possibly empty) sets."""
    idx = rng.integers(parts, size=len(names))
    return [frozenset(n for n, i in zip(names, idx) if i == k) for k in range(parts)]


def law_instance(g: ProcessGen, law: str, env: Env) -> tuple[Process, Process]:
    """A random pair (lhs, rhs) for one of the nine monoid and static laws."""
    from .terms import cn
    r = g.rng
    if law in ("par_comm", "par_assoc"):
        parts = split_vars(r, 2 if law == "par_comm" else 3, g.free)
        ps = [g.process(avail=a) for a in parts]
    else:
        ps = [g.process() for _ in range(3)]
    p, q, s = ps + [None] * (3 - len(ps))
    if law == "sum_comm":
        return Sum(p, q), Sum(q, p)
    if law == "sum_assoc":
        return Sum(p, Sum(q, s)), Sum(Sum(p, q), s)
    if law == "sum_idem":
        return Sum(p, p), p
    if law == "sum_nil":
        return Sum(p, NIL), p
    if law == "par_comm":
        return Par(p, q), Par(q, p)
    if law == "par_assoc":
        return Par(p, Par(q, s)), Par(Par(p, q), s)
    if law == "par_nil":
        return Par(p, NIL), p
    if law == "res_unused":
        unused = sorted(env.channels - cn(p, env))
        k = int(r.integers(1, len(unused) + 1))
        chans = frozenset(r.choice(unused, size=k, replace=False).tolist())
        return Restrict(p, chans), p
    if law == "res_res":
        chans = sorted(env.channels)
        k1 = frozenset(r.choice(chans, size=int(r.integers(1, 3)), replace=False).tolist())
        k2 = frozenset(r.choice(chans, size=int(r.integers(1, 3)), replace=False).tolist())
        return Restrict(Restrict(p, k1), k2), Restrict(p, k1 | k2)
    raise ValueError(f"unknown law {law!r}")


def _with(t, **kw):
    from dataclasses import replace
    return replace(t, **kw)
