"""Bisimulation games and distance estimators.

Strong bisimilarity, reduction-bisimilarity and the approximate lambda
variant are decided by the same game.  Each pair of processes carries a
list of obligations (one per move of either side), each obligation a list of
candidate answers, each answer a list of successor pairs that must all hold.
Pairs cut off by the depth or size bound count as related, so refutations
stay exact while confirmations that touched the bound become "unknown".

Transitions never depend on the quantum state (only successor states do) and
the relation matches actions, not states, so the game runs on canonical
process pairs and its verdict is shared by every state of a suite.
"""

from __future__ import annotations

import json
import math
import sys
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import qnum
from .qnum import QState, SuperOp, TOL_CHANNEL, diamond_distance, same_space, superop_equal
from .reduce import normal_form
from .sos import Configuration, InputStep, Step, canonical_op, steps
from .terms import (
    Action, Env, InAct, Input, Op, OpAct, Output, Process, Restrict, Tau, TauAct, canonical, fv, summation,
    Par,
)

BISIMILAR = "bisimilar"
NOT_BISIMILAR = "not_bisimilar"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class GameOptions:
    depth: int = 64
    tol: float = TOL_CHANNEL
    lam: float = 0.0
    budget: int = 8
    slack: float = 1e-6
    nf: bool = False
    states: Mapping[str, QState] | Sequence[QState] = ()
    n_product: int = 25
    n_entangled: int = 10
    seed: int = 0
    max_pairs: int = 20_000
    width: float = 1e-3
    fresh_per_type: int | None = None
    one_input_rep: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.tol <= 0 or self.slack < 0 or self.width <= 0:
            raise ValueError("tolerances must be positive")
        if self.depth < 0:
            raise ValueError("depth bound must be non-negative")


@dataclass
class Verdict:
    result: str
    witness: list[dict] | None = None
    suite_size: int = 1
    bounds_hit: bool = False
    lam: float | None = None
    notes: list[str] = field(default_factory=list)
    state: str | None = None

    @property
    def positive(self) -> bool:
        return self.result == BISIMILAR

    def to_dict(self) -> dict:
        d = {"result": self.result, "suite_size": self.suite_size, "bounds_hit": self.bounds_hit}
        if self.lam is not None:
            d["lambda"] = self.lam
        if self.witness is not None:
            d["witness"] = self.witness
        if self.state is not None:
            d["state"] = self.state
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class Interval:
    lo: float
    hi: float
    trace: list[tuple[float, str]] = field(default_factory=list)
    suite_size: int = 0
    upper_bound: bool = False
    notes: list[str] = field(default_factory=list)
    kind: str = "sb"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "interval": [self.lo, "inf" if math.isinf(self.hi) else self.hi],
            "trace": [{"lambda": lam, "result": r} for lam, r in self.trace],
            "suite_size": self.suite_size,
            "upper_bound": self.upper_bound,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- the game ------------------------------------------------------------------


@dataclass
class _Obligation:
    side: str
    action: Action
    # each candidate: (answering action, successor pairs, instantiated attacker action per pair)
    cands: list[tuple[Action, list[tuple], list[Action]]]


class _Restart(Exception):
    pass


class _Game:
    """On-the-fly game over canonical process pairs.

    A depth-first search assumes a pair related while it is being checked and
    tries one candidate answer at a time.  Refutations found this way are sound
    (assumptions only make refuting harder) and are kept for good; if a refuted
    pair had been used as an assumption, the search restarts.  A run that ends
    without such a restart has built a bisimulation out of the pairs it marked.
    """

    def __init__(self, env: Env, opts: GameOptions, lam: float):
        self.env = env
        self.opts = opts
        self.lam = lam
        self.dd_cache: dict = {}
        self.refuted: dict = {}  # pair -> (time, failing obligation)
        self.obl_cache: dict = {}
        self.canon_cache: dict = {}
        self.match_cache: dict = {}
        self.leaf_cache: dict = {}
        self.memo: dict = {}
        self.clock = 0

    def op_match(self, a: OpAct, b: OpAct) -> bool:
        a, b = canonical_op(a), canonical_op(b)
        if a.vars != b.vars or [t.dim for t in a.op.domain] != [t.dim for t in b.op.domain]:
            return False
        if superop_equal(a.op, b.op, self.opts.tol):
            return True
        if self.lam <= 0:
            return False
        return self.diamond(a.op, b.op) <= self.lam + self.opts.slack

    def diamond(self, e: SuperOp, f: SuperOp) -> float:
        k = (e, f)
        v = self.dd_cache.get(k)
        if v is None:
            v = diamond_distance(e, f, budget=self.opts.budget, seed=self.opts.seed)
            self.dd_cache[k] = v
            self.dd_cache[(f, e)] = v
        return v

    def match(self, a: Action, b: Action) -> bool:
        if isinstance(a, OpAct):
            if not isinstance(b, OpAct):
                return False
            k = (a, b)
            hit = self.match_cache.get(k)
            if hit is None:
                hit = self.match_cache[k] = self.op_match(a, b)
            return hit
        return a == b

    def _canon(self, p: Process) -> Process:
        c = self.canon_cache.get(p)
        if c is None:
            c = self.canon_cache[p] = canonical(p, self.env)
        return c

    def _leaves(self, p: Process) -> Counter:
        hit = self.leaf_cache.get(p)
        if hit is None:
            hit = Counter()
            todo = [p]
            while todo:
                t = todo.pop()
                if isinstance(t, Par):
                    todo += [t.left, t.right]
                else:
                    hit[canonical(t, self.env)] += 1
            self.leaf_cache[p] = hit
        return hit

    def _overlap(self, pair) -> int:
        if pair[0] == pair[1]:
            return 1 << 20
        return sum((self._leaves(pair[0]) & self._leaves(pair[1])).values())

    def obligations(self, pair, reg) -> list[_Obligation]:
        hit = self.obl_cache.get(pair)
        if hit is not None:
            return hit
        env, opts = self.env, self.opts
        p, q = pair
        sp, sq = steps(p, env, opts.nf), steps(q, env, opts.nf)
        fvs = fv(p) | fv(q)
        out: list[_Obligation] = []
        for side, sx, sy in (("left", sp, sq), ("right", sq, sp)):
            def orient(u, v):
                u, v = self._canon(u), self._canon(v)
                return (u, v) if side == "left" else (v, u)

            for s in sx:
                if isinstance(s, InputStep):
                    continue
                cands = [(t.action, [orient(s.target, t.target)], [s.action])
                         for t in sy if isinstance(t, Step) and self.match(s.action, t.action)]
                out.append(_Obligation(side, s.action, cands))
            for s in sx:
                if not isinstance(s, InputStep):
                    continue
                t = env.var_type(s.var)
                xs = [n for n, tt in reg.vars if same_space(tt, t) and n not in fvs]
                if not xs:
                    continue  # no variable satisfies the side condition: clause is vacuous
                cands = []
                for s2 in sy:
                    if not isinstance(s2, InputStep) or s2.chan != s.chan or not same_space(env.var_type(s2.var), t):
                        continue
                    forb = s.forbidden | s2.forbidden
                    ys = [n for n, tt in reg.vars if same_space(tt, t) and n not in forb]
                    if opts.one_input_rep:
                        # names outside both forbidden sets are interchangeable by a swap renaming
                        ys = ys[:1]
                    succ = [orient(s.instantiate(y, env), s2.instantiate(y, env)) for y in ys]
                    cands.append((InAct(s2.chan, xs[0]), succ, [InAct(s.chan, y) for y in ys]))
                out.append(_Obligation(side, InAct(s.chan, xs[0]), cands))
        self.obl_cache[pair] = out
        return out

    def solve(self, c1: Configuration, c2: Configuration) -> Verdict:
        """Verdict for two configurations; transitions ignore the state, so it is memoized per process pair."""
        if c1.register.vars != c2.register.vars:
            raise ValueError("register mismatch: configurations range over different variables")
        reg = c1.register
        root = (self._canon(c1.process), self._canon(c2.process))
        k = (root, reg.vars)
        v = self.memo.get(k)
        if v is None:
            v = self.memo[k] = self._solve(root, reg)
        return replace(v, witness=None if v.witness is None else list(v.witness), notes=list(v.notes))

    def _solve(self, root, reg) -> Verdict:
        opts = self.opts
        limit = max(sys.getrecursionlimit(), 4 * opts.depth + 500)
        sys.setrecursionlimit(limit)
        while True:
            good: set = set()
            on_stack: set = set()
            leaned_on: set = set()
            stats = {"frontier": False, "explored": 0, "deepest": 0}

            def check(pair, d: int) -> bool:
                if pair[0] == pair[1]:
                    return True
                if pair in self.refuted:
                    return False
                if pair in good:
                    if pair in on_stack:
                        leaned_on.add(pair)
                    return True
                if d >= opts.depth or stats["explored"] >= opts.max_pairs:
                    stats["frontier"] = True
                    stats["deepest"] = max(stats["deepest"], d)
                    return True
                stats["explored"] += 1
                good.add(pair)
                on_stack.add(pair)
                try:
                    for o in self.obligations(pair, reg):
                        cands = o.cands
                        if len(cands) > 1:
                            # settled answers first, then those sharing the most parallel components
                            cands = sorted(cands, key=lambda c: (
                                not all(s[0] == s[1] or s in good for s in c[1]),
                                -sum(self._overlap(s) for s in c[1])))
                        if not any(all(check(s, d + 1) for s in succ) for _, succ, _ in cands):
                            good.discard(pair)
                            self.clock += 1
                            self.refuted[pair] = (self.clock, o)
                            if pair in leaned_on:
                                raise _Restart
                            return False
                    return True
                finally:
                    on_stack.discard(pair)

            try:
                ok = check(root, 0)
            except _Restart:
                continue
            if not ok:
                return Verdict(NOT_BISIMILAR, witness=self._witness(root), bounds_hit=stats["frontier"])
            if not stats["frontier"]:
                return Verdict(BISIMILAR)
            return Verdict(UNKNOWN, bounds_hit=True,
                           notes=[f"undecided after exploring {stats['explored']} pairs "
                                  f"to depth {stats['deepest']}"])

    def _witness(self, root) -> list[dict]:
        out = []
        pair = root
        while pair in self.refuted:
            t, o = self.refuted[pair]
            if not o.cands:
                out.append({"side": o.side, "action": str(o.action)})
                break
            other = "right" if o.side == "left" else "left"
            bct, succ, acts = o.cands[0]
            k = min((k for k, s in enumerate(succ) if s in self.refuted and self.refuted[s][0] < t),
                    key=lambda k: self.refuted[succ[k]][0])
            attack = acts[k]
            answer = bct if not isinstance(bct, InAct) else InAct(bct.chan, attack.var)
            out.append({"side": o.side, "action": str(attack)})
            out.append({"side": other, "action": str(answer)})
            pair = succ[k]
        return out


# -- configuration level -------------------------------------------------------


def bisim_config(c1: Configuration, c2: Configuration, env: Env, opts: GameOptions = GameOptions()) -> Verdict:
    """Decide strong bisimilarity of two configurations (unknown only when a bound bites)."""
    return _Game(env, opts, 0.0).solve(c1, c2)


def lambda_bisim_config(c1: Configuration, c2: Configuration, lam: float, env: Env,
                        opts: GameOptions = GameOptions()) -> Verdict:
    """Strong lambda-bisimilarity: Op moves may be answered within diamond distance lambda."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    v = _Game(env, opts, lam).solve(c1, c2)
    v.lam = lam
    return v


# -- process level -------------------------------------------------------------


def state_suite(env: Env, opts: GameOptions) -> list[tuple[str, QState]]:
    """User states followed by seeded random product and entangled states on the active register."""
    if opts.fresh_per_type is not None:
        env.fresh_per_type = opts.fresh_per_type
    reg = env.register()
    out: list[tuple[str, QState]] = []
    user = opts.states.items() if isinstance(opts.states, Mapping) else (
        (f"state{i}", s) for i, s in enumerate(opts.states))
    for name, s in user:
        if s.register.vars != reg.vars:
            raise ValueError(f"state {name} is over {s.register.names}, register is {reg.names}")
        out.append((name, s))
    rng = np.random.default_rng(opts.seed)
    for k in range(opts.n_product):
        parts = {(n,): qnum.projector(qnum.random_pure(t.dim, rng)) for n, t in reg.vars}
        out.append((f"product{k}", QState.product(reg, parts)))
    for k in range(opts.n_entangled):
        out.append((f"entangled{k}", QState(reg, qnum.projector(qnum.random_pure(reg.dim, rng)))))
    if not out:
        raise ValueError("empty state suite")
    return out


def _over_suite(p: Process, q: Process, env: Env, opts: GameOptions, lam: float | None) -> Verdict:
    suite = state_suite(env, opts)
    game = _Game(env, opts, lam or 0.0)
    bounds = False
    unknown: Verdict | None = None
    for name, rho in suite:
        v = game.solve(Configuration(p, rho), Configuration(q, rho))
        bounds = bounds or v.bounds_hit
        if v.result == NOT_BISIMILAR:
            v.suite_size, v.state, v.lam = len(suite), name, lam
            v.bounds_hit = bounds
            return v
        if v.result == UNKNOWN and unknown is None:
            unknown = v
            unknown.state = name
    if unknown is not None:
        unknown.suite_size, unknown.lam, unknown.bounds_hit = len(suite), lam, True
        return unknown
    return Verdict(BISIMILAR, suite_size=len(suite), bounds_hit=bounds, lam=lam,
                   notes=[f"over {len(suite)} tested states"])


def bisim_process(p: Process, q: Process, env: Env, opts: GameOptions = GameOptions()) -> Verdict:
    """Semi-decide P ~ Q: refutations are exact, confirmations hold over the tested states."""
    return _over_suite(p, q, env, opts, None)


def lambda_bisim_process(p: Process, q: Process, lam: float, env: Env, opts: GameOptions = GameOptions()) -> Verdict:
    return _over_suite(p, q, env, opts, lam)


def reduction_bisim(p: Process, q: Process, env: Env, opts: GameOptions = GameOptions()) -> Verdict:
    """Sound check of reduction-bisimilarity through normal forms and on-the-fly reduction."""
    v = bisim_process(normal_form(p, env), normal_form(q, env), env, replace(opts, nf=True))
    if v.result == NOT_BISIMILAR:
        v.notes.append("normal forms are not bisimilar; the transitive closure may still relate them")
    return v


def expansion_rhs(p: Process, q: Process, chans: frozenset[str] | set[str], env: Env) -> Process:
    """Sum of first-step derivatives of ``(p || q)\\L``, one prefixed summand per transition."""
    from .terms import has_constants
    if has_constants(p) or has_constants(q):
        raise ValueError("expansion needs finite processes without constants")
    chans = frozenset(chans)
    whole: Process = Par(p, q)
    if chans:
        whole = Restrict(whole, chans)
    summands = []
    for s in steps(whole, env):
        if isinstance(s, InputStep):
            summands.append(Input(s.chan, s.var, s.template))
            continue
        a = s.action
        if isinstance(a, TauAct):
            summands.append(Tau(s.target))
        elif isinstance(a, OpAct):
            summands.append(Op(a.op, a.vars, s.target))
        else:
            summands.append(Output(a.chan, a.var, s.target))
    return summation(summands)


# -- distances -----------------------------------------------------------------


def dsb_estimate(p: Process, q: Process, env: Env, opts: GameOptions = GameOptions()) -> Interval:
    """Bracket the strong bisimulation distance by bisection on lambda over [0, 1]."""
    suite = len(state_suite(env, opts))
    trace: list[tuple[float, str]] = []
    notes: list[str] = []

    def test(lam: float) -> str:
        r = lambda_bisim_process(p, q, lam, env, opts).result
        trace.append((lam, r))
        return r

    if test(0.0) == BISIMILAR:
        return Interval(0.0, 0.0, trace, suite)
    r1 = test(1.0)
    if r1 == NOT_BISIMILAR:
        return Interval(1.0, math.inf, trace, suite, notes=["not lambda-bisimilar for any lambda <= 1"])
    if r1 == UNKNOWN:
        return Interval(0.0, math.inf, trace, suite, notes=["game undecided at lambda = 1"])
    lo, hi = 0.0, 1.0
    while hi - lo > opts.width:
        mid = (lo + hi) / 2
        r = test(mid)
        if r == BISIMILAR:
            hi = mid
        else:
            if r == UNKNOWN:
                notes.append(f"undecided at lambda = {mid:.6g}; treated as refuted")
            lo = mid
    notes.append("D_sb bracket relative to the tested states; diamond distances are estimator lower bounds")
    return Interval(lo, hi, trace, suite, notes=notes)


def dsrb_estimate(p: Process, q: Process, env: Env, opts: GameOptions = GameOptions()) -> Interval:
    """Upper bound on the reduction-bisimulation distance via normal forms."""
    iv = dsb_estimate(normal_form(p, env), normal_form(q, env), env, replace(opts, nf=True))
    iv.upper_bound = True
    iv.kind = "srb"
    iv.notes.append("computed on normal forms: an upper bound on D_srb")
    return iv


def is_monotone(trace: Sequence[tuple[float, str]]) -> bool:
    """Acceptance never flips back to refusal as lambda grows."""
    accepted = [lam for lam, r in trace if r == BISIMILAR]
    refused = [lam for lam, r in trace if r == NOT_BISIMILAR]
    return not accepted or not refused or max(refused) < min(accepted)
