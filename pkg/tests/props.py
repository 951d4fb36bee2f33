"""Property checks shared by the unit suites and the acceptance run; each returns a list of violations."""

from __future__ import annotations

import numpy as np

from qccs import qnum
from qccs.gen import ProcessGen, make_env
from qccs.qnum import QState, apply_superop, rename_state
from qccs.reduce import normal_form, one_step_reductions, proc_equiv
from qccs.sos import Configuration, enabled
from qccs.terms import InAct, Input, Op, OpAct, Output, Par, Restrict, Sum, Tau, alpha_eq, bv_action, fv, fv_action, rename_action, subst_apply


def gen(seed, depth=4):
    return ProcessGen(np.random.default_rng(seed), max_depth=depth)


def ground(env):
    return QState.product(env.register(), {})


def random_state(env, rng):
    reg = env.register()
    return QState(reg, qnum.random_density(reg.dim, rng))


def _state_eq(a, b):
    return a.register.names == b.register.names and np.max(np.abs(a.matrix - b.matrix)) <= 1e-12


def action_lemma(seed) -> list[str]:
    """Transitions are state-independent; only Op moves change the state, by applying the operation."""
    env = make_env()
    rng = np.random.default_rng(seed)
    p = gen(seed).process()
    rho, sigma = random_state(env, rng), random_state(env, rng)
    m1 = enabled(Configuration(p, rho), env)
    m2 = enabled(Configuration(p, sigma), env)
    bad = []
    if [(a, c.process) for a, c in m1] != [(a, c.process) for a, c in m2]:
        bad.append("moves depend on the state")
    for (a, c), (_, c2) in zip(m1, m2):
        if isinstance(a, OpAct):
            for got, s in ((c, rho), (c2, sigma)):
                if np.max(np.abs(got.state.matrix - apply_superop(a.op, a.vars, s).matrix)) > 1e-12:
                    bad.append(f"{a}: wrong successor state")
        elif c.state is not rho or c2.state is not sigma:
            bad.append(f"{a}: state changed")
    return bad


def var_lemma(seed) -> list[str]:
    """Free variables of the residual and the action stay within those of the source.

    The disjointness of fv(action) and fv(residual) holds for every action but
    operations, which may act on a variable the continuation keeps using.
    """
    env = make_env()
    p = gen(seed).process()
    bad = []
    for a, c in enabled(Configuration(p, ground(env)), env):
        fa, fp, fq = fv_action(a), fv(p), fv(c.process)
        b = bv_action(a)
        if not fq <= fp | ({b} if b else set()):
            bad.append(f"{a}: residual gained {sorted(fq - fp)}")
        if not fa <= fp:
            bad.append(f"{a}: action uses {sorted(fa - fp)}")
        if not isinstance(a, OpAct) and fa & fq:
            bad.append(f"{a}: residual keeps {sorted(fa & fq)}")
    return bad


def input_lemma(seed) -> list[str]:
    """An input into x can be redone into any other admissible y, with the residual renamed."""
    env = make_env()
    p = gen(seed).process()
    moves = enabled(Configuration(p, ground(env)), env)
    bad = []
    for a, c in moves:
        if not isinstance(a, InAct):
            continue
        for y in env.register().names:
            if y in fv(p) or y == a.var:
                continue
            want = subst_apply(c.process, {a.var: y}, env)
            if not any(b == InAct(a.chan, y) and alpha_eq(d.process, want, env) for b, d in moves):
                bad.append(f"{a}: no matching input into {y}")
    return bad


def alpha_lemma(seed) -> list[str]:
    """Alpha-equivalent processes have the same moves up to alpha-equivalent residuals."""
    env = make_env()
    g = gen(seed)
    p1 = g.process()
    p2 = g.alpha_variant(p1, env)
    rho = ground(env)
    m1 = enabled(Configuration(p1, rho), env)
    m2 = enabled(Configuration(p2, rho), env)
    bad = []
    for a, c in m1:
        if isinstance(a, InAct) and a.var in fv(p2):
            continue
        if not any(b == a and alpha_eq(d.process, c.process, env) for b, d in m2):
            bad.append(f"{a}: unmatched in the variant")
    if len(m1) != len(m2):
        bad.append("different number of moves")
    return bad


def _renamed(seed):
    env = make_env()
    rng = np.random.default_rng(seed)
    g = gen(seed)
    p = g.process()
    f = g.substitution(p, env)
    rho = random_state(env, rng)
    return env, f, p, subst_apply(p, f, env), rho, rename_state(rho, f.map)


def sub1_lemma(seed) -> list[str]:
    """Every move of <P, rho> has a renamed counterpart from <Pf, rho f>."""
    env, f, p, pf, rho, frho = _renamed(seed)
    image = enabled(Configuration(pf, frho), env)
    bad = []
    for a, c in enabled(Configuration(p, rho), env):
        b = bv_action(a)
        if b is not None and f(b) != b:
            continue
        fa = rename_action(a, f)
        want = subst_apply(c.process, f, env)
        fs = rename_state(c.state, f.map)
        if not any(x == fa and alpha_eq(d.process, want, env) and _state_eq(d.state, fs) for x, d in image):
            bad.append(f"{a}: no image under {f}")
    return bad


def sub2_lemma(seed) -> list[str]:
    """Every move of <Pf, rho f> comes from a move of <P, rho>."""
    env, f, p, pf, rho, frho = _renamed(seed)
    pre = enabled(Configuration(p, rho), env)
    bad = []
    for a, c in enabled(Configuration(pf, frho), env):
        b = bv_action(a)
        if b is not None and f(b) != b:
            continue
        if not any(
            rename_action(beta, f) == a
            and alpha_eq(c.process, subst_apply(d.process, f, env), env)
            and _state_eq(c.state, rename_state(d.state, f.map))
            for beta, d in pre
        ):
            bad.append(f"{a}: no preimage under {f}")
    return bad


LEMMAS = {
    "action": action_lemma, "var": var_lemma, "input": input_lemma,
    "alpha": alpha_lemma, "sub1": sub1_lemma, "sub2": sub2_lemma,
}


def has_adjacent_ops(p) -> bool:
    if isinstance(p, Op):
        return isinstance(p.body, Op) or has_adjacent_ops(p.body)
    for attr in ("body", "left", "right"):
        sub = getattr(p, attr, None)
        if sub is not None and has_adjacent_ops(sub):
            return True
    return False


def reduction_props(seed) -> list[str]:
    """Normal forms have no adjacent operations, are idempotent, and every one-step reduct shares them."""
    env = make_env()
    p = ProcessGen(np.random.default_rng(seed)).process()
    nf = normal_form(p, env)
    bad = []
    if has_adjacent_ops(nf):
        bad.append("normal form has adjacent operations")
    if not proc_equiv(normal_form(nf, env), nf, env):
        bad.append("normal form not idempotent")
    for q in one_step_reductions(p):
        if not proc_equiv(normal_form(q, env), nf, env):
            bad.append("one-step reduct has a different normal form")
    return bad


def congruence_closures(p, q, g, env):
    """Seven constructor contexts applied to both sides."""
    used = fv(p) | fv(q)
    spare = sorted(set(env.register().names) - used - {n for n in env.register().names if n.startswith("#")})
    x = spare[0] if spare else None
    r = g.process(avail=frozenset(spare))
    e = g.ops[int(g.rng.integers(len(g.ops)))]
    xs = tuple(g.rng.choice(["x", "y", "z"], size=e.arity, replace=False).tolist())
    binder = sorted(used)[0] if used else "u"
    out = {
        "tau": (Tau(p), Tau(q)),
        "op": (Op(e, xs, p), Op(e, xs, q)),
        "input": (Input("c", binder, p), Input("c", binder, q)),
        "sum": (Sum(p, r), Sum(q, r)),
        "par": (Par(p, r), Par(q, r)),
        "res": (Restrict(p, frozenset({"c"})), Restrict(q, frozenset({"c"}))),
    }
    if x is not None:
        out["output"] = (Output("d", x, p), Output("d", x, q))
    return out
