"""The ten acceptance criteria, each at its stated tolerance and time limit.

Every test prints one ``PASS criterion N: ...`` or ``FAIL criterion N: ...`` line
straight to the terminal (bypassing capture) and fails on a violation.
"""

import math
import time
from contextlib import contextmanager
from importlib import resources

import numpy as np

from qccs import qnum
from qccs.equiv import BISIMILAR, bisim_process, dsb_estimate, expansion_rhs, is_monotone, reduction_bisim
from qccs.gen import LAWS, ProcessGen, law_instance, make_env, split_vars
from qccs.parse import parse_file
from qccs.qnum import QUBIT, QState, apply_superop, named_gate, partial_trace
from qccs.sos import Configuration, replay
from qccs.terms import NIL, Op, Output, Par, Restrict, Sum

from oracles import apply_kraus_ref, trace_distance_ref, unitary_diamond_grid
from props import LEMMAS, congruence_closures, reduction_props

TOL = 1e-9


def corpus(name):
    return parse_file((resources.files("qccs") / "corpus" / name).read_text())


@contextmanager
def criterion(capsys, n, title, limit=None):
    t0 = time.perf_counter()
    detail = ""
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - t0
        detail = f"{elapsed:.2f} s"
        if limit is not None and elapsed >= limit:
            detail += f", over the {limit:g} s limit"
            raise AssertionError(f"criterion {n} took {elapsed:.2f} s (limit {limit:g} s)")
        ok = True
    except AssertionError as e:
        detail = detail or str(e).splitlines()[0]
        raise
    finally:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({detail})")


def marginal(c, names):
    return partial_trace(c.state, names).matrix


def test_criterion_1_bell_pair(capsys):
    with criterion(capsys, 1, "Bell-pair replay", limit=1.0):
        sf = corpus("bell.qccs")
        trace, end = replay(Configuration(sf.process("R"), sf.state("sigma")), sf.env)
        assert [str(a) for a in trace] == ["tau", "CNOT[x,z]"]
        beta = np.array([1, 0, 0, 1]) / math.sqrt(2)
        err = np.max(np.abs(marginal(end, ("x", "z")) - np.outer(beta, beta)))
        assert err <= TOL, f"final state off by {err:.3g}"


def test_criterion_2_measurement(capsys):
    with criterion(capsys, 2, "measurement replay"):
        sf = corpus("bell.qccs")
        trace, end = replay(Configuration(sf.process("S"), sf.state("sigma")), sf.env)
        assert [str(a) for a in trace] == ["tau", "CNOT[x,z]", "M[z]"]
        want = np.diag([0.5, 0, 0, 0.5])
        err = np.max(np.abs(marginal(end, ("x", "z")) - want))
        assert err <= TOL, f"post-measurement state off by {err:.3g}"
        reg = qnum.Register.of({"x": QUBIT, "z": QUBIT})
        beta = np.array([1, 0, 0, 1]) / math.sqrt(2)
        p0 = apply_superop(sf.ops["M0"], ("z",), QState(reg, np.outer(beta, beta))).trace
        assert abs(p0 - 0.5) <= 1e-12, f"branch probability {p0}"


def test_criterion_3_noisy_channel(capsys):
    with criterion(capsys, 3, "noisy-channel replay", limit=1.0):
        sf = corpus("noisy_channel.qccs")
        rho = sf.state("rho")
        t1, end1 = replay(Configuration(sf.process("S"), rho), sf.env)
        t2, end2 = replay(Configuration(sf.process("Sp"), rho), sf.env)
        assert [str(a) for a in t1] == ["tau", "E[x]", "tau"]
        # amplitude damping with gamma = 0.3, written out independently
        g = 0.3
        kraus = [np.array([[1, 0], [0, math.sqrt(1 - g)]]), np.array([[0, math.sqrt(g)], [0, 0]])]
        # each Kraus operator on x, identity on the other register variables
        names = rho.register.names
        full = []
        for k in kraus:
            m = np.eye(1)
            for n in names:
                m = np.kron(m, k if n == "x" else np.eye(rho.register.type_of(n).dim))
            full.append(m)
        want = apply_kraus_ref(full, rho.matrix)
        err = np.max(np.abs(end1.state.matrix - want))
        assert err <= TOL, f"final state off E(rho) x rho' by {err:.3g}"
        rest = [n for n in names if n != "x"]
        assert np.max(np.abs(partial_trace(end1.state, rest).matrix - partial_trace(rho, rest).matrix)) <= TOL
        err2 = np.max(np.abs(end2.state.matrix - end1.state.matrix))
        assert err2 <= TOL, f"system-environment variant differs by {err2:.3g}"


def test_criterion_4_monoid_laws(capsys):
    with criterion(capsys, 4, "monoid-law suite, 9 laws x 100 processes", limit=120):
        env = make_env()
        g = ProcessGen(np.random.default_rng(0), max_depth=4)
        failures = []
        for law in LAWS:
            for k in range(100):
                lhs, rhs = law_instance(g, law, env)
                v = bisim_process(lhs, rhs, env)
                if v.result != BISIMILAR:
                    failures.append(f"{law}#{k}: {v.result}")
        assert not failures, f"{len(failures)} failures, first {failures[:3]}"


def test_criterion_5_expansion_law(capsys):
    with criterion(capsys, 5, "expansion law, 50 instances", limit=120):
        env = make_env()
        g = ProcessGen(np.random.default_rng(1), max_depth=3)
        failures = []
        for k in range(50):
            a, b = split_vars(g.rng, 2)
            p, q = g.process(avail=a), g.process(avail=b)
            chans = frozenset(c for c in ("c", "d") if g.rng.random() < 0.5)
            lhs = Restrict(Par(p, q), chans) if chans else Par(p, q)
            v = bisim_process(lhs, expansion_rhs(p, q, chans, env), env)
            if v.result != BISIMILAR:
                failures.append(f"#{k}: {v.result}")
        assert not failures, f"{len(failures)} failures, first {failures[:3]}"


def test_criterion_6_congruence(capsys):
    with criterion(capsys, 6, "congruence, 50 pairs x 7 closures", limit=180):
        env = make_env()
        g = ProcessGen(np.random.default_rng(2), max_depth=3, free=("x", "y"))
        failures = []
        closures = 0
        for k in range(50):
            if k % 5 == 0:
                p = g.process()
                q = g.alpha_variant(p, env)
            else:
                p, q = law_instance(g, LAWS[k % len(LAWS)], env)
            ctx = congruence_closures(p, q, g, env)
            assert len(ctx) == 7, f"pair {k}: only {sorted(ctx)}"
            for name, (a, b) in ctx.items():
                closures += 1
                v = bisim_process(a, b, env)
                if v.result != BISIMILAR:
                    failures.append(f"#{k} {name}: {v.result}")
        assert closures == 350
        assert not failures, f"{len(failures)} failures, first {failures[:3]}"


def test_criterion_7_sos_meta_lemmas(capsys):
    with criterion(capsys, 7, "SOS meta-lemmas, 500 processes each"):
        failures = []
        for name, fn in sorted(LEMMAS.items()):
            for seed in range(500):
                failures += [f"{name} seed {seed}: {b}" for b in fn(seed)]
        assert not failures, f"{len(failures)} violations, first {failures[:3]}"


def test_criterion_8_reduction(capsys):
    with criterion(capsys, 8, "reduction normal forms and H.H, T.T"):
        failures = []
        for seed in range(500):
            failures += [f"seed {seed}: {b}" for b in reduction_props(seed)]
        assert not failures, f"{len(failures)} violations, first {failures[:3]}"
        env = make_env()
        h, t, s = (named_gate(n) for n in "HTS")
        ident = qnum.identity_superop((QUBIT,))
        v = reduction_bisim(Op(h, ("x",), Op(h, ("x",), NIL)), Op(ident, ("x",), NIL), env)
        assert v.result == BISIMILAR, f"H.H vs I: {v.result}"
        v = reduction_bisim(Op(t, ("x",), Op(t, ("x",), NIL)), Op(s, ("x",), NIL), env)
        assert v.result == BISIMILAR, f"T.T vs S: {v.result}"


def nonexpansive_cases(rng, env, n=20):
    """P, Q differ by one operation prefix; R uses only trace-preserving operations."""
    g = ProcessGen(rng, max_depth=2)
    for k in range(n):
        if k % 2:
            e, f = qnum.amplitude_damping(float(rng.uniform(0, 1))), qnum.amplitude_damping(float(rng.uniform(0, 1)))
        else:
            e, f = named_gate("RZ", float(rng.uniform(0, math.pi))), named_gate("RY", float(rng.uniform(0, 1)))
        p = Op(e.relabel("E"), ("x",), Output("c", "x", NIL))
        q = Op(f.relabel("F"), ("x",), Output("c", "x", NIL))
        r = g.process(avail=frozenset({"y", "z"}))
        ctx = ("sum", "res", "par")[k % 3]
        if ctx == "sum":
            yield ctx, p, q, Sum(p, r), Sum(q, r)
        elif ctx == "res":
            yield ctx, p, q, Restrict(p, frozenset({"c"})), Restrict(q, frozenset({"c"}))
        else:
            yield ctx, p, q, Par(p, r), Par(q, r)


def test_criterion_9_distances(capsys):
    with criterion(capsys, 9, "trace, diamond and bisimulation distances", limit=300):
        zero, plus = qnum.projector(qnum.ket(0)), qnum.projector(np.array([1, 1]) / math.sqrt(2))
        d = qnum.matrix_trace_distance(zero, plus)
        assert abs(d - 0.70711) <= 1e-5 and abs(d - 1 / math.sqrt(2)) <= 1e-9, f"D(|0>,|+>) = {d}"
        assert abs(trace_distance_ref(zero, plus) - d) <= 1e-9
        ident = qnum.identity_superop((QUBIT,))
        dz = qnum.diamond_distance(named_gate("Z"), ident)
        assert 1 - 1e-6 <= dz <= 1, f"D(Z, I) = {dz}"
        ds = qnum.diamond_distance(named_gate("S"), ident)
        ref = unitary_diamond_grid(qnum.gate_matrix("S"))
        assert abs(ds - ref) <= 1e-3 and abs(ds - 0.70711) <= 1e-3, f"D(S, I) = {ds}, oracle {ref}"
        env = make_env()
        traces, failures = [], []
        for k, (ctx, p, q, lhs, rhs) in enumerate(nonexpansive_cases(np.random.default_rng(3), env)):
            base = dsb_estimate(p, q, env)
            wrapped = dsb_estimate(lhs, rhs, env)
            traces += [base.trace, wrapped.trace]
            if not wrapped.hi <= base.hi + 2e-3:
                failures.append(f"#{k} {ctx}: {wrapped.hi} > {base.hi}")
        assert not failures, f"non-expansiveness: {failures[:3]}"
        assert all(is_monotone(t) for t in traces), "lambda-monotonicity violated on a bisection trace"


def test_criterion_10_contractivity(capsys):
    with criterion(capsys, 10, "contractivity, 200 random triples"):
        rng = np.random.default_rng(4)
        worst = -math.inf
        for k in range(200):
            dims = (QUBIT,) if k % 2 else (QUBIT, QUBIT)
            e = qnum.random_channel(dims, rng, n_kraus=int(rng.integers(1, 4)))
            d = e.dim
            r, s = qnum.random_density(d, rng), qnum.random_density(d, rng)
            worst = max(worst, qnum.matrix_trace_distance(e(r), e(s)) - qnum.matrix_trace_distance(r, s))
        assert worst <= 1e-9, f"max excess {worst:.3g}"
