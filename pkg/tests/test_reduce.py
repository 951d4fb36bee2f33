import numpy as np
from hypothesis import given, settings, strategies as st

from qccs import qnum
from qccs.gen import make_env
from qccs.qnum import QUBIT, named_gate, superop_equal
from qccs.reduce import merge_ops, normal_form, proc_equiv, reduce_string
from qccs.terms import NIL, TAU, Op, OpAct, OutAct, Output, Sum, Tau

from props import reduction_props

H, X, T, S = (named_gate(g) for g in "HXTS")
I1 = qnum.identity_superop((QUBIT,))
AD = qnum.amplitude_damping(0.3)


def test_hh_string():
    (e,) = reduce_string([OpAct(H, ("x",)), OpAct(H, ("x",))])
    assert e.vars == ("x",) and superop_equal(e.op, I1)


def test_string_without_ops():
    t = [TAU, OutAct("c", "x")]
    assert reduce_string(t) == t


def test_disjoint_ops_merge_to_product():
    (e,) = reduce_string([OpAct(AD, ("x",)), OpAct(X, ("y",))])
    assert e.vars == ("x", "y")
    assert superop_equal(e.op, qnum.SuperOp((QUBIT, QUBIT), tuple(np.kron(k, X.kraus[0]) for k in AD.kraus)))


def test_merge_order_and_sorting():
    # X on y first, then CNOT with control y: |x=0,y=0> -> |0,1> -> |1,1>
    e = merge_ops([OpAct(X, ("y",)), OpAct(named_gate("CNOT"), ("y", "x"))])
    assert e.vars == ("x", "y")
    out = e.op(qnum.projector([1, 0, 0, 0]))
    assert np.allclose(out, qnum.projector([0, 0, 0, 1]))


def test_string_runs_split_by_other_actions():
    t = reduce_string([OpAct(H, ("x",)), TAU, OpAct(T, ("x",)), OpAct(T, ("x",)), OutAct("c", "x")])
    assert [type(a) for a in t] == [OpAct, type(TAU), OpAct, OutAct]
    assert superop_equal(t[2].op, S)


def test_normal_form_examples():
    env = make_env()
    nf = normal_form(Op(H, ("x",), Op(H, ("x",), NIL)), env)
    assert isinstance(nf, Op) and nf.body == NIL and superop_equal(nf.op, I1)
    assert normal_form(NIL, env) == NIL
    p = Sum(Op(AD, ("x",), Op(T, ("x",), NIL)), Output("c", "y", NIL))
    nf = normal_form(p, env)
    assert isinstance(nf, Sum) and nf.right == Output("c", "y", NIL)
    assert superop_equal(nf.left.op, qnum.superop_compose(T, AD))


def test_ops_not_commuted_past_tau():
    env = make_env()
    p = Op(H, ("x",), Tau(Op(H, ("x",), NIL)))
    assert normal_form(p, env) == p


@settings(max_examples=500, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_normal_form_idempotent_and_confluent(seed):
    assert reduction_props(seed) == []


def test_proc_equiv_uses_choi():
    env = make_env()
    minus_h = qnum.SuperOp((QUBIT,), (-H.kraus[0],), "H")
    assert proc_equiv(Op(H, ("x",), NIL), Op(minus_h, ("x",), NIL), env)
    assert not proc_equiv(Op(H, ("x",), NIL), Op(X, ("x",), NIL), env)
    assert not proc_equiv(Op(H, ("x",), NIL), Op(H, ("y",), NIL), env)
