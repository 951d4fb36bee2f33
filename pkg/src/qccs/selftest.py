"""Replays of the bundled examples plus short law suites, reported one line per check."""

from __future__ import annotations

import math
from typing import Callable, TextIO

import numpy as np

from . import qnum
from .equiv import BISIMILAR, NOT_BISIMILAR, GameOptions, bisim_process, reduction_bisim
from .gen import LAWS, ProcessGen, law_instance, make_env
from .parse import SourceFile, parse_file
from .qnum import QState, apply_superop, partial_trace
from .sos import Configuration, replay

TOL = 1e-9


def _corpus() -> dict[str, SourceFile]:
    from .cli import corpus_files
    return {name: parse_file(text) for name, text in corpus_files()}


def _marginal(c: Configuration, names) -> np.ndarray:
    return partial_trace(c.state, names).matrix


def check_bell(sf: SourceFile) -> str | None:
    trace, end = replay(Configuration(sf.process("R"), sf.state("sigma")), sf.env)
    if [str(a) for a in trace] != ["tau", "CNOT[x,z]"]:
        return f"trace {[str(a) for a in trace]}"
    want = qnum.projector(qnum.BELL["bell00"])
    err = np.max(np.abs(_marginal(end, ("x", "z")) - want))
    return None if err <= TOL else f"final state off by {err:.3g}"


def check_measurement(sf: SourceFile) -> str | None:
    trace, end = replay(Configuration(sf.process("S"), sf.state("sigma")), sf.env)
    if [str(a) for a in trace] != ["tau", "CNOT[x,z]", "M[z]"]:
        return f"trace {[str(a) for a in trace]}"
    want = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    err = np.max(np.abs(_marginal(end, ("x", "z")) - want))
    if err > TOL:
        return f"post-measurement state off by {err:.3g}"
    reg = qnum.Register.of({"x": qnum.QUBIT, "z": qnum.QUBIT})
    beta = QState(reg, qnum.projector(qnum.BELL["bell00"]))
    p0 = apply_superop(sf.ops["M0"], ("z",), beta).trace
    return None if abs(p0 - 0.5) <= 1e-12 else f"branch probability {p0}"


def check_noisy_channel(sf: SourceFile) -> str | None:
    rho = sf.state("rho")
    t1, end1 = replay(Configuration(sf.process("S"), rho), sf.env)
    t2, end2 = replay(Configuration(sf.process("Sp"), rho), sf.env)
    if [str(a) for a in t1] != ["tau", "E[x]", "tau"]:
        return f"Kraus trace {[str(a) for a in t1]}"
    if [str(a) for a in t2] != ["tau", "EU[x,env]", "EP[x,env]", "EtrE[x,env]", "tau"]:
        return f"system-environment trace {[str(a) for a in t2]}"
    want = apply_superop(sf.ops["E"], ("x",), partial_trace(rho, ("x",))).matrix
    err1 = np.max(np.abs(_marginal(end1, ("x",)) - want))
    err2 = np.max(np.abs(end2.state.matrix - end1.state.matrix))
    rest = np.max(np.abs(_marginal(end1, ("env",)) - partial_trace(rho, ("env",)).matrix))
    err = max(err1, err2, rest)
    return None if err <= TOL else f"final states differ by {err:.3g}"


def check_copier(sf: SourceFile) -> str | None:
    rho = sf.state("rho")
    trace, end = replay(Configuration(sf.process("S"), rho), sf.env)
    if [str(a) for a in trace] != ["tau", "tau", "U[x,x0]", "tau", "tau"]:
        return f"trace {[str(a) for a in trace]}"
    u = sf.ops["U"].kraus[0]
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    psi = u @ np.kron(plus, [1, 0])
    err = np.max(np.abs(_marginal(end, ("x", "x0")) - qnum.projector(psi)))
    return None if err <= TOL else f"copied state off by {err:.3g}"


def check_directives(sf: SourceFile, seed: int) -> str | None:
    for chk in sf.checks:
        states = {n: sf.state(n) for n in chk.states}
        opts = GameOptions(states=states, seed=seed)
        fn = reduction_bisim if chk.kind == "rbisim" else bisim_process
        v = fn(sf.process(chk.left), sf.process(chk.right), sf.env, opts)
        want = NOT_BISIMILAR if chk.negate else BISIMILAR
        if v.result != want:
            return f"line {chk.line}: {chk.kind} {chk.left} {chk.right} gave {v.result}"
    return None


def check_laws(seed: int, per_law: int) -> str | None:
    env = make_env()
    gen = ProcessGen(np.random.default_rng(seed))
    for law in LAWS:
        for k in range(per_law):
            lhs, rhs = law_instance(gen, law, env)
            v = bisim_process(lhs, rhs, env, GameOptions(seed=seed))
            if v.result != BISIMILAR:
                return f"{law} instance {k}: {v.result}"
    return None


def run_selftest(out: TextIO, seed: int = 0, quick: bool = False) -> bool:
    corpus = _corpus()
    checks: list[tuple[str, Callable[[], str | None]]] = [
        ("bell pair", lambda: check_bell(corpus["bell.qccs"])),
        ("measurement", lambda: check_measurement(corpus["bell.qccs"])),
        ("noisy channel", lambda: check_noisy_channel(corpus["noisy_channel.qccs"])),
        ("copier", lambda: check_copier(corpus["copier.qccs"])),
    ]
    for name, sf in sorted(corpus.items()):
        if sf.checks:
            checks.append((f"checks in {name}", lambda sf=sf: check_directives(sf, seed)))
    checks.append(("monoid and static laws", lambda: check_laws(seed, 3 if quick else 20)))
    ok = True
    for name, fn in checks:
        try:
            err = fn()
        except Exception as e:  # noqa: BLE001 - reported as a failing check
            err = f"{type(e).__name__}: {e}"
        out.write(f"PASS {name}\n" if err is None else f"FAIL {name}: {err}\n")
        ok = ok and err is None
    return ok
