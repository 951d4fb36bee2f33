"""Dense quantum-information primitives over finite registers of typed variables.

Matrices are plain ``numpy`` complex arrays. States and super-operators are
immutable once built; every array they hold is flagged read-only.
"""

from __future__ import annotations

import functools
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

TOL_H = 1e-9
TOL_CHANNEL = 1e-7
DEFAULT_DIM_CAP = 2**12


class QuantumError(ValueError):
    """Raised for malformed states, channels, bindings or registers."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def hermitian_eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in ascending order."""
    return np.linalg.eigvalsh(a)


def hermitian_eigh(a: np.ndarray):
    return np.linalg.eigh(a)


# -- types and registers ----------------------------------------------------


@dataclass(frozen=True)
class VarType:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 2:
            raise QuantumError(f"type {self.name!r}: dimension must be an integer >= 2, got {self.dim!r}")


QUBIT = VarType("qubit", 2)


def same_space(a: VarType, b: VarType) -> bool:
    """Two variables have the same type iff they share a state space."""
    return a.dim == b.dim


@dataclass(frozen=True)
class Register:
    """Ordered, duplicate-free list of typed variables, kept in name order."""

    vars: tuple[tuple[str, VarType], ...]
    cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        names = [n for n, _ in self.vars]
        if len(set(names)) != len(names):
            raise QuantumError(f"duplicate variable in register: {names}")
        ordered = tuple(sorted(self.vars, key=lambda v: v[0]))
        object.__setattr__(self, "vars", ordered)
        if self.dim > self.cap:
            raise QuantumError(f"register dimension {self.dim} exceeds cap {self.cap}")

    @classmethod
    def of(cls, items: Mapping[str, VarType] | Iterable[tuple[str, VarType]], cap: int = DEFAULT_DIM_CAP):
        if isinstance(items, Mapping):
            items = items.items()
        return cls(tuple(items), cap)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.vars)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(t.dim for _, t in self.vars)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def type_of(self, name: str) -> VarType:
        for n, t in self.vars:
            if n == name:
                return t
        raise QuantumError(f"variable {name!r} not in register")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise QuantumError(f"variable {name!r} not in register") from None

    def __contains__(self, name) -> bool:
        return name in self.names

    def sub(self, keep: Iterable[str]) -> "Register":
        keep = set(keep)
        missing = keep - set(self.names)
        if missing:
            raise QuantumError(f"unknown variable(s) {sorted(missing)}")
        return Register(tuple(v for v in self.vars if v[0] in keep), self.cap)


# -- matrices ---------------------------------------------------------------


def mat_tensor(a, b) -> np.ndarray:
    """Kronecker product; row (i_a, i_b) lands at i_a * rows(b) + i_b."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def ket(index: int, dim: int = 2) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def _check_finite(m: np.ndarray, what: str):
    if not np.all(np.isfinite(m)):
        raise QuantumError(f"{what} has non-finite entries")


# -- states -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QState:
    """A (partial) density operator on a register, stored in register order."""

    register: Register
    matrix: np.ndarray
    trace_kind: str = "density"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        d = self.register.dim
        if m.shape != (d, d):
            raise QuantumError(f"state matrix shape {m.shape} does not match register dimension {d}")
        if self.trace_kind not in ("density", "partial"):
            raise QuantumError(f"unknown trace kind {self.trace_kind!r}")
        if self.validate:
            self.check()

    def check(self, tol: float = TOL_H):
        m = self.matrix
        _check_finite(m, "state")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise QuantumError("state matrix is not Hermitian")
        if hermitian_eigvalsh((m + m.conj().T) / 2)[0] < -tol:
            raise QuantumError("state matrix is not positive semidefinite")
        tr = self.trace
        if self.trace_kind == "density" and abs(tr - 1.0) > tol:
            raise QuantumError(f"density operator has trace {tr}")
        if tr > 1.0 + tol:
            raise QuantumError(f"partial density operator has trace {tr} > 1")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def names(self) -> tuple[str, ...]:
        return self.register.names

    def rounded_key(self, grid: float = 1e-9) -> bytes:
        decimals = int(round(-math.log10(grid)))
        r = np.round(self.matrix, decimals) + 0.0
        return r.tobytes()

    def fingerprint(self) -> str:
        h = hashlib.sha1(self.register.names.__repr__().encode())
        h.update(self.rounded_key())
        return h.hexdigest()[:12]

    def allclose(self, other: "QState", tol: float = TOL_H) -> bool:
        return self.register.names == other.register.names and float(np.max(np.abs(self.matrix - other.matrix))) <= tol

    @classmethod
    def product(cls, register: Register, parts: Mapping[tuple[str, ...] | str, np.ndarray], default=None) -> "QState":
        """Tensor together per-group density matrices; unlisted variables get ``default`` or |0><0|."""
        pieces: list[tuple[tuple[str, ...], np.ndarray]] = []
        covered: set[str] = set()
        for names, mat in parts.items():
            names = (names,) if isinstance(names, str) else tuple(names)
            mat = np.asarray(mat, dtype=complex)
            if mat.ndim == 1:
                mat = projector(mat)
            if covered & set(names):
                raise QuantumError(f"variable(s) {sorted(covered & set(names))} given twice")
            covered |= set(names)
            pieces.append((names, mat))
        for name, t in register.vars:
            if name not in covered:
                m = default(t) if default else projector(ket(0, t.dim))
                pieces.append(((name,), m))
        order: list[str] = []
        mat = np.ones((1, 1), dtype=complex)
        for names, m in pieces:
            order.extend(names)
            mat = mat_tensor(mat, m)
        mat = _reorder(mat, [register.type_of(n).dim for n in order], order, register.names)
        return cls(register, mat)


def _reorder(mat: np.ndarray, dims: Sequence[int], order: Sequence[str], target: Sequence[str]) -> np.ndarray:
    """Permute tensor factors of a square matrix from ``order`` to ``target``."""
    order, target = list(order), list(target)
    if order == target:
        return mat
    n = len(order)
    perm = [order.index(name) for name in target]
    t = mat.reshape(list(dims) * 2)
    t = t.transpose(perm + [p + n for p in perm])
    d = math.prod(dims)
    return t.reshape(d, d)


def partial_trace(s: QState, keep: Iterable[str]) -> QState:
    keep = set(keep)
    sub = s.register.sub(keep)
    names, dims = s.register.names, s.register.dims
    n = len(names)
    t = s.matrix.reshape(list(dims) * 2)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    rows, cols = letters[:n], letters[n:]
    for i, name in enumerate(names):
        if name not in keep:
            cols[i] = rows[i]
    out = [rows[i] for i in range(n) if names[i] in keep] + [cols[i] for i in range(n) if names[i] in keep]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out)
    r = np.einsum(spec, t)
    return QState(sub, r.reshape(sub.dim, sub.dim), s.trace_kind, validate=False)


def rename_state(s: QState, f: Mapping[str, str]) -> QState:
    """Relabel register variables by an injective, type-preserving map."""
    mapping = {n: f.get(n, n) for n in s.register.names}
    images = list(mapping.values())
    if len(set(images)) != len(images):
        raise QuantumError(f"renaming {dict(f)} is not injective on the register")
    for src, tgt in f.items():
        if src in s.register and tgt in s.register and not same_space(s.register.type_of(src), s.register.type_of(tgt)):
            raise QuantumError(f"renaming {src}->{tgt} changes the type")
    reg = Register(tuple((mapping[n], t) for n, t in s.register.vars), s.register.cap)
    old_order = [mapping[n] for n in s.register.names]
    mat = _reorder(s.matrix, list(s.register.dims), old_order, reg.names)
    return QState(reg, mat, s.trace_kind, validate=False)


def trace_distance(r: QState, s: QState) -> float:
    if r.register.names != s.register.names or r.register.dims != s.register.dims:
        raise QuantumError("trace distance needs states on the same register")
    return matrix_trace_distance(r.matrix, s.matrix)


def matrix_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    delta = a - b
    delta = (delta + delta.conj().T) / 2
    return 0.5 * float(np.sum(np.abs(hermitian_eigvalsh(delta))))


# -- super-operators --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SuperOp:
    """A completely positive, trace-non-increasing map in Kraus form.

    ``domain`` lists the slot types in order; an application binds each slot
    to one register variable.
    """

    domain: tuple[VarType, ...]
    kraus: tuple[np.ndarray, ...]
    label: str = "E"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        domain = tuple(self.domain)
        if not domain:
            raise QuantumError(f"super-operator {self.label!r} has an empty domain")
        object.__setattr__(self, "domain", domain)
        d = math.prod(t.dim for t in domain)
        ks = tuple(_frozen(k) for k in self.kraus)
        if not ks:
            raise QuantumError(f"super-operator {self.label!r} has no Kraus operators")
        for k in ks:
            if k.shape != (d, d):
                raise QuantumError(f"Kraus operator of shape {k.shape} on {self.label!r}, expected {(d, d)}")
            _check_finite(k, f"Kraus operator of {self.label!r}")
        object.__setattr__(self, "kraus", ks)
        if self.validate:
            gap = np.eye(d) - self.kraus_sum()
            if hermitian_eigvalsh((gap + gap.conj().T) / 2)[0] < -TOL_H:
                raise QuantumError(f"super-operator {self.label!r}: sum of E_i^dag E_i exceeds identity")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def arity(self) -> int:
        return len(self.domain)

    def kraus_sum(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.kraus)

    @functools.cached_property
    def trace_preserving(self) -> bool:
        return float(np.max(np.abs(self.kraus_sum() - np.eye(self.dim)))) <= TOL_H

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    @functools.cached_property
    def _key(self):
        return (self.label, tuple(t.dim for t in self.domain), tuple(k.tobytes() for k in self.kraus))

    def __eq__(self, other):
        return isinstance(other, SuperOp) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def relabel(self, label: str) -> "SuperOp":
        return SuperOp(self.domain, self.kraus, label, validate=False)


def _perm_matrix(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary mapping factor order ``i`` to position ``perm.index(i)`` (new order = ``perm``)."""
    d = math.prod(dims)
    idx = np.arange(d).reshape(dims).transpose(perm).reshape(-1)
    p = np.zeros((d, d), dtype=complex)
    p[np.arange(d), idx] = 1.0
    return p


def permute_superop(e: SuperOp, perm: Sequence[int]) -> SuperOp:
    """Re-express ``e`` with its slots reordered; new slot ``j`` is old slot ``perm[j]``."""
    if list(perm) == list(range(e.arity)):
        return e
    dims = [t.dim for t in e.domain]
    p = _perm_matrix(dims, perm)
    ks = tuple(p @ k @ p.conj().T for k in e.kraus)
    return SuperOp(tuple(e.domain[i] for i in perm), ks, e.label, validate=False)


def extend_superop(e: SuperOp, slots: Sequence[str], target: Sequence[tuple[str, VarType]]) -> SuperOp:
    """Cylindric extension: ``e`` on ``slots`` tensored with identity on the rest of ``target``."""
    names = [n for n, _ in target]
    if len(set(slots)) != len(slots):
        raise QuantumError(f"repeated variable in {list(slots)}")
    missing = [s for s in slots if s not in names]
    if missing:
        raise QuantumError(f"variables {missing} not in extension target")
    rest = [(n, t) for n, t in target if n not in slots]
    rest_dim = math.prod(t.dim for _, t in rest) if rest else 1
    ks = [mat_tensor(k, np.eye(rest_dim)) for k in e.kraus]
    order = list(slots) + [n for n, _ in rest]
    types = {n: t for n, t in target}
    for s, t in zip(slots, e.domain):
        if not same_space(types[s], t):
            raise QuantumError(f"variable {s!r} has dimension {types[s].dim}, slot expects {t.dim}")
    dims = [types[n].dim for n in order]
    perm = [order.index(n) for n in names]
    p = _perm_matrix(dims, perm)
    ks = tuple(p @ k @ p.conj().T for k in ks)
    return SuperOp(tuple(types[n] for n in names), ks, e.label, validate=False)


def _simplify_kraus(ks: list[np.ndarray], d: int) -> list[np.ndarray]:
    ks = [k for k in ks if np.max(np.abs(k)) > 1e-14]
    if not ks:
        return [np.zeros((d, d), dtype=complex)]
    if len(ks) > d * d:
        ks = kraus_from_choi(sum(np.outer(_vec(k), _vec(k).conj()) for k in ks), d)
    return ks


def superop_compose(e2: SuperOp, e1: SuperOp) -> SuperOp:
    """``e2`` after ``e1`` on a shared domain; Kraus list {F_j E_i}."""
    if e1.dim != e2.dim or [t.dim for t in e1.domain] != [t.dim for t in e2.domain]:
        raise QuantumError(f"cannot compose {e2.label!r} with {e1.label!r}: domain mismatch")
    ks = [f @ k for f in e2.kraus for k in e1.kraus]
    ks = _simplify_kraus(ks, e1.dim)
    return SuperOp(e1.domain, tuple(ks), f"{e1.label}_{e2.label}", validate=False)


def _vec(k: np.ndarray) -> np.ndarray:
    # (I (x) K)|Omega>, index k*d + m holds K[m, k]
    return k.T.reshape(-1)


def choi(e: SuperOp) -> np.ndarray:
    """J(E) = sum_{k,l} |k><l| (x) E(|k><l|)."""
    d = e.dim
    j = np.zeros((d * d, d * d), dtype=complex)
    for k in e.kraus:
        v = _vec(k)
        j += np.outer(v, v.conj())
    return j


def kraus_from_choi(j: np.ndarray, d: int, eps: float = 1e-12) -> list[np.ndarray]:
    w, v = hermitian_eigh((j + j.conj().T) / 2)
    out = []
    for val, vec in zip(w, v.T):
        if val > eps:
            out.append((math.sqrt(val) * vec).reshape(d, d).T)
    return out or [np.zeros((d, d), dtype=complex)]


def superop_equal(e: SuperOp, f: SuperOp, tol: float = TOL_CHANNEL) -> bool:
    if e.dim != f.dim:
        raise QuantumError(f"cannot compare {e.label!r} and {f.label!r}: dimensions {e.dim} and {f.dim}")
    return float(np.max(np.abs(choi(e) - choi(f)))) <= tol


def apply_superop(e: SuperOp, binding: Sequence[str] | Mapping[int, str], s: QState) -> QState:
    """Apply the cylindric extension of ``e`` to ``s``; ``binding[i]`` is the variable in slot ``i``."""
    if isinstance(binding, Mapping):
        binding = [binding[i] for i in range(e.arity)]
    binding = list(binding)
    if len(binding) != e.arity:
        raise QuantumError(f"{e.label!r} expects {e.arity} variable(s), got {binding}")
    if len(set(binding)) != len(binding):
        raise QuantumError(f"binding {binding} of {e.label!r} is not injective")
    reg = s.register
    for name, t in zip(binding, e.domain):
        vt = reg.type_of(name)
        if not same_space(vt, t):
            raise QuantumError(f"variable {name!r} has dimension {vt.dim}, {e.label!r} expects {t.dim}")
    names, dims = list(reg.names), list(reg.dims)
    n = len(names)
    front = [names.index(b) for b in binding]
    rest = [i for i in range(n) if i not in front]
    perm = front + rest
    dfront = e.dim
    drest = reg.dim // dfront
    t = s.matrix.reshape(dims * 2).transpose(perm + [p + n for p in perm])
    rho = t.reshape(dfront, drest, dfront, drest)
    out = np.zeros_like(rho)
    for k in e.kraus:
        # (K (x) I) rho (K (x) I)^dag on the front indices
        left = np.tensordot(k, rho, axes=(1, 0))
        out += np.tensordot(left, k.conj(), axes=(2, 1)).transpose(0, 1, 3, 2)
    pdims = [dims[p] for p in perm]
    inv = np.argsort(perm).tolist()
    out = out.reshape(pdims * 2).transpose(inv + [p + n for p in inv]).reshape(reg.dim, reg.dim)
    kind = s.trace_kind if e.trace_preserving else "partial"
    return QState(reg, out, kind, validate=False)


def identity_superop(domain: Sequence[VarType], label: str = "I") -> SuperOp:
    d = math.prod(t.dim for t in domain)
    return SuperOp(tuple(domain), (np.eye(d, dtype=complex),), label)


def unitary_superop(u, domain: Sequence[VarType] | None = None, label: str = "U") -> SuperOp:
    u = np.asarray(u, dtype=complex)
    if float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) > TOL_H:
        raise QuantumError(f"{label!r} is not unitary")
    if domain is None:
        n = int(round(math.log2(u.shape[0])))
        if 2**n != u.shape[0]:
            raise QuantumError(f"cannot infer qubit domain for {u.shape[0]}-dimensional unitary {label!r}")
        domain = (QUBIT,) * n
    return SuperOp(tuple(domain), (u,), label)


def measurement_superop(ops: Sequence, mode: str | int = "total", domain: Sequence[VarType] | None = None,
                        label: str = "M") -> SuperOp:
    """Measurement {M_m}: ``mode="total"`` forgets the outcome, an integer keeps branch ``m`` only."""
    ops = [np.asarray(m, dtype=complex) for m in ops]
    if not ops:
        raise QuantumError("measurement needs at least one operator")
    d = ops[0].shape[0]
    if domain is None:
        n = int(round(math.log2(d)))
        domain = (QUBIT,) * n if 2**n == d else (VarType(f"q{d}", d),)
    if mode == "total":
        s = sum(m.conj().T @ m for m in ops)
        if float(np.max(np.abs(s - np.eye(d)))) > TOL_H:
            raise QuantumError(f"measurement {label!r} violates completeness sum M_m^dag M_m = I")
        return SuperOp(tuple(domain), tuple(ops), label)
    if isinstance(mode, (int, np.integer)) and not isinstance(mode, bool):
        if not 0 <= mode < len(ops):
            raise QuantumError(f"branch index {mode} out of range for {len(ops)} outcomes")
        return SuperOp(tuple(domain), (ops[mode],), label)
    raise QuantumError(f"unknown measurement mode {mode!r}")


def computational_measurement(domain: Sequence[VarType] = (QUBIT,)) -> list[np.ndarray]:
    d = math.prod(t.dim for t in domain)
    return [projector(ket(i, d)) for i in range(d)]


def system_environment_superop(u, proj, d_sys: int, d_env: int, domain: Sequence[VarType] | None = None,
                               label: str = "E") -> SuperOp:
    """Kraus form of rho -> tr_E[P U (rho (x) |e0><e0|) U^dag P]."""
    u = np.asarray(u, dtype=complex)
    proj = np.asarray(proj, dtype=complex)
    pu = proj @ u
    ks = []
    for k in range(d_env):
        # <e_k| P U |e_0>, as a d_sys x d_sys block
        block = pu.reshape(d_sys, d_env, d_sys, d_env)[:, k, :, 0]
        ks.append(block)
    if domain is None:
        domain = (VarType(f"q{d_sys}", d_sys) if d_sys != 2 else QUBIT,)
    return SuperOp(tuple(domain), tuple(ks), label)


# -- named gates and channel families ---------------------------------------

_S2 = 1 / math.sqrt(2)

_GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def _rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


_PARAM_GATES: dict[str, Callable[..., np.ndarray]] = {
    "RX": _rx,
    "RY": _ry,
    "RZ": _rz,
    "PHASE": lambda phi: np.diag([1, np.exp(1j * phi)]),
}


def _fmt_param(p: float) -> str:
    return repr(float(p))


def register_gate(name: str, u) -> None:
    """Add a user unitary to the gate table."""
    u = np.asarray(u, dtype=complex)
    unitary_superop(u, label=name)
    _GATES[name] = u


def gate_names() -> list[str]:
    return sorted(_GATES) + sorted(_PARAM_GATES)


def is_gate(name: str) -> bool:
    return name in _GATES or name in _PARAM_GATES


def gate_matrix(name: str, *params: float) -> np.ndarray:
    if name in _GATES:
        if params:
            raise QuantumError(f"gate {name} takes no parameters")
        return _GATES[name]
    if name in _PARAM_GATES:
        if len(params) != 1:
            raise QuantumError(f"gate {name} takes exactly one parameter")
        return _PARAM_GATES[name](float(params[0]))
    raise QuantumError(f"unknown gate {name!r}")


def named_gate(name: str, *params: float, domain: Sequence[VarType] | None = None) -> SuperOp:
    u = gate_matrix(name, *params)
    label = name if not params else f"{name}({','.join(_fmt_param(p) for p in params)})"
    return unitary_superop(u, domain, label)


def amplitude_damping(gamma: float, domain: Sequence[VarType] = (QUBIT,)) -> SuperOp:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return SuperOp(tuple(domain), (k0, k1), f"AD({_fmt_param(gamma)})")


def phase_damping(gamma: float, domain: Sequence[VarType] = (QUBIT,)) -> SuperOp:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, 0], [0, math.sqrt(gamma)]], dtype=complex)
    return SuperOp(tuple(domain), (k0, k1), f"PD({_fmt_param(gamma)})")


def depolarizing(p: float, domain: Sequence[VarType] = (QUBIT,)) -> SuperOp:
    ks = [math.sqrt(1 - 3 * p / 4) * _GATES["I"]] + [math.sqrt(p / 4) * _GATES[g] for g in "XYZ"]
    return SuperOp(tuple(domain), tuple(ks), f"DEP({_fmt_param(p)})")


def bit_flip(p: float, domain: Sequence[VarType] = (QUBIT,)) -> SuperOp:
    return SuperOp(tuple(domain), (math.sqrt(1 - p) * _GATES["I"], math.sqrt(p) * _GATES["X"]),
                   f"BF({_fmt_param(p)})")


CHANNELS: dict[str, Callable[[float], SuperOp]] = {
    "amplitude_damping": amplitude_damping,
    "phase_damping": phase_damping,
    "depolarizing": depolarizing,
    "bit_flip": bit_flip,
}


# -- named states -----------------------------------------------------------

_KETS = {
    "0": ket(0),
    "1": ket(1),
    "+": np.array([_S2, _S2], dtype=complex),
    "-": np.array([_S2, -_S2], dtype=complex),
    "i": np.array([_S2, 1j * _S2], dtype=complex),
    "-i": np.array([_S2, -1j * _S2], dtype=complex),
}

BELL = {
    "bell00": np.array([_S2, 0, 0, _S2], dtype=complex),
    "bell01": np.array([0, _S2, _S2, 0], dtype=complex),
    "bell10": np.array([_S2, 0, 0, -_S2], dtype=complex),
    "bell11": np.array([0, _S2, -_S2, 0], dtype=complex),
}


def named_ket(label: str, dim: int = 2) -> np.ndarray:
    if label in _KETS and dim == 2:
        return _KETS[label]
    if label.isdigit() and int(label) < dim:
        return ket(int(label), dim)
    raise QuantumError(f"unknown basis ket |{label}> for dimension {dim}")


# -- random sampling --------------------------------------------------------


def random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_channel(domain: Sequence[VarType], rng: np.random.Generator, n_kraus: int = 2,
                   trace_preserving: bool = True, label: str = "R") -> SuperOp:
    """Random channel from a Stinespring isometry; optionally damped to be trace-decreasing."""
    d = math.prod(t.dim for t in domain)
    u = random_unitary(d * n_kraus, rng)
    v = u[:, :d]
    ks = [v[i * d:(i + 1) * d, :] for i in range(n_kraus)]
    if not trace_preserving:
        ks = [math.sqrt(0.5 + 0.5 * rng.random()) * k for k in ks]
    return SuperOp(tuple(domain), tuple(ks), label)


# -- diamond distance -------------------------------------------------------


def _adjoint_apply(kraus: Sequence[np.ndarray], m: np.ndarray, anc: int) -> np.ndarray:
    out = np.zeros_like(m)
    for k in kraus:
        ke = np.kron(k, np.eye(anc))
        out += ke.conj().T @ m @ ke
    return out


def _forward_apply(kraus: Sequence[np.ndarray], m: np.ndarray, anc: int) -> np.ndarray:
    out = np.zeros_like(m)
    for k in kraus:
        ke = np.kron(k, np.eye(anc))
        out += ke @ m @ ke.conj().T
    return out


def pure_input_distance(e: SuperOp, f: SuperOp, psi: np.ndarray, anc: int) -> float:
    """Trace distance between (E (x) I)(psi) and (F (x) I)(psi) for a pure input on system (x) ancilla."""
    rho = projector(psi)
    return matrix_trace_distance(_forward_apply(e.kraus, rho, anc), _forward_apply(f.kraus, rho, anc))


def _ascent(e: SuperOp, f: SuperOp, psi: np.ndarray, anc: int, iters: int, tol: float):
    best = -1.0
    best_psi = psi
    for _ in range(iters):
        rho = projector(psi)
        delta = _forward_apply(e.kraus, rho, anc) - _forward_apply(f.kraus, rho, anc)
        delta = (delta + delta.conj().T) / 2
        w, v = hermitian_eigh(delta)
        val = float(np.sum(w[w > 0]))
        if val > best:
            best, best_psi = val, psi
        pos = v[:, w > 0]
        if pos.shape[1] == 0:
            break
        proj = pos @ pos.conj().T
        m = _adjoint_apply(e.kraus, proj, anc) - _adjoint_apply(f.kraus, proj, anc)
        m = (m + m.conj().T) / 2
        mw, mv = hermitian_eigh(m)
        nxt = mv[:, -1]
        if mw[-1] <= val + tol and np.abs(np.vdot(nxt, psi)) > 1 - 1e-12:
            break
        psi = nxt
    return best, best_psi


def diamond_distance(e: SuperOp, f: SuperOp, budget: int = 8, seed: int = 0, ancilla_dim: int | None = None,
                     iters: int = 60, tol: float = 1e-13, return_witness: bool = False):
    """Certified lower bound on the diamond distance between ``e`` and ``f``.

    Every value returned is the trace distance of an actual pair of output
    states, so it never exceeds the true supremum. ``budget`` is the number of
    starting points; starts form a seed-determined prefix-stable sequence, so
    the result is non-decreasing in ``budget``.
    """
    if e.dim != f.dim:
        raise QuantumError(f"diamond distance needs equal dimensions, got {e.dim} and {f.dim}")
    d = e.dim
    anc = d if ancilla_dim is None else ancilla_dim
    if superop_equal(e, f, tol=1e-13):
        return (0.0, None) if return_witness else 0.0
    rng = np.random.default_rng(seed)
    n = d * anc
    starts = []
    omega = np.zeros(n, dtype=complex)
    for i in range(min(d, anc)):
        omega[i * anc + i] = 1.0
    starts.append(omega / np.linalg.norm(omega))
    best, best_psi = 0.0, None
    for i in range(max(1, budget)):
        if i < len(starts):
            psi = starts[i]
        else:
            psi = random_pure(n, rng)
        val, wit = _ascent(e, f, psi, anc, iters, tol)
        if val > best:
            best, best_psi = val, wit
    best = min(best, 1.0)
    return (best, best_psi) if return_witness else best
