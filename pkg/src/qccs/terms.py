"""Process terms: syntax, free variables, alpha-conversion and substitution."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .qnum import SuperOp, VarType, QUBIT, Register, DEFAULT_DIM_CAP, same_space


class TermError(ValueError):
    """Ill-formed term, unknown constant, or ill-defined substitution."""


# -- syntax -----------------------------------------------------------------


def _cached_hash(cls):
    """Memoize the generated field hash; terms are immutable and hashed very often."""
    raw = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = raw(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls


@_cached_hash
@dataclass(frozen=True)
class Nil:
    pass


@_cached_hash
@dataclass(frozen=True)
class Const:
    name: str
    args: tuple[str, ...] = ()


@_cached_hash
@dataclass(frozen=True)
class Tau:
    body: "Process"


@_cached_hash
@dataclass(frozen=True)
class Op:
    op: SuperOp
    vars: tuple[str, ...]
    body: "Process"


@_cached_hash
@dataclass(frozen=True)
class Input:
    chan: str
    var: str
    body: "Process"


@_cached_hash
@dataclass(frozen=True)
class Output:
    chan: str
    var: str
    body: "Process"


@_cached_hash
@dataclass(frozen=True)
class Sum:
    left: "Process"
    right: "Process"


@_cached_hash
@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"


@_cached_hash
@dataclass(frozen=True)
class Restrict:
    body: "Process"
    chans: frozenset[str]


Process = Union[Nil, Const, Tau, Op, Input, Output, Sum, Par, Restrict]
NIL = Nil()
PREFIXES = (Tau, Op, Input, Output)


def summation(terms: Iterable[Process]) -> Process:
    """Left-nested sum; the empty sum is nil."""
    out = None
    for t in terms:
        out = t if out is None else Sum(out, t)
    return NIL if out is None else out


@dataclass(frozen=True)
class ConstDef:
    name: str
    params: tuple[str, ...]
    body: Process


# -- environment ------------------------------------------------------------

FRESH_RE = re.compile(r"^#(?P<type>[A-Za-z_][A-Za-z0-9_]*)_b?(?P<k>\d+)$")
CANON_RE = re.compile(r"^\$(?P<dim>\d+)_(?P<k>\d+)$")


def fresh_name(vtype: VarType, k: int) -> str:
    return f"#{vtype.name}_{k}"


def is_reserved(name: str) -> bool:
    return name.startswith(("#", "$"))


@dataclass
class Env:
    """Declarations a term is interpreted against: types, variables, constants."""

    types: dict[str, VarType] = field(default_factory=lambda: {"qubit": QUBIT})
    var_types: dict[str, VarType] = field(default_factory=dict)
    binder_types: dict[str, VarType] = field(default_factory=dict)
    defs: dict[str, ConstDef] = field(default_factory=dict)
    channels: set[str] = field(default_factory=set)
    fresh_per_type: int = 1
    dim_cap: int = DEFAULT_DIM_CAP
    register_vars: tuple[str, ...] | None = None
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def var_type(self, name: str) -> VarType:
        t = self.var_types.get(name) or self.binder_types.get(name)
        if t is not None:
            return t
        m = FRESH_RE.match(name)
        if m and m["type"] in self.types:
            return self.types[m["type"]]
        m = CANON_RE.match(name)
        if m:
            dim = int(m["dim"])
            for t in self.types.values():
                if t.dim == dim:
                    return t
            return VarType(f"dim{dim}", dim)
        raise TermError(f"undeclared variable {name!r}")

    def declare(self, name: str, vtype: VarType | str = QUBIT) -> None:
        if isinstance(vtype, str):
            vtype = self.types[vtype]
        self.types.setdefault(vtype.name, vtype)
        self.var_types[name] = vtype

    def define(self, d: ConstDef) -> None:
        self.defs[d.name] = d
        self.cache.clear()

    def lookup(self, name: str) -> ConstDef:
        try:
            return self.defs[name]
        except KeyError:
            raise TermError(f"unknown process constant {name!r}") from None

    def register(self) -> Register:
        """Active register: declared (or selected) variables plus the fresh pool."""
        names = self.register_vars if self.register_vars is not None else tuple(self.var_types)
        items = [(n, self.var_type(n)) for n in names]
        used = {t.name for _, t in items}
        for tname in sorted(used):
            t = self.types[tname]
            for k in range(self.fresh_per_type):
                items.append((fresh_name(t, k), t))
        return Register(tuple(items), self.dim_cap)


# -- free variables ---------------------------------------------------------


def fv(p: Process, env: Env | None = None) -> frozenset[str]:
    """Free quantum variables, clause by clause."""
    if env is None:
        hit = p.__dict__.get("_fv")
        if hit is None:
            hit = _fv(p, None)
            object.__setattr__(p, "_fv", hit)
        return hit
    return _fv(p, env)


def _fv(p: Process, env: Env | None) -> frozenset[str]:
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Const):
        if env is not None:
            env.lookup(p.name)
        return frozenset(p.args)
    if isinstance(p, Tau):
        return fv(p.body, env)
    if isinstance(p, Op):
        return fv(p.body, env) | frozenset(p.vars)
    if isinstance(p, Input):
        return fv(p.body, env) - {p.var}
    if isinstance(p, Output):
        return fv(p.body, env) | {p.var}
    if isinstance(p, (Sum, Par)):
        return fv(p.left, env) | fv(p.right, env)
    if isinstance(p, Restrict):
        return fv(p.body, env)
    raise TypeError(f"not a process: {p!r}")


def cn(p: Process, env: Env | None = None, _seen=None) -> frozenset[str]:
    """Free channel names; constants are unfolded once each."""
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Const):
        if env is None:
            return frozenset()
        seen = _seen if _seen is not None else set()
        if p.name in seen:
            return frozenset()
        seen.add(p.name)
        return cn(env.lookup(p.name).body, env, seen)
    if isinstance(p, (Tau, Op)):
        return cn(p.body, env, _seen)
    if isinstance(p, (Input, Output)):
        return cn(p.body, env, _seen) | {p.chan}
    if isinstance(p, (Sum, Par)):
        return cn(p.left, env, _seen) | cn(p.right, env, _seen)
    if isinstance(p, Restrict):
        return cn(p.body, env, _seen) - p.chans
    raise TypeError(f"not a process: {p!r}")


def has_constants(p: Process) -> bool:
    if isinstance(p, Const):
        return True
    if isinstance(p, Nil):
        return False
    if isinstance(p, (Sum, Par)):
        return has_constants(p.left) or has_constants(p.right)
    return has_constants(p.body)


def superops(p: Process) -> list[SuperOp]:
    if isinstance(p, (Nil, Const)):
        return []
    if isinstance(p, (Sum, Par)):
        return superops(p.left) + superops(p.right)
    own = [p.op] if isinstance(p, Op) else []
    return own + superops(p.body)


# -- well-formedness --------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    message: str
    subterm: Process

    def __str__(self):
        return self.message


def well_formed(p: Process, env: Env) -> Violation | None:
    """First no-cloning, typing or arity violation in leftmost-innermost order, else None."""
    if isinstance(p, Nil):
        return None
    if isinstance(p, Const):
        d = env.defs.get(p.name)
        if d is None:
            return Violation(f"unknown process constant {p.name!r}", p)
        if len(p.args) != len(d.params):
            return Violation(f"{p.name} expects {len(d.params)} argument(s), got {len(p.args)}", p)
        if len(set(p.args)) != len(p.args):
            return Violation(f"arguments of {p.name} must be distinct variables", p)
        for a, x in zip(p.args, d.params):
            try:
                ta, tx = env.var_type(a), env.var_type(x)
            except TermError as e:
                return Violation(str(e), p)
            if not same_space(ta, tx):
                return Violation(f"argument {a} of {p.name} has the wrong type", p)
        return None
    if isinstance(p, (Sum, Par)):
        v = well_formed(p.left, env) or well_formed(p.right, env)
        if v:
            return v
        if isinstance(p, Par):
            shared = fv(p.left) & fv(p.right)
            if shared:
                return Violation(f"parallel components share free variable(s) {sorted(shared)}", p)
        return None
    v = well_formed(p.body, env)
    if v:
        return v
    if isinstance(p, Output):
        try:
            env.var_type(p.var)
        except TermError as e:
            return Violation(str(e), p)
        if p.var in fv(p.body):
            return Violation(f"output of {p.var} on {p.chan} while {p.var} is still free in the continuation", p)
    elif isinstance(p, Input):
        try:
            env.var_type(p.var)
        except TermError as e:
            return Violation(str(e), p)
    elif isinstance(p, Op):
        if len(p.vars) != p.op.arity:
            return Violation(f"{p.op.label} acts on {p.op.arity} variable(s), applied to {len(p.vars)}", p)
        if len(set(p.vars)) != len(p.vars):
            return Violation(f"{p.op.label} applied to repeated variables {list(p.vars)}", p)
        for x, t in zip(p.vars, p.op.domain):
            try:
                tx = env.var_type(x)
            except TermError as e:
                return Violation(str(e), p)
            if not same_space(tx, t):
                return Violation(f"{p.op.label}: variable {x} has dimension {tx.dim}, slot expects {t.dim}", p)
    return None


def check_definition(d: ConstDef, env: Env) -> Violation | None:
    if len(set(d.params)) != len(d.params):
        return Violation(f"parameters of {d.name} must be distinct", Const(d.name, d.params))
    v = well_formed(d.body, env)
    if v:
        return v
    extra = fv(d.body) - set(d.params)
    if extra:
        return Violation(f"body of {d.name} has free variable(s) {sorted(extra)} outside its parameters", d.body)
    return None


# -- alpha-conversion -------------------------------------------------------


def canonical(p: Process, env: Env) -> Process:
    """Rename every input binder to ``$<dim>_<k>`` in pre-order; equal results iff alpha-equal."""
    counter = [0]

    def go(t: Process, bound: Mapping[str, str]) -> Process:
        if isinstance(t, Nil):
            return t
        if isinstance(t, Const):
            return Const(t.name, tuple(bound.get(a, a) for a in t.args))
        if isinstance(t, Tau):
            return Tau(go(t.body, bound))
        if isinstance(t, Op):
            return Op(t.op, tuple(bound.get(a, a) for a in t.vars), go(t.body, bound))
        if isinstance(t, Output):
            return Output(t.chan, bound.get(t.var, t.var), go(t.body, bound))
        if isinstance(t, Input):
            new = f"${env.var_type(t.var).dim}_{counter[0]}"
            counter[0] += 1
            return Input(t.chan, new, go(t.body, {**bound, t.var: new}))
        if isinstance(t, Sum):
            return Sum(go(t.left, bound), go(t.right, bound))
        if isinstance(t, Par):
            return Par(go(t.left, bound), go(t.right, bound))
        if isinstance(t, Restrict):
            return Restrict(go(t.body, bound), t.chans)
        raise TypeError(f"not a process: {t!r}")

    cache = env.cache.setdefault("canonical", {})
    hit = cache.get(p)
    if hit is None:
        hit = go(p, {})
        cache[p] = hit
    return hit


def alpha_eq(p: Process, q: Process, env: Env) -> bool:
    return canonical(p, env) == canonical(q, env)


# -- substitution -----------------------------------------------------------


class Subst:
    """Injective, type-preserving variable map, identity outside a finite support.

    A partial injective map is completed to a permutation of its support by
    closing chains back onto their start (so ``{x: y}`` becomes the swap).
    """

    def __init__(self, pairs: Mapping[str, str], env: Env | None = None):
        pairs = {a: b for a, b in pairs.items()}
        if len(set(pairs.values())) != len(pairs):
            raise TermError(f"substitution {pairs} is not injective")
        full = dict(pairs)
        for start in list(pairs):
            if start in pairs.values():
                continue
            end = start
            while end in full:
                end = full[end]
            full[end] = start
        self.map = {a: b for a, b in full.items() if a != b}
        if env is not None:
            for a, b in self.map.items():
                if not same_space(env.var_type(a), env.var_type(b)):
                    raise TermError(f"substitution {a}->{b} changes the type")

    def __call__(self, x: str) -> str:
        return self.map.get(x, x)

    def inverse(self) -> "Subst":
        s = Subst.__new__(Subst)
        s.map = {b: a for a, b in self.map.items()}
        return s

    def support(self) -> frozenset[str]:
        return frozenset(self.map)

    def __repr__(self):
        return "{" + ", ".join(f"{b}/{a}" for a, b in sorted(self.map.items())) + "}"

    @classmethod
    def swap(cls, x: str, y: str) -> "Subst":
        return cls({x: y})


def _pick_binder(avoid: frozenset[str], vtype: VarType) -> str:
    k = 0
    while True:
        name = f"#{vtype.name}_b{k}"
        if name not in avoid:
            return name
        k += 1


def subst_apply(p: Process, f: Subst | Mapping[str, str], env: Env, check: bool = True) -> Process:
    """Apply a variable substitution; inputs rename their binder when it would capture."""
    if not isinstance(f, Subst):
        f = Subst(f, env)
    if not f.map:
        return p
    if check:
        free = fv(p)
        for x in free:
            if f(x) != x and f(x) in free:
                raise TermError(f"substitution {f} is ill-defined on {sorted(free)}: {f(x)} is already free")
    return _subst(p, f, env)


def _subst(p: Process, f: Subst, env: Env) -> Process:
    if isinstance(p, Nil):
        return p
    if isinstance(p, Const):
        return Const(p.name, tuple(f(a) for a in p.args))
    if isinstance(p, Tau):
        return Tau(_subst(p.body, f, env))
    if isinstance(p, Op):
        return Op(p.op, tuple(f(a) for a in p.vars), _subst(p.body, f, env))
    if isinstance(p, Output):
        return Output(p.chan, f(p.var), _subst(p.body, f, env))
    if isinstance(p, Sum):
        return Sum(_subst(p.left, f, env), _subst(p.right, f, env))
    if isinstance(p, Par):
        return Par(_subst(p.left, f, env), _subst(p.right, f, env))
    if isinstance(p, Restrict):
        return Restrict(_subst(p.body, f, env), p.chans)
    if isinstance(p, Input):
        x, body = p.var, p.body
        free = fv(body)
        if all(f(z) != x for z in free if z != x):
            # y = x is a legal choice: nothing else lands on x
            return Input(p.chan, x, _subst(body, _f_y(f, x), env))
        avoid = free | {f(z) for z in free} | f.support()
        y = _pick_binder(frozenset(avoid), env.var_type(x))
        renamed = _subst(body, Subst({x: y}), env)
        return Input(p.chan, y, _subst(renamed, f, env))
    raise TypeError(f"not a process: {p!r}")


def _f_y(f: Subst, y: str) -> Subst:
    """f_y: fixes y, sends f^-1(y) to f(y), agrees with f elsewhere."""
    inv = f.inverse()
    pre = inv(y)
    m = dict(f.map)
    m.pop(y, None)
    if pre != y:
        m[pre] = f(y)
    s = Subst.__new__(Subst)
    s.map = {a: b for a, b in m.items() if a != b}
    return s


def unfold(c: Const, env: Env) -> Process:
    """Body of the constant's definition with parameters replaced by arguments."""
    d = env.lookup(c.name)
    if len(d.params) != len(c.args):
        raise TermError(f"{c.name} expects {len(d.params)} argument(s), got {len(c.args)}")
    pairs = {x: y for x, y in zip(d.params, c.args) if x != y}
    if not pairs:
        return d.body
    return _subst(d.body, Subst(pairs), env)


# -- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class TauAct:
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class OpAct:
    op: SuperOp
    vars: tuple[str, ...]

    def __str__(self):
        return f"{self.op.label}[{','.join(self.vars)}]"


@dataclass(frozen=True)
class InAct:
    chan: str
    var: str

    def __str__(self):
        return f"{self.chan}?{self.var}"


@dataclass(frozen=True)
class OutAct:
    chan: str
    var: str

    def __str__(self):
        return f"{self.chan}!{self.var}"


Action = Union[TauAct, OpAct, InAct, OutAct]
TAU = TauAct()


def fv_action(a: Action) -> frozenset[str]:
    if isinstance(a, OutAct):
        return frozenset({a.var})
    if isinstance(a, OpAct):
        return frozenset(a.vars)
    return frozenset()


def bv_action(a: Action) -> str | None:
    return a.var if isinstance(a, InAct) else None


def cn_action(a: Action) -> str | None:
    return a.chan if isinstance(a, (InAct, OutAct)) else None


def rename_action(a: Action, f: Subst) -> Action:
    """Extension of a substitution to actions; inputs are left alone."""
    if isinstance(a, OutAct):
        return OutAct(a.chan, f(a.var))
    if isinstance(a, OpAct):
        return OpAct(a.op, tuple(f(v) for v in a.vars))
    return a
