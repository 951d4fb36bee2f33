"""Command-line front end: ``qccs parse|steps|lts|nf|bisim|rbisim|distance|selftest``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import qnum
from .equiv import (
    BISIMILAR, NOT_BISIMILAR, GameOptions, bisim_process, dsb_estimate, dsrb_estimate, reduction_bisim,
)
from .parse import ParseError, SourceFile, parse_file, pretty
from .reduce import normal_form
from .sos import Configuration, SemanticsError, build_lts, lts_dot, lts_json

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_REFUTED = 2
EXIT_UNKNOWN = 3
EXIT_USAGE = 64
EXIT_NOINPUT = 66
EXIT_INTERNAL = 70

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QCCS_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"QCCS_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _load(args) -> SourceFile:
    try:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise FileNotFoundError(f"{args.file}: {e.strerror}") from e
    return parse_file(text, fresh_per_type=args.fresh or 1)


def _proc(sf: SourceFile, name: str):
    if name not in sf.procs and name not in sf.env.defs:
        raise UsageError(f"unknown process {name!r}; declared: {', '.join(sorted(sf.procs) + sorted(sf.env.defs))}")
    return sf.process(name)


def _state(sf: SourceFile, name: str | None):
    if name is None:
        return qnum.QState.product(sf.env.register(), {})
    if name not in sf.states:
        raise UsageError(f"unknown state {name!r}; declared: {', '.join(sorted(sf.states))}")
    # state declarations are built against the register at parse time
    return sf.states[name]


def _options(args, sf: SourceFile) -> GameOptions:
    names = [s for s in (args.states or "").split(",") if s]
    states = {n: _state(sf, n) for n in names}
    kw = dict(states=states, seed=_seed(args))
    if getattr(args, "depth", None) is not None:
        kw["depth"] = args.depth
    if getattr(args, "tol", None) is not None:
        kw["tol"] = args.tol
    if getattr(args, "budget", None) is not None:
        kw["budget"] = args.budget
    if getattr(args, "random", None) is not None:
        kw["n_product"] = args.random
        kw["n_entangled"] = max(0, args.random // 2)
    return GameOptions(**kw)


def _fmt_matrix(m: np.ndarray) -> str:
    def c(z):
        z = complex(z)
        re, im = round(z.real, 6) + 0.0, round(z.imag, 6) + 0.0
        return f"{re:g}" if im == 0 else f"{re:g}{im:+g}i"
    return "[" + ", ".join("[" + ", ".join(c(z) for z in row) + "]" for row in m) + "]"


# -- subcommands ---------------------------------------------------------------


def cmd_parse(args, out) -> int:
    sf = _load(args)
    out.write("ok\n")
    if args.verbose:
        for name, p in sorted(sf.procs.items()):
            out.write(f"proc {name} = {pretty(p)}\n")
        for name, d in sorted(sf.env.defs.items()):
            out.write(f"{name}({', '.join(d.params)}) = {pretty(d.body)}\n")
    return EXIT_OK


def cmd_steps(args, out) -> int:
    sf = _load(args)
    c0 = Configuration(_proc(sf, args.proc), _state(sf, args.state))
    lts = build_lts(c0, sf.env, max_depth=args.depth, max_nodes=args.max_nodes)
    for s, a, t in lts.edges:
        c = lts.nodes[t]
        out.write(f"{a} :: {pretty(c.process)} :: {c.state.fingerprint()}\n")
        if args.show_states:
            out.write(f"    {' '.join(c.state.register.names)} = {_fmt_matrix(c.state.matrix)}\n")
    if lts.is_truncated:
        out.write(f"# truncated at depth {args.depth} or {args.max_nodes} nodes\n")
    return EXIT_OK


def cmd_lts(args, out) -> int:
    sf = _load(args)
    c0 = Configuration(_proc(sf, args.proc), _state(sf, args.state))
    lts = build_lts(c0, sf.env, max_depth=args.depth, max_nodes=args.max_nodes)
    text = lts_dot(lts) if args.format == "dot" else lts_json(lts) + "\n"
    if args.output and args.output != "-":
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            raise FileNotFoundError(f"{args.output}: {e.strerror}") from e
    else:
        out.write(text)
    return EXIT_OK


def cmd_nf(args, out) -> int:
    sf = _load(args)
    out.write(pretty(normal_form(_proc(sf, args.proc), sf.env)) + "\n")
    return EXIT_OK


def _verdict_exit(result: str) -> int:
    return {BISIMILAR: EXIT_OK, NOT_BISIMILAR: EXIT_REFUTED}.get(result, EXIT_UNKNOWN)


def cmd_bisim(args, out) -> int:
    sf = _load(args)
    p, q = _proc(sf, args.p), _proc(sf, args.q)
    fn = reduction_bisim if args.command == "rbisim" else bisim_process
    v = fn(p, q, sf.env, _options(args, sf))
    out.write(v.to_json() + "\n")
    return _verdict_exit(v.result)


def cmd_distance(args, out) -> int:
    sf = _load(args)
    if args.kind == "diamond":
        if not args.e or not args.f:
            raise UsageError("--kind diamond needs --e and --f")
        for n in (args.e, args.f):
            if n not in sf.ops and not qnum.is_gate(n):
                raise UsageError(f"unknown operation {n!r}")
        e = sf.ops.get(args.e) or qnum.named_gate(args.e)
        f = sf.ops.get(args.f) or qnum.named_gate(args.f)
        d = qnum.diamond_distance(e, f, budget=args.budget or 8, seed=_seed(args))
        out.write(json.dumps({"kind": "diamond", "lower_bound": d}) + "\n")
        return EXIT_OK
    if not args.p or not args.q:
        raise UsageError(f"--kind {args.kind} needs --p and --q")
    p, q = _proc(sf, args.p), _proc(sf, args.q)
    fn = dsrb_estimate if args.kind == "srb" else dsb_estimate
    iv = fn(p, q, sf.env, _options(args, sf))
    out.write(iv.to_json() + "\n")
    return EXIT_OK


def corpus_files() -> list[tuple[str, str]]:
    root = resources.files("qccs") / "corpus"
    return sorted((p.name, p.read_text(encoding="utf-8")) for p in root.iterdir() if p.name.endswith(".qccs"))


def cmd_selftest(args, out) -> int:
    from .selftest import run_selftest
    ok = run_selftest(out, seed=_seed(args), quick=args.quick)
    return EXIT_OK if ok else EXIT_REFUTED


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for random state suites (default: $QCCS_SEED or 0)")
    common.add_argument("--fresh", type=int, default=None, help="fresh variables per type in the register (default 1)")
    common.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work runs single-threaded")
    ap = _Parser(prog="qccs", description="Semantics, reduction and bisimulation checking for qCCS processes.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("parse", help="parse and check a file")
    p.add_argument("file")
    p.add_argument("-v", "--verbose", action="store_true", help="print the resolved processes")

    for name, hlp in (("steps", "list transitions from a configuration"), ("lts", "export the transition system")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("file")
        p.add_argument("--proc", required=True)
        p.add_argument("--state", default=None)
        p.add_argument("--depth", type=int, default=64)
        p.add_argument("--max-nodes", type=int, default=10_000)
        if name == "steps":
            p.add_argument("--show-states", action="store_true", help="print successor density matrices")
        else:
            p.add_argument("--format", choices=("dot", "json"), default="dot")
            p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("nf", help="print the operation-reduction normal form")
    p.add_argument("file")
    p.add_argument("--proc", required=True)

    for name in ("bisim", "rbisim"):
        p = sub.add_parser(name, help=("strong" if name == "bisim" else "reduction") + " bisimilarity")
        p.add_argument("file")
        p.add_argument("--p", required=True)
        p.add_argument("--q", required=True)
        p.add_argument("--states", default="")
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--random", type=int, default=None, help="number of random product states in the suite")

    p = sub.add_parser("distance", help="bisimulation or diamond distances")
    p.add_argument("file")
    p.add_argument("--kind", choices=("sb", "srb", "diamond"), required=True)
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--e")
    p.add_argument("--f")
    p.add_argument("--states", default="")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--random", type=int, default=None)

    p = sub.add_parser("selftest", help="replay the bundled examples and law suites")
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    return ap


COMMANDS = {
    "parse": cmd_parse, "steps": cmd_steps, "lts": cmd_lts, "nf": cmd_nf, "bisim": cmd_bisim,
    "rbisim": cmd_bisim, "distance": cmd_distance, "selftest": cmd_selftest,
}


def run(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.fresh is not None and args.fresh < 1:
            raise UsageError("--fresh must be at least 1")
        if getattr(args, "depth", None) is not None and args.depth < 0:
            raise UsageError("--depth must be non-negative")
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        err.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    except FileNotFoundError as e:
        err.write(f"error: {e}\n")
        return EXIT_NOINPUT
    except ParseError as e:
        for d in e.diagnostics:
            err.write(f"{getattr(args, 'file', '')}:{d}\n")
        return EXIT_PARSE
    except SemanticsError as e:
        err.write(f"semantics error: {e}\n")
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001 - surface as an internal failure with a diagnostic
        err.write(f"internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
