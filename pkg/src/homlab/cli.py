"""Command-line front end.

Exit codes: 0 when every check is ok, 1 on any violation, 2 when the worst
outcome is inconclusive, 64 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from gmpy2 import mpq as Q

from . import __version__, chains, indep, oligo, suite, zariski
from .embed import pinching_pair, spreading_pair
from .metric import validate_space
from .monoid import MonoidError, make_monoid
from .report import INCONCLUSIVE, OK, VIOLATION, Check, worst
from .rng import SplitMix64, derive_seed
from .urysohn import Generator

SCHEMA = "v1"
EXIT = {OK: 0, VIOLATION: 1, INCONCLUSIVE: 2}
USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- argument types ------------------------------------------------------------------


def fraction(text: str):
    try:
        return Q(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None


def monoid_arg(args):
    try:
        return make_monoid(args.monoid, args.bound)
    except MonoidError as exc:
        raise UsageError(f"bad monoid: {exc}") from None


def structure_arg(args) -> oligo.Structure:
    kind = args.kind
    if kind in ("vec_fq", "affine_fq"):
        params = {"q": args.q, "dim": args.dim}
    elif kind == "copies_kn":
        params = {"n": args.n, "copies": args.copies}
    else:
        params = {"size": args.size}
    try:
        return oligo.make_structure(kind, **params)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad structure: {exc}") from None


def _add_structure(p):
    p.add_argument("--kind", default="vec_fq", choices=sorted(oligo.KINDS))
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--copies", type=int, default=3)


def _add_monoid(p):
    p.add_argument("--monoid", default="q_nonneg")
    p.add_argument("--bound", type=fraction, default=None)


# -- output --------------------------------------------------------------------------


def dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def write_report(path: Path | None, checks: list[Check], seed, timings: dict,
                 figure: bool = True) -> None:
    """The report holds only deterministic content; wall-clock times go to a
    sidecar file so identical runs give identical reports."""
    checks = sorted(checks, key=lambda c: c.name)
    body = {"schema": SCHEMA, "version": __version__, "seed": seed,
            "status": worst(c.status for c in checks),
            "checks": [c.to_json() for c in checks]}
    dump(body, path)
    if path is None:
        return
    dump({"schema": SCHEMA, "runtime_ms": timings}, path.with_suffix(".timings.json"))
    if figure and checks:
        from .figures import status_figure
        status_figure(checks, path.with_suffix(".png"))


def summarise(checks: list[Check]) -> int:
    for c in sorted(checks, key=lambda c: c.name):
        print(f"{c.status:<13} {c.name}", file=sys.stderr)
    return EXIT[worst(c.status for c in checks)] if checks else 0


def timed(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, round((time.perf_counter() - t) * 1000)


def _finish(args, checks: list[Check], timings: dict) -> int:
    write_report(args.report, checks, args.seed, timings)
    return summarise(checks)


# -- commands ------------------------------------------------------------------------


def cmd_gen(args) -> int:
    m = monoid_arg(args)
    g = Generator(m).run(args.steps)
    bad = validate_space(g.space())
    obj = g.to_json()
    obj["schema"] = SCHEMA
    dump(obj, args.out)
    if args.out is not None:
        from .figures import distance_figure
        distance_figure(g.space(), args.out.with_suffix(".png"))
    print(f"{len(g)} points after {args.steps} steps", file=sys.stderr)
    return EXIT[VIOLATION] if bad is not None else 0


def _cmd_pair(args, build, check, title) -> int:
    m = monoid_arg(args)
    if not m.contains(args.eps) or args.eps == m.zero:
        raise UsageError(f"eps {args.eps} is not a nonzero value of {m.kind.value}")
    c = check(m, args.eps, args.advances, args.a)
    g = Generator(m).grow_to(12)
    left, right = build(g, args.a, args.eps)
    for _ in range(args.advances):
        left.advance()
        right.apply_at(left.order[-1])
    obj = {"schema": SCHEMA, "monoid": m.describe(), "a": args.a, "eps": m.to_json(args.eps),
           "left": left.to_json(), "right": right.to_json(), "check": c.to_json(),
           "space": g.space().to_json()}
    dump(obj, args.out)
    if args.out is not None:
        from .figures import pair_figure
        pair_figure(g, left, right, args.a, args.eps, args.out.with_suffix(".png"), title)
    return summarise([c])


def cmd_pinch(args) -> int:
    return _cmd_pair(args, pinching_pair, suite.pinching_check, "pinching pair")


def cmd_spread(args) -> int:
    return _cmd_pair(args, spreading_pair, suite.spreading_check, "spreading pair")


def cmd_zariski(args) -> int:
    m = monoid_arg(args)
    if args.what == "centre":
        c, ms = timed(suite.criterion_centre, args.seed)
        return _finish(args, [c], {c.name: ms})
    g = Generator(m).run(args.steps)
    if args.what == "O":
        c, ms = timed(zariski.check_O_characterization, g, args.a, args.eps, args.samples,
                      args.depth, args.seed)
    else:
        try:
            c, ms = timed(zariski.check_containments, g, args.a, args.b, args.zeta, args.eta,
                          args.eps, args.samples, args.depth, args.seed)
        except zariski.ParameterViolation as exc:
            raise UsageError(str(exc)) from None
    return _finish(args, [c], {c.name: ms})


def _parse_set(S: oligo.Structure, text: str) -> list:
    try:
        return [S.parse(t.strip()) for t in text.split(",") if t.strip()]
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot parse element: {exc}") from None


def cmd_oligo(args) -> int:
    S = structure_arg(args)
    A = _parse_set(S, args.set)
    closure = sorted(S.acl(A), key=S.key)
    obj = {"schema": SCHEMA, "structure": S.describe(), "set": [S.fmt(x) for x in A],
           "acl": [S.fmt(x) for x in closure]}
    dump(obj, args.out)
    return 0


def cmd_chains(args) -> int:
    S = structure_arg(args)
    if args.chain is not None:
        C = chains.Chain.from_json(S, json.loads(args.chain.read_text(encoding="utf-8")))
    else:
        if not isinstance(S, oligo.VecFq):
            raise UsageError("a random chain needs --kind vec_fq; pass --chain otherwise")
        C = suite.random_chain_over(S, [S.basis(1)], args.length,
                                    SplitMix64(derive_seed(args.seed, "chain")))
    A = chains.chain_over(C) if args.A is None else S.acl(_parse_set(S, args.A))
    if A is None:
        raise UsageError("consecutive terms do not meet in a common set; pass --A")
    try:
        c, ms = timed(chains.reachability_check, S, A, C, args.samples, args.budget, args.seed)
    except oligo.PreconditionFailed as exc:
        raise UsageError(str(exc)) from None
    return _finish(args, [c], {c.name: ms})


def cmd_indep(args) -> int:
    S = structure_arg(args)
    if args.what == "axioms":
        rel = indep.algebraic(S) if args.relation == "algebraic" else indep.always(S)
        checks, ms = timed(indep.axiom_suite, S, rel, args.samples, args.seed)
        checks = list(checks.values())
        return _finish(args, checks, {"indep.axioms": ms})
    if args.omega not in indep.OMEGAS:
        raise UsageError(f"unknown omega {args.omega!r}; choose from {sorted(indep.OMEGAS)}")
    try:
        omega = indep.OMEGAS[args.omega](S)
    except (TypeError, AttributeError, oligo.PreconditionFailed) as exc:
        raise UsageError(f"{args.omega} does not apply to {S.kind}: {exc}") from None
    delta = indep.DELTAS[args.delta](S)
    c, ms = timed(indep.sink_check, S, omega, delta, args.k, args.depth, args.samples,
                  args.seed, delta_name=args.delta)
    return _finish(args, [c], {c.name: ms})


def cmd_verify_all(args) -> int:
    timings = {}

    def done(c, ms):
        timings[c.name] = ms
        print(f"{c.status:<13} {c.name}  ({ms} ms)", file=sys.stderr, flush=True)

    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise UsageError(f"--only takes criterion numbers, got {args.only!r}") from None
    checks = suite.run_suite(args.seed, args.quick, args.inject, only, done)
    write_report(args.report, checks, args.seed, timings)
    return EXIT[worst(c.status for c in checks)]


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="homlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="grow a finite prefix of a Urysohn space")
    _add_monoid(gen)
    gen.add_argument("--steps", type=int, default=50)
    gen.add_argument("--out", type=Path)
    gen.set_defaults(func=cmd_gen)

    for name, func, helptext in (("pinch", cmd_pinch, "pinching pair at a point"),
                                 ("spread", cmd_spread, "spreading pair at a point")):
        q = sub.add_parser(name, help=helptext)
        _add_monoid(q)
        q.add_argument("--eps", type=fraction, default=Q(1, 2))
        q.add_argument("--advances", type=int, default=30)
        q.add_argument("--a", type=int, default=0)
        q.add_argument("--out", type=Path)
        q.set_defaults(func=func)

    z = sub.add_parser("zariski", help="sampled neighbourhood checks")
    z.add_argument("what", choices=["O", "containments", "centre"])
    _add_monoid(z)
    z.add_argument("--steps", type=int, default=400)
    z.add_argument("--samples", type=int, default=100)
    z.add_argument("--depth", type=int, default=30)
    z.add_argument("--a", type=int, default=0)
    z.add_argument("--b", type=int, default=3)
    z.add_argument("--eps", type=fraction, default=Q(1, 2))
    z.add_argument("--zeta", type=fraction, default=Q(1, 8))
    z.add_argument("--eta", type=fraction, default=Q(1, 8))
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--report", type=Path)
    z.set_defaults(func=cmd_zariski)

    o = sub.add_parser("oligo", help="structure queries")
    o.add_argument("what", choices=["acl"])
    _add_structure(o)
    o.add_argument("--set", default="")
    o.add_argument("--out", type=Path)
    o.set_defaults(func=cmd_oligo)

    c = sub.add_parser("chains", help="chain stabiliser checks")
    c.add_argument("what", choices=["reach"])
    _add_structure(c)
    c.add_argument("--chain", type=Path, help="JSON with 'tuples' and 'acl_closed'")
    c.add_argument("--A", help="comma-separated base set (default: the common intersection)")
    c.add_argument("--length", type=int, default=2)
    c.add_argument("--samples", type=int, default=20)
    c.add_argument("--budget", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--report", type=Path)
    c.set_defaults(func=cmd_chains)

    i = sub.add_parser("indep", help="independence relations and sinks")
    i.add_argument("what", choices=["axioms", "sink"])
    _add_structure(i)
    i.add_argument("--relation", choices=["algebraic", "always"], default="algebraic")
    i.add_argument("--samples", type=int, default=100)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--omega", default="even_span")
    i.add_argument("--delta", choices=sorted(indep.DELTAS), default="acl_empty")
    i.add_argument("--k", type=int, default=1)
    i.add_argument("--depth", type=int, default=20)
    i.add_argument("--report", type=Path)
    i.set_defaults(func=cmd_indep)

    v = sub.add_parser("verify-all", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("--inject", choices=["broken_minus"],
                   help="fault injection: run the minus criterion on a broken monoid")
    v.add_argument("--report", type=Path, default=Path("verify-all.json"))
    v.set_defaults(func=cmd_verify_all)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
