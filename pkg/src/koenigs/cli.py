"""Command-line interface: ``python -m koenigs <command> ...``.

Exit status is 0 when every check passes, 1 when a check fails or an
analysis raises, and 2 for usage or expression parse errors.  The report
goes to stdout unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import evaluate, iterate
from .dsl import CorpusEntry, default_corpus_path, load_corpus, parse
from .dynamics import classify, q_decide, step_analysis, step_decide, step_sequences
from .errors import CorpusError, KoenigsError, ParseError
from .linearize import (
    COMMUTE_TOL,
    DEFAULT_ORDER,
    METHODS,
    SLC_DEPTH,
    SLC_ORDER,
    commute_residual,
    koenigs_bp,
    slc_estimate,
)
from .metric import v_margins
from .numerics import DEFAULT_GRID, sample_grid
from .report import table_csv, to_csv, to_json
from .semigroup import REGISTRY, build_family, embed_search, generator_estimate, zero_step_semigroup_check

CLOSED_FORM_TOL = 0.05
DW_TOL = 1e-6
MULT_TOL = 1e-4
SLC_PARTNER_TOL = 1e-5
V_RADIUS = 1 / 3
MAX_COUNT = 10**6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _count(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 1 <= n <= MAX_COUNT:
        raise argparse.ArgumentTypeError(f"must lie in [1, {MAX_COUNT}], got {n}")
    return n


def _positive(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return x


def _map(text: str, flag: str):
    try:
        return parse(text)
    except ParseError as exc:
        exc.flag = flag
        raise


def _check(name, passed, value=None, tolerance=None):
    return {"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance}


# ------------------------------------------------------------ subcommands


def run_classify(args):
    phi = _map(args.map, "--map")
    rep = classify(phi, n_max=args.n_max, tol_mult=args.tol_mult)
    step = None
    if rep.kind == "boundary":
        step = step_analysis(phi, n_max=args.n_max).decision
    results = {
        "type": rep.type_label,
        "dw": rep.location,
        "kind": rep.kind,
        "multiplier": rep.multiplier,
        "multiplier_error": rep.multiplier_error,
        "automorphism": rep.automorphism,
        "step": step,
        "seed_spread": rep.seed_spread,
        "flags": list(rep.flags),
    }
    orb = iterate(phi, 0j, min(args.n_max, 256), on_exit="truncate")
    rows = [("orbit", k, p.real, p.imag, math.nan) for k, p in enumerate(orb.points)]
    z = sample_grid()
    margin = v_margins(phi, V_RADIUS, z)
    rows += [("v_margin", k, z[k].real, z[k].imag, margin[k]) for k in range(len(z))]
    return results, [], (("series", "index", "re", "im", "value"), rows)


def run_step(args):
    phi = _map(args.map, "--map")
    rep = step_sequences(phi, args.z0, args.n)
    d, q = rep.distortion, rep.q
    results = {
        "z0": rep.seed,
        "decision": step_decide(rep),
        "q_decision": q_decide(rep),
        "truncated_at": rep.truncated_at,
        "reason": rep.reason,
        "distortion_last": float(d[-1]),
        "q_last": float(q[-1]) if len(q) else math.nan,
        "distortion_limit": rep.distortion_limit,
        "q_limit": rep.q_limit,
        "flags": list(rep.flags),
    }
    rows = [(k, d[k], q[k] if k < len(q) else math.nan) for k in range(len(d))]
    return results, [], (("index", "distortion", "q"), rows)


def run_koenigs(args):
    phi = _map(args.map, "--map")
    approx = koenigs_bp(phi, args.n, order=args.order)
    z = sample_grid()
    b = approx(z)
    res = np.abs(approx(evaluate(phi, z)) - b - 1)
    results = {
        "depth": approx.depth,
        "order": approx.order,
        "grid": DEFAULT_GRID.describe(),
        "abel_residual_max": approx.residual_max,
        "abel_residual_mean": approx.residual_mean,
        "b_at_0": approx(0j),
    }
    rows = [(k, z[k].real, z[k].imag, b[k].real, b[k].imag, res[k]) for k in range(len(z))]
    return results, [], (("index", "re", "im", "b_re", "b_im", "abel_residual"), rows)


def run_slc(args):
    phi = _map(args.phi, "--phi")
    psi = _map(args.psi, "--psi")
    methods = METHODS if args.method == "all" else (args.method,)
    rep = slc_estimate(phi, psi, methods, n=args.n, order=args.order, tol=args.tol)
    results = {
        "c": rep.value,
        "identity": rep.identity,
        "commute_residual": rep.commute_residual,
        "disagreement": rep.disagreement,
        "methods": {
            m: {"value": e.value, "error": e.error, "status": e.status, "levels": e.levels}
            for m, e in rep.methods.items()
        },
        "flags": list(rep.flags),
    }
    checks = [_check("commutation", rep.commute_residual <= COMMUTE_TOL, rep.commute_residual, COMMUTE_TOL)]
    converged = [e for e in rep.methods.values() if e.status == "converged"]
    if len(converged) >= 2:
        checks.append(_check("cross-method disagreement", rep.disagreement <= args.tol, rep.disagreement, args.tol))
    rows = [(m, e.value.real, e.value.imag, e.error) for m, e in rep.methods.items()]
    return results, checks, (("method", "re", "im", "error"), rows)


def run_commute(args):
    phi = _map(args.phi, "--phi")
    psi = _map(args.psi, "--psi")
    z = sample_grid()
    gap = np.abs(evaluate(phi, evaluate(psi, z)) - evaluate(psi, evaluate(phi, z)))
    at0 = abs(complex(evaluate(phi, evaluate(psi, 0j))) - complex(evaluate(psi, evaluate(phi, 0j))))
    results = {
        "residual_max": commute_residual(phi, psi),
        "residual_at_0": at0,
        "koenigs_difference": None,
    }
    try:
        approx = koenigs_bp(phi, args.n, order=args.order)
        diff = approx(evaluate(psi, z)) - approx(z)
        mean = complex(np.mean(diff))
        results["koenigs_difference"] = {
            "mean": mean,
            "max_deviation_from_mean": float(np.max(np.abs(diff - mean))),
            "depth": args.n,
        }
    except KoenigsError as exc:
        results["koenigs_difference"] = {"skipped": exc.code, "reason": str(exc)}
    rows = [(k, z[k].real, z[k].imag, gap[k]) for k in range(len(z))]
    return results, [], (("index", "re", "im", "commute_gap"), rows)


def run_semigroup(args):
    fam = build_family(args.h, args.theta)
    gen = generator_estimate(fam, 0j)
    step = zero_step_semigroup_check(fam, 0j, args.t_max)
    results = {
        "h": fam.reg.name,
        "theta": fam.theta,
        "validity": fam.validity,
        "generator": {
            "estimate": gen.value,
            "closed_form": gen.closed_form,
            "error": gen.error,
            "flags": list(gen.flags),
        },
        "step": step.decision,
        "F_monotone": step.monotone,
        "F_last": float(step.F[-1]),
        "embed": None,
    }
    checks = [
        _check("semigroup laws", fam.validity["valid"], fam.validity["law_residual"], 1e-10),
        _check("generator vs closed form", abs(gen.value - gen.closed_form) <= 1e-6,
               abs(gen.value - gen.closed_form), 1e-6),
    ]
    if args.embed:
        phi = _map(args.embed, "--embed")
        emb = embed_search(phi, fam, (0.0, args.t_max_embed))
        results["embed"] = {"t0": emb.t0, "residual": emb.residual, "embeddable": emb.embeddable}
    rows = [(t, f) for t, f in zip(step.times, step.F)]
    return results, checks, (("t", "F"), rows)


def _entry_checks(entry: CorpusEntry, n: int, order: int):
    exp = entry.expected
    phi = entry.map
    out = {"name": entry.name, "expr": entry.expr}
    checks = []
    rep = classify(phi)
    out["type"] = rep.type_label
    out["dw"] = rep.location
    out["multiplier"] = rep.multiplier
    if exp.dw is not None:
        err = abs(rep.location - exp.dw)
        checks.append(_check(f"{entry.name}: dw", err <= DW_TOL, err, DW_TOL))
    if exp.type is not None:
        checks.append(_check(f"{entry.name}: type", rep.type_label == exp.type, rep.type_label, None))
    if exp.multiplier is not None:
        err = abs(rep.multiplier - exp.multiplier)
        checks.append(_check(f"{entry.name}: multiplier", err <= MULT_TOL, err, MULT_TOL))
    if exp.step is not None:
        dec = step_analysis(phi).decision if rep.kind == "boundary" else "not-applicable"
        out["step"] = dec
        checks.append(_check(f"{entry.name}: step", dec == exp.step, dec, None))
    if exp.koenigs_closed_form is not None:
        h = parse(exp.koenigs_closed_form)
        z = sample_grid()
        approx = koenigs_bp(phi, n, order=order)
        err = float(np.max(np.abs(approx(z) - (evaluate(h, z) - complex(evaluate(h, 0j))))))
        out["koenigs_error"] = err
        checks.append(_check(f"{entry.name}: koenigs closed form", err <= CLOSED_FORM_TOL, err, CLOSED_FORM_TOL))
    for partner, c in exp.slc_partners:
        r = slc_estimate(phi, parse(partner), ("koenigs",))
        err = abs(r.value - c)
        checks.append(_check(f"{entry.name}: slc {partner}", err <= SLC_PARTNER_TOL, err, SLC_PARTNER_TOL))
    return out, checks


def _threads() -> int:
    raw = os.environ.get("KOENIGS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"KOENIGS_THREADS must be an integer, got {raw!r}") from None


def run_corpus(args):
    path = Path(args.file) if args.file else default_corpus_path()
    entries = load_corpus(path)

    def one(entry):
        try:
            return _entry_checks(entry, args.n, args.order), None
        except KoenigsError as exc:
            return ({"name": entry.name, "expr": entry.expr}, []), {"entry": entry.name, "code": exc.code, "message": str(exc)}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        done = list(pool.map(one, entries))
    results = {"file": path.name, "entries": [d[0][0] for d in done]}
    checks = [c for d in done for c in d[0][1]]
    errors = [d[1] for d in done if d[1] is not None]
    rows = [(c["name"], c["passed"], c["value"] if not isinstance(c["value"], str) else math.nan) for c in checks]
    return results, checks, (("check", "passed", "value"), rows), errors


COMMANDS = {
    "classify": run_classify,
    "step": run_step,
    "koenigs": run_koenigs,
    "slc": run_slc,
    "commute": run_commute,
    "semigroup": run_semigroup,
    "corpus": run_corpus,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--emit-plot-data", metavar="PATH", help="write plot-ready CSV")
    common.add_argument("--timing", action="store_true", help="include wall-clock timing (breaks byte-identity)")

    p = _Parser(prog="koenigs", description="Dynamics and Koenigs linearisation of disc self-maps.")
    p.add_argument("--version", action="version", version=f"koenigs {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("classify", parents=[common], help="Denjoy-Wolff point and type")
    s.add_argument("--map", required=True)
    s.add_argument("--n-max", type=_count, default=4096)
    s.add_argument("--tol-mult", type=_positive, default=MULT_TOL)

    s = sub.add_parser("step", parents=[common], help="hyperbolic step along one orbit")
    s.add_argument("--map", required=True)
    s.add_argument("--z0", type=_complex_arg, default=0j)
    s.add_argument("--n", type=_count, default=4096)

    s = sub.add_parser("koenigs", parents=[common], help="approximate Koenigs function")
    s.add_argument("--map", required=True)
    s.add_argument("--n", type=_count, default=2048)
    s.add_argument("--order", type=_count, default=DEFAULT_ORDER)

    s = sub.add_parser("slc", parents=[common], help="linear coefficient of a commuting map")
    s.add_argument("--phi", required=True)
    s.add_argument("--psi", required=True)
    s.add_argument("--method", choices=("all",) + METHODS, default="all")
    s.add_argument("--n", type=_count, default=SLC_DEPTH)
    s.add_argument("--order", type=_count, default=SLC_ORDER)
    s.add_argument("--tol", type=_positive, default=1e-3)

    s = sub.add_parser("commute", parents=[common], help="commutation residual of two maps")
    s.add_argument("--phi", required=True)
    s.add_argument("--psi", required=True)
    s.add_argument("--n", type=_count, default=2048)
    s.add_argument("--order", type=_count, default=DEFAULT_ORDER)

    s = sub.add_parser("semigroup", parents=[common], help="semigroup family h^-1(h + t e^(i theta))")
    s.add_argument("--h", required=True, choices=sorted(REGISTRY))
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--embed", metavar="EXPR", help="search t0 with phi = phi_t0")
    s.add_argument("--t-max", type=_positive, default=4096.0)
    s.add_argument("--t-max-embed", type=_positive, default=4.0)

    s = sub.add_parser("corpus", parents=[common], help="check every corpus entry")
    s.add_argument("--file", help="corpus JSON (default: bundled corpus)")
    s.add_argument("--n", type=_count, default=2048)
    s.add_argument("--order", type=_count, default=DEFAULT_ORDER)
    return p


def _config(args) -> dict:
    skip = {"format", "out", "emit_plot_data", "timing", "command"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return cfg


def _write(text: str, dest) -> None:
    if dest:
        Path(dest).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    report = {
        "tool": "koenigs",
        "version": __version__,
        "command": args.command,
        "config": _config(args),
        "results": None,
        "checks": [],
        "errors": [],
        "timing": None,
    }
    start = time.perf_counter()
    code = 0
    plot = None
    try:
        out = COMMANDS[args.command](args)
        results, checks, plot = out[:3]
        report["results"] = results
        report["checks"] = checks
        if len(out) > 3:
            report["errors"] = out[3]
        if any(not c["passed"] for c in checks) or report["errors"]:
            code = 1
    except ParseError as exc:
        report["errors"] = [{"code": exc.code, "flag": getattr(exc, "flag", None),
                             "offset": exc.offset, "message": exc.message}]
        sys.stderr.write(f"parse error in {getattr(exc, 'flag', 'expression')}: {exc}\n")
        code = 2
    except (UsageError, CorpusError) as exc:
        report["errors"] = [{"code": getattr(exc, "code", "usage"), "message": str(exc)}]
        sys.stderr.write(f"error: {exc}\n")
        code = 2
    except KoenigsError as exc:
        report["errors"] = [{"code": exc.code, "message": str(exc)}]
        sys.stderr.write(f"{exc.code} error: {exc}\n")
        code = 1
    if args.timing:
        report["timing"] = {"seconds": time.perf_counter() - start}
    _write(to_json(report) if args.format == "json" else to_csv(report), args.out)
    if args.emit_plot_data and plot is not None:
        Path(args.emit_plot_data).write_text(table_csv(*plot), encoding="utf-8")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
