"""Command-line interface.

    coulthresh scan            stability diagram over a (q1, q2) grid
    coulthresh trace-border    certified border along rays
    coulthresh critical-charge two-electron atom critical charge
    coulthresh verify SUITE    bound verification (greens, decay, clr, spreading, inequalities)

Options may also come from a ``key = value`` file given with --config; flags
given on the command line win.  Exit codes: 0 success, 1 a verified bound
failed, 2 invalid configuration, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
SUITES = ("greens", "decay", "clr", "spreading", "inequalities")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_masses(text):
    try:
        m = tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"bad masses: {text!r}") from None
    if len(m) != 3 or not all(x > 0 and math.isfinite(x) for x in m):
        raise ConfigError("masses must be three positive numbers m1,m2,m3")
    return m


def parse_range(text):
    """'lo:hi' or a single value."""
    parts = str(text).split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad range: {text!r}") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or vals[0] > vals[1] or vals[0] < 0:
        raise ConfigError(f"range must be lo:hi with 0 <= lo <= hi, got {text!r}")
    return tuple(vals)


def grid_values(rng, step):
    lo, hi = rng
    if not step > 0:
        raise ConfigError("grid step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(n)]


def parse_float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad list: {text!r}") from None


def read_config(path):
    """Flat key = value file; '#' starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _positive(name, value):
    if not value > 0:
        raise ConfigError(f"{name} must be positive")
    return value


# ---------------------------------------------------------------------------
# output


def dumps_json(obj):
    from .greens import _jsonable

    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


_COLORS = {"CertifiedStable": "#1b7837", "Undecided": "#bbbbbb", "CriterionUnstable": "#c51b7d"}


def render_svg(points, borders=(), size=480, pad=48):
    """Scatter of (q1, q2, state) and optional border polylines."""
    qs = [p[0] for p in points] + [p[1] for p in points]
    for b in borders:
        qs += [c for xy in b for c in xy]
    top = max(qs + [1.0]) * 1.05

    def X(q):
        return pad + (size - 2 * pad) * q / top

    def Y(q):
        return size - pad - (size - 2 * pad) * q / top

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>',
           f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="black"/>',
           f'<text x="{size / 2:.1f}" y="{size - 12}" text-anchor="middle" font-size="14">q1</text>',
           f'<text x="14" y="{size / 2:.1f}" font-size="14">q2</text>']
    r = max(2.0, 0.3 * (size - 2 * pad) / max(2.0, math.sqrt(len(points) or 1)))
    for q1, q2, state in points:
        out.append(f'<circle cx="{X(q1):.2f}" cy="{Y(q2):.2f}" r="{r:.2f}" '
                   f'fill="{_COLORS.get(state, "#000000")}"><title>{state}</title></circle>')
    for b in borders:
        pts = " ".join(f"{X(a):.2f},{Y(c):.2f}" for a, c in b)
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _budget(args, size_default, trials_default):
    from .stability import Budget

    size = args.basis if args.basis is not None else size_default
    trials = args.trials if args.trials is not None else trials_default
    if size < 1 or trials < 1:
        raise ConfigError("basis and trials must be >= 1")
    return Budget(size=size, trials=trials, seed=args.seed, refine=args.refine,
                  eps_num=_positive("eps", args.eps))


def cmd_scan(args):
    from .kinematics import frame_from_masses
    from .stability import diagram_csv, scan

    masses = parse_masses(args.masses)
    step = _positive("grid", args.grid)
    q1 = grid_values(parse_range(args.q1), step)
    q2 = grid_values(parse_range(args.q2), step)
    budget = _budget(args, 24, 20)
    d = scan(frame_from_masses(*masses), q1, q2, budget, jobs=args.jobs)
    if args.format == "csv":
        text = diagram_csv(d)
    elif args.format == "json":
        text = dumps_json({"masses": list(d.masses), "metadata": d.metadata,
                           "points": [{"q1": v.q1, "q2": v.q2, "state": v.state.value,
                                       "margin": v.margin, "E0": v.E0, "E_thr": v.E_thr,
                                       "basis_size": v.basis_size} for v in d.points]})
    else:
        text = render_svg([(v.q1, v.q2, v.state.value) for v in d.points])
    emit(text, args.out)
    return EXIT_OK


def cmd_trace_border(args):
    from .kinematics import frame_from_masses
    from .stability import BorderPoint, border_records, trace_border

    masses = parse_masses(args.masses)
    res = _positive("tol", args.tol if args.tol is not None else 0.01)
    rays = parse_float_list(args.rays)
    if not rays or any(r <= 0 for r in rays):
        raise ConfigError("rays must be positive charges")
    sectors = ("upper", "lower") if args.sector == "both" else (args.sector,)
    budget = _budget(args, 24, 20)
    frame = frame_from_masses(*masses)
    records = {s: trace_border(frame, s, budget, res, rays, jobs=args.jobs) for s in sectors}
    if args.format == "json":
        text = dumps_json({"masses": list(masses), "resolution": res,
                           "budget": {"basis_size": budget.size, "trials": budget.trials,
                                      "seed": budget.seed, "refine": budget.refine},
                           "borders": {s: border_records(v) for s, v in records.items()}})
    elif args.format == "csv":
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sector", "fixed", "lo", "hi", "margin_lo", "margin_hi"])
        for s, pts in records.items():
            for p in pts:
                if isinstance(p, BorderPoint):
                    w.writerow([s, repr(p.fixed), repr(p.lo), repr(p.hi), repr(p.margin_lo),
                                repr(p.margin_hi)])
                else:
                    w.writerow([s, repr(p.fixed), "", "", "", ""])
        text = buf.getvalue()
    else:
        lines, dots = [], []
        for s, pts in records.items():
            line = [p.point("hi") for p in pts if isinstance(p, BorderPoint)]
            dots += [(a, b, "CertifiedStable") for a, b in line]
            if len(line) > 1:
                lines.append(line)
        text = render_svg(dots, lines)
    emit(text, args.out)
    return EXIT_OK


def cmd_critical_charge(args):
    from .stability import critical_charge_atomic

    tol = args.tol if args.tol is not None else 5e-3
    if not tol > 0:
        raise ConfigError("tol must be positive")
    M = float(args.nuclear_mass)
    if not M > 0:
        raise ConfigError("nuclear mass must be positive")
    budget = _budget(args, 50, 40)
    r = critical_charge_atomic(2, M, budget, tol)
    doc = {"Ne": 2, "M": "inf" if math.isinf(M) else M, "bracket": list(r.bracket),
           "width": r.bracket[1] - r.bracket[0], "tol": tol,
           "budget": {"basis_size": budget.size, "trials": budget.trials, "seed": budget.seed,
                      "refine": budget.refine, "eps_num": budget.eps_num},
           "iterations": [{"Z": z, "E0": e, "E_thr": t, "bound": b, "residual": res}
                          for z, e, t, b, res in r.iterations]}
    emit(dumps_json(doc), args.out)
    return EXIT_OK


# verification suites: each returns a list of report dicts with a "passed" key


def suite_inequalities(args):
    from .greens import verify_comparison_potential, verify_two_point_inequality

    n = args.samples or 100000
    reps = [verify_two_point_inequality(n, seed=args.seed)]
    reps += [verify_comparison_potential(A, n) for A in (0.01, 1.0, 4.0, 100.0)]
    return [r.to_dict() for r in reps]


def suite_greens(args):
    from .greens import (NormResult, op_norm_chi, verify_comparison_potential,
                         verify_far_field, verify_near_diagonal)

    n = args.samples or 200
    A, k = 1.0, 0.1
    reps = [verify_far_field(A, k, 2, n, seed=args.seed).to_dict(),
            verify_near_diagonal(A, k, 2, n // 2, seed=args.seed).to_dict(),
            verify_comparison_potential(A).to_dict()]
    for nn in (2, 4):
        v: NormResult = op_norm_chi(A, k, nn)
        ratio = v.value / nn
        reps.append({"name": "op_norm_chi", "params": {"A": A, "k": k, "n": nn},
                     "max_violation": ratio - (4.0 / A + 0.5), "tolerance": 0.0,
                     "passed": bool(ratio <= 4.0 / A + 0.5),
                     "extra": {"norm": v.value, "channel_norms": v.channel_norms}})
    return reps


def suite_decay(args):
    from . import cg_engine as cg
    from .decay_clr import budget_from_state, verify_decay, verify_moment_ratio
    from .stability import point_seed

    size = args.basis or 40
    trials = args.trials or 30
    spec = cg.atomic(1.0)
    basis = cg.optimize_basis(spec, size, trials, seed=point_seed(args.seed, 1.0))
    res = cg.ground_state(spec, basis)
    budget = budget_from_state(1.0, res.E0, spec.threshold)
    rep = verify_decay(spec, basis, res, budget, n_max=10)
    d = rep.to_dict()
    d.update({"name": "ahlrichs_moments", "passed": rep.passed, "E0": res.E0,
              "basis_size": len(basis)})
    sweep = verify_moment_ratio(np.linspace(0.0, 4.0, 9), np.geomspace(1e-3, 10.0, 9))
    return [d, sweep.to_dict()]


def suite_clr(args):
    from .decay_clr import verify_clr_grid

    rep = verify_clr_grid(np.geomspace(0.1, 50.0, 10), np.geomspace(0.2, 5.0, 10))
    return [rep.to_dict()]


def suite_spreading(args):
    from . import seq_diagnostics as sd

    rng = np.random.default_rng(args.seed)
    R_grid = np.linspace(0.0, 12.0, 5)
    reps = []
    g = sd.gaussian(3, 1.0)
    trans = [sd.translated(g, [2.0 * n, 0.0, 0.0]) for n in range(1, 17)]
    p = sd.probe_sequence(trans, R_grid, 0.9 * g.norm)
    reps.append({"name": "translation_family", "passed": p.spreads, "verdict": p.verdict,
                 "trailing_max": p.trailing_max.tolist()})
    fails = not_monotone = 0
    n_fam = 1000
    for _ in range(n_fam):
        fam, reach = sd.random_monotone_family(rng)
        a = 0.05 * max(f.norm for f in fam)
        fails += sd.probe_sequence(fam, np.linspace(0.0, reach, 6), a).spreads
        not_monotone += not sd.check_monotone_domination(fam)
    reps.append({"name": "monotone_families", "passed": fails == 0 and not_monotone == 0,
                 "families": n_fam, "spread_verdicts": int(fails),
                 "not_monotone": int(not_monotone)})
    u = lambda s: np.exp(-0.5 * s * s)
    seq = [sd.ProductRadial(u, (lambda c: (lambda t: c * np.exp(-0.5 * t * t)))(1 - 1 / n))
           for n in range(1, 13)]
    for w in ("exp", "power"):
        reps.append(sd.check_product_split(seq, 2.0, 0.5, weight=w, samples=args.samples or 100000,
                                           seed=args.seed).to_dict())
    return reps


SUITE_FUNCS = {"greens": suite_greens, "decay": suite_decay, "clr": suite_clr,
               "spreading": suite_spreading, "inequalities": suite_inequalities}


def cmd_verify(args):
    if args.suite not in SUITE_FUNCS:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    reports = SUITE_FUNCS[args.suite](args)
    ok = all(bool(r.get("passed")) for r in reports)
    doc = {"suite": args.suite, "seed": args.seed, "passed": ok, "reports": reports}
    emit(dumps_json(doc), args.out)
    for r in reports:
        print(f"{'PASS' if r.get('passed') else 'FAIL'} {r.get('name')}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json", "svg"), default=None)
    p.add_argument("--basis", type=int, default=None, help="basis size")
    p.add_argument("--trials", type=int, default=None, help="trials per basis slot")
    p.add_argument("--refine", type=int, default=1, help="refinement sweeps")
    p.add_argument("--eps", type=float, default=1e-6, help="certification margin")
    p.add_argument("--tol", type=float, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="coulthresh", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"coulthresh {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="stability diagram on a grid")
    _common(p)
    p.add_argument("--masses", default="1,1,1")
    p.add_argument("--q1", default="0.1:1.5")
    p.add_argument("--q2", default="0.1:1.5")
    p.add_argument("--grid", type=float, default=0.1)
    p.set_defaults(func=cmd_scan, fmt_default="csv")

    p = sub.add_parser("trace-border", help="bisect the certified border along rays")
    _common(p)
    p.add_argument("--masses", default="1,1,1")
    p.add_argument("--sector", choices=("upper", "lower", "both"), default="both")
    p.add_argument("--rays", default="1.0,1.25,1.5", help="fixed charges of the rays")
    p.set_defaults(func=cmd_trace_border, fmt_default="json")

    p = sub.add_parser("critical-charge", help="critical nuclear charge of a two-electron atom")
    _common(p)
    p.add_argument("--nuclear-mass", default="inf", type=float)
    p.set_defaults(func=cmd_critical_charge, fmt_default="json")

    p = sub.add_parser("verify", help="run a bound-verification suite")
    _common(p)
    p.add_argument("suite", help="|".join(SUITES))
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_verify, fmt_default="json")
    return ap


def _apply_config(parser, argv):
    """Config values become defaults of the chosen subcommand, so flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    cmd = next((a for a in argv if not a.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(cmd) if cmd else None
    if sub is None:
        return
    dests = {a.dest: a for a in sub._actions}
    conv = {}
    for k, v in cfg.items():
        if k not in dests or k in ("config", "help"):
            raise ConfigError(f"unknown config key {k!r}")
        t = dests[k].type
        try:
            conv[k] = t(v) if t is not None else v
        except ValueError:
            raise ConfigError(f"bad value for {k}: {v!r}") from None
        if dests[k].choices is not None and conv[k] not in dests[k].choices:
            raise ConfigError(f"bad value for {k}: {v!r}")
    sub.set_defaults(**conv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except ConfigError as e:
        print(f"coulthresh: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and EXIT_CONFIG
    if args.format is None:
        args.format = args.fmt_default
    if args.jobs < 1:
        print("coulthresh: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    from .kinematics import InvalidInput
    from .stability import BudgetInsufficient, ConsistencyError

    try:
        return args.func(args)
    except (ConfigError, InvalidInput) as e:
        print(f"coulthresh: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetInsufficient, ConsistencyError, ArithmeticError, RuntimeError,
            np.linalg.LinAlgError) as e:
        print(f"coulthresh: solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
