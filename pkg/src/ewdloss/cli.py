"""Command-line front end.

Exit codes: 0 success, 1 I/O error, 2 usage or validation error,
3 verification failure.  Angles are degrees on the command line.  Every
command is deterministic; ``--seed`` defaults to 0.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import List, Sequence

import numpy as np

from . import verify
from .ewd import LossConfig
from .grad import check_gradients
from .harness import (CurveSpec, ManifestError, compare_losses, load_manifest, standard_suite,
                      fit, sweep_curve)

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3

CURVE_HEADER = ["ratio", "dtheta_deg", "loss", "value"]
TRACE_HEADER = ["scenario", "step", "loss", "grad_norm", "iou", "match_k"]
COMPARE_HEADER = ["scenario", "loss", "status", "steps", "steps_to_iou", "initial_dtheta_deg",
                  "final_dtheta_deg", "initial_iou", "final_iou"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """12 significant digits, locale independent."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _jsonable(x):
    if isinstance(x, float):
        return float(format(x, ".12g")) if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def parse_floats(text: str, what: str) -> List[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{what}: empty list")
    return vals


def parse_range(text: str) -> List[float]:
    """``start:stop:step``, inclusive of ``stop`` when it lies on the grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--dtheta: expected start:stop:step, got {text!r}")
    try:
        lo, hi, step = map(float, parts)
    except ValueError:
        raise UsageError(f"--dtheta: bad number in {text!r}") from None
    if not step > 0 or hi < lo:
        raise UsageError("--dtheta: need step > 0 and stop >= start")
    n = int(math.floor((hi - lo) / step + 1e-9))
    if n > 1_000_000:
        raise UsageError("--dtheta: grid too large")
    return [lo + i * step for i in range(n + 1)]


def parse_losses(text: str) -> List[LossConfig]:
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(LossConfig.named(name))
        except ValueError as e:
            raise UsageError(str(e)) from None
    if not out:
        raise UsageError("no losses given")
    return out


# -- output ------------------------------------------------------------------

def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def svg_plot(series, title: str = "", xlabel: str = "", ylabel: str = "",
             width: int = 640, height: int = 400) -> str:
    """Static line plot; ``series`` is a list of ``(label, xs, ys)``."""
    left, right, top, bottom = 60, 160, 30, 40
    pw, ph = width - left - right, height - top - bottom
    finite = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if math.isfinite(y)]
    xs_all = [p[0] for p in finite] or [0.0, 1.0]
    ys_all = [p[1] for p in finite] or [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
           f'width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle">{_esc(title)}</text>',
           f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>',
           f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 14 {top + ph / 2:.1f})">{_esc(ylabel)}</text>']
    for v, anchor, xx, yy in ((x0, "start", left, top + ph + 14), (x1, "end", left + pw, top + ph + 14)):
        out.append(f'<text x="{xx}" y="{yy}" text-anchor="{anchor}">{fmt(v)}</text>')
    out.append(f'<text x="{left - 4}" y="{top + ph}" text-anchor="end">{fmt(y0)}</text>')
    out.append(f'<text x="{left - 4}" y="{top + 8}" text-anchor="end">{fmt(y1)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 12 + 14 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- commands ----------------------------------------------------------------

def cmd_curve(args) -> int:
    ratios = parse_floats(args.ratios, "--ratios")
    if any(not r >= 1.0 for r in ratios):
        raise UsageError("--ratios: aspect ratios must be >= 1 (use the reciprocal box)")
    grid = parse_range(args.dtheta)
    cfgs = parse_losses(args.losses)
    if not args.area > 0:
        raise UsageError("--area must be positive")
    rows = sweep_curve(CurveSpec(tuple(ratios), tuple(grid), tuple(cfgs), args.area))
    if args.format == "csv":
        text = _csv_text(CURVE_HEADER, [(r.ratio, r.dtheta_deg, r.loss, r.value) for r in rows])
    elif args.format == "json":
        text = json.dumps(_jsonable([{"ratio": r.ratio, "dtheta_deg": r.dtheta_deg, "loss": r.loss,
                                      "value": r.value, "match_k": r.match_k} for r in rows]),
                          indent=1) + "\n"
    else:
        series = {}
        for r in rows:
            xs, ys = series.setdefault(f"{r.loss} r={fmt(r.ratio)}", ([], []))
            xs.append(r.dtheta_deg)
            ys.append(r.value)
        text = svg_plot([(k, xs, ys) for k, (xs, ys) in series.items()],
                        "loss vs angle offset", "dtheta (deg)", "loss")
    _emit(text, args.out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    losses = [s.strip() for s in args.losses.split(",") if s.strip()]
    bad = [s for s in losses if s not in ("egwd", "edwd")]
    if bad or not losses:
        raise UsageError(f"--losses: analytic gradients exist for egwd and edwd only, got {bad or losses}")
    rep = check_gradients(args.trials, args.seed, losses, rel=args.tol, abs_floor=args.abs_tol)
    for name in losses:
        print(f"{name} max_rel_err={fmt(rep.max_error[name])} checked={rep.checked[name]} "
              f"skipped_ties={rep.skipped_ties[name]}")
    if rep.ok():
        return EXIT_OK
    for pred, target, cfg, err in rep.failures[:10]:
        print(f"MISMATCH err={fmt(err)} pred={list(map(fmt, pred.astuple()))} "
              f"target={list(map(fmt, target.astuple()))} cfg={json.dumps(cfg.to_dict())}",
              file=sys.stderr)
    return EXIT_VERIFY


def _load_scenarios(path: str):
    return standard_suite() if path == "standard" else load_manifest(path)


def cmd_fit(args) -> int:
    scenarios = _load_scenarios(args.manifest)
    if args.scenario:
        scenarios = [s for s in scenarios if s.name in args.scenario]
        if not scenarios:
            raise UsageError(f"no scenario named {args.scenario}")
    if args.loss:
        cfg = parse_losses(args.loss)
        if len(cfg) != 1:
            raise UsageError("--loss takes a single loss name")
        kept = []
        for s in scenarios:
            try:
                kept.append(s.with_loss(cfg[0]))
            except ValueError as e:
                print(f"skipping {s.name}: {e}", file=sys.stderr)
        if not kept:
            raise UsageError(f"{cfg[0].name} applies to none of the selected scenarios")
        scenarios = kept
    traces = [fit(s) for s in scenarios]
    if args.format == "csv":
        text = _csv_text(TRACE_HEADER, [(t.scenario, r.step, r.loss, r.grad_norm, r.iou, r.match_k)
                                        for t in traces for r in t.records])
    elif args.format == "json":
        text = json.dumps(_jsonable([{
            "scenario": t.scenario, "status": t.status,
            "records": [{"step": r.step, "params": list(r.params), "loss": r.loss,
                         "grad_norm": r.grad_norm, "iou": r.iou, "match_k": r.match_k}
                        for r in t.records]} for t in traces]), indent=1) + "\n"
    else:
        text = svg_plot([(t.scenario, [r.step for r in t.records], [r.iou for r in t.records])
                         for t in traces], "rotated IoU during fitting", "step", "IoU")
    _emit(text, args.out)
    for t in traces:
        print(f"{t.scenario}: {t.status} after {t.final.step} steps, iou={fmt(t.final.iou)}",
              file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    fn = verify.SUITES[args.suite]
    kw = {"seed": args.seed}
    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        kw["trials"] = args.trials
    res = fn(**kw)
    line = f"{res.name} trials={res.trials} max_dev={fmt(res.max_dev)} tol={fmt(res.tol)}"
    print(line + (f" {res.detail}" if res.detail else ""))
    return EXIT_OK if res.passed else EXIT_VERIFY


def cmd_compare(args) -> int:
    scenarios = _load_scenarios(args.manifest)
    cfgs = parse_losses(args.losses)
    boxes = [s for s in scenarios if not hasattr(s.target, "corners")]
    rows = compare_losses(boxes, cfgs, args.iou)
    table = [(r.scenario, r.loss, r.status, r.steps, r.steps_to_iou, r.initial_dtheta_deg,
              r.final_dtheta_deg, r.initial_iou, r.final_iou) for r in rows]
    if args.format == "csv":
        text = _csv_text(COMPARE_HEADER, table)
    else:
        text = json.dumps(_jsonable([dict(zip(COMPARE_HEADER, t)) for t in table]), indent=1) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ewdloss", description="Edge Wasserstein losses for oriented boxes.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curve", help="loss vs angle offset for several aspect ratios")
    c.add_argument("--ratios", default="1,2,4,8", help="comma-separated w/h ratios, each >= 1")
    c.add_argument("--dtheta", default="-90:90:1", help="start:stop:step in degrees")
    c.add_argument("--losses", default="edwd,kld,smoothl1_min",
                   help="comma-separated loss names")
    c.add_argument("--area", type=float, default=1.0, help="box area shared by all ratios")
    c.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    c.add_argument("--out", default="-", help="output file, '-' for stdout")
    c.set_defaults(func=cmd_curve)

    g = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    g.add_argument("--trials", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-4, help="relative tolerance")
    g.add_argument("--abs-tol", type=float, default=1e-6, help="absolute floor")
    g.add_argument("--losses", default="egwd,edwd")
    g.set_defaults(func=cmd_gradcheck)

    f = sub.add_parser("fit", help="gradient-descent fits from a scenario manifest")
    f.add_argument("manifest", help="JSON manifest path, or 'standard' for the bundled suite")
    f.add_argument("--loss", help="override every scenario's loss (e.g. edwd, gwd)")
    f.add_argument("--scenario", action="append", help="only run the named scenario(s)")
    f.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    f.add_argument("--out", default="-")
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("verify", help="closed form vs oracle sweeps")
    v.add_argument("suite", choices=sorted(verify.SUITES))
    v.add_argument("--trials", type=int, help="defaults to the suite's own count")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("compare", help="steps to IoU and final errors per loss and scenario")
    m.add_argument("manifest", nargs="?", default="standard", help="defaults to the bundled suite")
    m.add_argument("--losses", default="edwd,egwd,gwd,kld,smoothl1_min")
    m.add_argument("--iou", type=float, default=0.9, help="IoU level for steps_to_iou")
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.add_argument("--out", default="-")
    m.set_defaults(func=cmd_compare)
    return p


def _glue_negative_values(argv: List[str]) -> List[str]:
    # "--dtheta -90:90:1" would otherwise read the range as an option
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "--dtheta" and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(list(sys.argv[1:] if argv is None else argv)))
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"ewdloss {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ManifestError as e:
        print(f"ewdloss {args.command}: manifest error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"ewdloss {args.command}: {e}", file=sys.stderr)
        return EXIT_IO
