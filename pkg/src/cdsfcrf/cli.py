"""Command-line pipeline: phantom -> mask -> undersample -> reconstruct -> evaluate.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
divergence.

CSV schemas
-----------
trace (reconstruct --trace):   iteration,unary,pairwise,total,grad_norm
evaluate:                      psnr,ssim,rel_l2,height,width
sweep (sweep.csv):             ratio,lines,achieved_ratio,method,psnr,ssim,rel_l2,iterations,status

PSNR of an exact match is written as ``inf``.
"""

import argparse
import csv
import io as _io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from .errors import CDSFCRFError, DivergenceError
from .io import (
    atomic_write_text,
    read_image,
    read_kspace,
    read_kv,
    read_pbm,
    write_image,
    write_kspace,
    write_kv,
    write_pbm,
    write_pgm,
)
from .metrics import CSV_FIELDS, evaluate
from .optimizer import reconstruct
from .phantom import PhantomSpec, default_prostate_spec, generate_phantom
from .transform import (
    apply_mask,
    dft2_forward,
    lines_for_ratio,
    radial_mask,
    sampling_ratio,
    zero_filled_recon,
)

log = logging.getLogger("cdsfcrf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

TRACE_FIELDS = ("iteration", "unary", "pairwise", "total", "grad_norm")
SWEEP_FIELDS = ("ratio", "lines", "achieved_ratio", "method", "psnr", "ssim", "rel_l2",
                "iterations", "status")


class UsageError(Exception):
    pass


# Helpers -------------------------------------------------------------------

def _sibling(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _write_manifest(out_path, command, params, inputs, outputs, started, seed=None):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "params": params,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "seed": seed,
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    atomic_write_text(_sibling(out_path, ".manifest.json"), json.dumps(manifest, indent=2) + "\n")


def _csv_text(fields, rows):
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in fields})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return v


def _parse_overrides(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_config(args):
    overrides = _parse_overrides(args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return config_mod.load(args.config, overrides)


def trace_rows(trace):
    return [
        {
            "iteration": t.iteration,
            "unary": t.energy.unary,
            "pairwise": t.energy.pairwise,
            "total": t.energy.total,
            "grad_norm": t.grad_norm,
        }
        for t in trace
    ]


# Commands ------------------------------------------------------------------

def cmd_phantom(args):
    started = time.perf_counter()
    if args.spec:
        spec = PhantomSpec.from_dict(read_kv(args.spec))
    else:
        spec = default_prostate_spec(args.width, args.height, args.seed)
    img = generate_phantom(spec)
    out = Path(args.out)
    write_image(out, img)
    write_pgm(_sibling(out, ".pgm"), img)
    spec_path = _sibling(out, ".spec.txt")
    write_kv(spec_path, spec.to_dict())
    _write_manifest(
        out, "phantom", spec.to_dict(), {"spec": args.spec} if args.spec else {},
        {"image": out, "preview": _sibling(out, ".pgm"), "spec": spec_path},
        started, seed=spec.rng_seed,
    )
    print(f"phantom {spec.width}x{spec.height} seed={spec.rng_seed} -> {out}")
    return EXIT_OK


def cmd_mask(args):
    started = time.perf_counter()
    if (args.lines is None) == (args.ratio is None):
        raise UsageError("give exactly one of --lines or --ratio")
    lines = args.lines if args.lines is not None else lines_for_ratio(args.width, args.height, args.ratio)
    mask = radial_mask(args.width, args.height, lines)
    achieved = sampling_ratio(mask)
    out = Path(args.out)
    write_pbm(out, mask)
    outputs = {"mask": out}
    if args.figure:
        from .plotting import plot_mask

        plot_mask(args.figure, mask)
        outputs["figure"] = args.figure
    log.info("mask %dx%d lines=%d achieved ratio=%.6f", args.width, args.height, lines, achieved)
    _write_manifest(
        out, "mask",
        {"width": args.width, "height": args.height, "lines": lines,
         "target_ratio": args.ratio, "achieved_ratio": achieved},
        {}, outputs, started,
    )
    print(f"lines={lines} ratio={achieved:.6f}")
    return EXIT_OK


def cmd_undersample(args):
    started = time.perf_counter()
    img = read_image(args.image)
    mask = read_pbm(args.mask)
    ks = apply_mask(dft2_forward(img), mask)
    write_kspace(args.out, ks)
    _write_manifest(
        args.out, "undersample", {"achieved_ratio": sampling_ratio(mask)},
        {"image": args.image, "mask": args.mask}, {"kspace": args.out}, started,
    )
    print(f"kept {int(mask.sum())}/{mask.size} bins -> {args.out}")
    return EXIT_OK


def cmd_reconstruct(args):
    started = time.perf_counter()
    cfg = _load_config(args)
    ks = read_kspace(args.kspace)
    mask = read_pbm(args.mask)
    result = reconstruct(ks, mask, cfg)
    out = Path(args.out)
    write_image(out, result.image)
    write_pgm(_sibling(out, ".pgm"), result.image)
    outputs = {"image": out, "preview": _sibling(out, ".pgm")}
    if args.trace:
        atomic_write_text(args.trace, _csv_text(TRACE_FIELDS, trace_rows(result.trace)))
        outputs["trace"] = args.trace
    if args.figure:
        from .plotting import plot_trace

        plot_trace(args.figure, result.trace)
        outputs["figure"] = args.figure
    params = config_mod.to_dict(cfg)
    params.update(iterations_run=result.iterations_run, stop_reason=result.stop_reason)
    _write_manifest(
        out, "reconstruct", params,
        {"kspace": args.kspace, "mask": args.mask, "config": args.config or ""},
        outputs, started, seed=cfg.cliques.seed,
    )
    print(f"{result.iterations_run} iterations ({result.stop_reason}) -> {out}")
    return EXIT_OK


def cmd_evaluate(args):
    started = time.perf_counter()
    report = evaluate(read_image(args.truth), read_image(args.test), args.window, args.peak)
    atomic_write_text(args.out, _csv_text(CSV_FIELDS, [report.csv_row()]))
    _write_manifest(
        args.out, "evaluate", {"window": args.window, "peak": args.peak},
        {"truth": args.truth, "test": args.test}, {"report": args.out}, started,
    )
    print(f"psnr={report.psnr:.4f} ssim={report.ssim:.6f} rel_l2={report.rel_l2:.6g}")
    return EXIT_OK


def _sweep_one(truth, ratio, cfg, ratio_dir, window, figures):
    """Run one ratio; returns its table rows. Failures become status rows."""
    height, width = truth.shape
    rows = []
    base = {"ratio": ratio, "lines": "", "achieved_ratio": float("nan")}
    try:
        ratio_dir.mkdir(parents=True, exist_ok=True)
        lines = lines_for_ratio(width, height, ratio)
        mask = radial_mask(width, height, lines)
        base.update(lines=lines, achieved_ratio=sampling_ratio(mask))
        ks = apply_mask(dft2_forward(truth), mask)
        write_pbm(ratio_dir / "mask.pbm", mask)
        write_kspace(ratio_dir / "kspace.cdks", ks)

        zf = zero_filled_recon(ks)
        write_image(ratio_dir / "zero_filled.cdim", zf)
        zf_report = evaluate(truth, zf, window)
        rows.append({**base, "method": "zero_filled", **zf_report.csv_row(),
                     "iterations": 0, "status": "ok"})

        result = reconstruct(ks, mask, cfg)
        write_image(ratio_dir / "recon.cdim", result.image)
        if result.trace:
            atomic_write_text(ratio_dir / "trace.csv", _csv_text(TRACE_FIELDS, trace_rows(result.trace)))
        cd_report = evaluate(truth, result.image, window)
        rows.append({**base, "method": "cdsfcrf", **cd_report.csv_row(),
                     "iterations": result.iterations_run, "status": "ok"})
        if figures:
            from .plotting import plot_reconstruction

            plot_reconstruction(ratio_dir / "comparison.png", truth, zf, result.image, mask,
                                {"zero_filled": zf_report, "cdsfcrf": cd_report})
    except (CDSFCRFError, OSError) as exc:
        log.error("ratio %s failed: %s", ratio, exc)
        done = {r["method"] for r in rows}
        for method in ("zero_filled", "cdsfcrf"):
            if method not in done:
                rows.append({**base, "method": method, "psnr": float("nan"),
                             "ssim": float("nan"), "rel_l2": float("nan"),
                             "iterations": "", "status": f"error: {exc}"})
    return rows


def _sweep_task(payload):
    truth, ratio, cfg, ratio_dir, window, figures = payload
    return _sweep_one(truth, ratio, cfg, Path(ratio_dir), window, figures)


def cmd_sweep(args):
    started = time.perf_counter()
    try:
        ratios = sorted({float(r) for r in args.ratios.split(",") if r.strip()})
    except ValueError as exc:
        raise UsageError(f"bad --ratios list {args.ratios!r}") from exc
    if not ratios:
        raise UsageError("--ratios is empty")
    cfg = _load_config(args)
    truth = read_image(args.image)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(truth, r, cfg, str(out_dir / f"ratio_{r:.4f}"), args.window, not args.no_figures)
             for r in ratios]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = [row for chunk in results for row in chunk]
    table = out_dir / "sweep.csv"
    atomic_write_text(table, _csv_text(SWEEP_FIELDS, rows))
    outputs = {"table": table}
    if not args.no_figures:
        from .plotting import plot_sweep

        plot_sweep(out_dir / "sweep.png", rows)
        outputs["figure"] = out_dir / "sweep.png"
    _write_manifest(
        table, "sweep", {"ratios": ratios, "window": args.window, **config_mod.to_dict(cfg)},
        {"image": args.image, "config": args.config or ""}, outputs, started, seed=cfg.cliques.seed,
    )
    for row in rows:
        print(f"{row['ratio']:.4f} {row['method']:<12} psnr={row['psnr']:.3f} "
              f"ssim={row['ssim']:.4f} {row['status']}")
    return EXIT_OK


# Parser --------------------------------------------------------------------

def _add_config_args(p):
    p.add_argument("--config", help="key = value file of ReconConfig fields")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, help="clique sampling seed (overrides config)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdsfcrf",
        description="Cross-domain stochastic CRF reconstruction for radially undersampled MRI.",
        epilog=__doc__.split("CSV schemas", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="render the synthetic prostate phantom")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--seed", type=int, default=0, help="lesion placement seed")
    p.add_argument("--spec", help="render this spec file instead of the default spec")
    p.add_argument("--out", required=True, help="output .cdim path")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("mask", help="build a radial sampling mask")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--lines", type=int)
    p.add_argument("--ratio", type=float)
    p.add_argument("--out", required=True, help="output .pbm path")
    p.add_argument("--figure", help="also render the mask to this image file")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("undersample", help="transform an image and keep the masked bins")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True, help="output .cdks path")
    p.set_defaults(func=cmd_undersample)

    p = sub.add_parser("reconstruct", help="run the CD-SFCRF gradient descent")
    p.add_argument("--kspace", required=True)
    p.add_argument("--mask", required=True)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output .cdim path")
    p.add_argument("--trace", help="write the per-iteration energy CSV here")
    p.add_argument("--figure", help="render the energy trace to this image file")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="PSNR / SSIM / relative L2 of two images")
    p.add_argument("--truth", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--peak", type=float, default=1.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="compare CD-SFCRF and zero filling across sampling ratios")
    p.add_argument("--image", required=True, help="ground-truth .cdim")
    p.add_argument("--ratios", required=True, help="comma-separated target ratios")
    _add_config_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--jobs", type=int, default=1, help="ratios processed in parallel")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CDSFCRFError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
