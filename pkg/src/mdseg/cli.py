"""Command-line surface: synth, segment, landscape, bench, eval.

Every command is deterministic given its seed flags.  Failures exit
nonzero after printing a single machine-readable JSON line of the form
{"error": "..."} to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict

import numpy as np

from .core import Partition, SegConfig, distance
from .io import (
    BENCH_CSV_HEADER,
    RunReport,
    read_image,
    report_to_json,
    write_image,
)
from .metrics import dsc, landscape_chain
from .optimizer import run
from .pipeline import median_filter, segment_patchwise, segment_together
from .synth import NoiseSpec, ShapeSpec, add_noise, make_pseudo_qr, make_shape

__all__ = ["main"]


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _parse_size(text: str):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise CliError(f"bad --size {text!r}, expected WxH") from None
    if w < 1 or h < 1:
        raise CliError("--size dimensions must be positive")
    return w, h


def _parse_lengths(text: str):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise CliError(f"bad --lengths {text!r}") from None


def _build_parser() -> _Parser:
    p = _Parser(prog="mdseg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic image")
    sp.add_argument("--kind", required=True,
                    choices=["circle", "square", "triangle", "star", "qr"])
    sp.add_argument("--size", default=None, help="WxH, default 200x200 "
                                                 "(100x100 for qr)")
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--truth", default=None)

    sg = sub.add_parser("segment", help="segment a grayscale image")
    sg.add_argument("--in", dest="infile", required=True)
    sg.add_argument("--mode", required=True,
                    choices=["full", "patch", "together"])
    sg.add_argument("--p1", type=float, default=1.0)
    sg.add_argument("--p2", type=float, default=0.0)
    sg.add_argument("--patch-len", type=int, default=None)
    sg.add_argument("--stride", type=int, default=None)
    sg.add_argument("--vote-threshold", type=float, default=None)
    sg.add_argument("--netgain", choices=["exact", "asymptotic"],
                    default="exact")
    sg.add_argument("--tset", choices=["strict", "sorted"], default="sorted")
    sg.add_argument("--init", choices=["random", "threshold"],
                    default="random")
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("--max-sweeps", type=int, default=100)
    sg.add_argument("--median-window", type=int, default=None,
                    help="apply a median filter of this odd size to the "
                         "output mask (no filtering unless given)")
    sg.add_argument("--out", required=True)
    sg.add_argument("--report", default=None)
    sg.add_argument("--truth", default=None)

    sl = sub.add_parser("landscape", help="sample the distance around a "
                                          "reference partition")
    sl.add_argument("--in", dest="infile", required=True)
    sl.add_argument("--truth", required=True)
    sl.add_argument("--step", type=int, default=1)
    sl.add_argument("--seed", type=int, default=0)
    sl.add_argument("--out", required=True)

    sb = sub.add_parser("bench", help="patch-length runtime scaling table")
    sb.add_argument("--lengths", default="4,8,16,32,36,40,44,48")
    sb.add_argument("--reps", type=int, default=1)
    sb.add_argument("--size", type=int, default=200)
    sb.add_argument("--sigma", type=float, default=0.5)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--max-windows", type=int, default=None,
                    help="time only this many windows per length, evenly "
                         "sampled; totals are extrapolated")
    sb.add_argument("--out", required=True)

    se = sub.add_parser("eval", help="Dice similarity of two masks")
    se.add_argument("--pred", required=True)
    se.add_argument("--truth", required=True)
    return p


def _mask_from_image(img) -> np.ndarray:
    return img > 0.5


def _cmd_synth(args) -> int:
    if args.kind == "qr":
        w, h = _parse_size(args.size) if args.size else (100, 100)
        img, truth = make_pseudo_qr(w, h, (w * h) // 2, args.seed)
    else:
        w, h = _parse_size(args.size) if args.size else (200, 200)
        img, truth = make_shape(ShapeSpec(kind=args.kind, width=w, height=h))
    if args.sigma > 0:
        img = add_noise(img, NoiseSpec(sigma=args.sigma, seed=args.seed))
    write_image(args.out, img)
    if args.truth:
        write_image(args.truth, truth.side1_mask((h, w)).astype(float))
    return 0


def _cmd_segment(args) -> int:
    patch_flags = {
        "--patch-len": args.patch_len,
        "--stride": args.stride,
        "--vote-threshold": args.vote_threshold,
    }
    if args.mode == "full":
        given = [name for name, val in patch_flags.items() if val is not None]
        if given:
            raise CliError(f"{', '.join(given)} not valid with --mode full")
    elif args.patch_len is None:
        raise CliError(f"--patch-len is required with --mode {args.mode}")
    if args.median_window is not None and (
            args.median_window < 1 or args.median_window % 2 == 0):
        raise CliError("--median-window must be odd and positive")

    cfg = SegConfig(
        p1=args.p1,
        p2=args.p2,
        netgain_mode=args.netgain,
        tset_mode=args.tset,
        init=args.init,
        init_seed=args.seed,
        max_sweeps=args.max_sweeps,
        patch_len=args.patch_len,
        stride=args.stride if args.stride is not None else 2,
        vote_threshold=(args.vote_threshold
                        if args.vote_threshold is not None else 0.5),
        median_window=(args.median_window
                       if args.median_window is not None else 3),
    )
    img = read_image(args.infile)
    t0 = time.perf_counter()
    sweep_dicts = []
    if args.mode == "full":
        part, stats = run(img, cfg)
        sweep_dicts = [asdict(s) for s in stats]
    elif args.mode == "patch":
        part = segment_patchwise(img, cfg)
    else:
        part = segment_together(img, cfg)
    mask = part.side1_mask(img.shape)
    if args.median_window is not None and args.median_window > 1:
        mask = median_filter(mask, args.median_window)
        part = Partition.from_mask(mask)
    elapsed = time.perf_counter() - t0
    write_image(args.out, mask.astype(float))

    score = None
    if args.truth:
        truth_mask = _mask_from_image(read_image(args.truth))
        score = dsc(truth_mask, mask)
        print(f"dsc {score}")
    if args.report:
        final = (distance(img, part, cfg)
                 if part.n1 and part.n2 else float("nan"))
        report = RunReport(
            config=asdict(cfg),
            mode=args.mode,
            sweeps=sweep_dicts,
            final_distance=final,
            dsc=score,
            elapsed_seconds=elapsed,
        )
        with open(args.report, "w", encoding="ascii") as fh:
            fh.write(report_to_json(report))
    return 0


def _cmd_landscape(args) -> int:
    img = read_image(args.infile)
    truth = Partition.from_mask(_mask_from_image(read_image(args.truth)))
    points = landscape_chain(img, truth, args.seed, args.step)
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["offset", "distance"])
        for pt in points:
            writer.writerow([pt.offset, repr(pt.distance)])
    return 0


def _cmd_bench(args) -> int:
    from .bench import bench_harness, bench_image

    lengths = _parse_lengths(args.lengths)
    if not lengths:
        raise CliError("--lengths is empty")
    img = bench_image(args.size, args.sigma, args.seed)
    records = bench_harness(lengths, args.reps, img,
                            max_windows=args.max_windows)
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_CSV_HEADER)
        for rec in records:
            writer.writerow(rec.csv_row())
    return 0


def _cmd_eval(args) -> int:
    pred = _mask_from_image(read_image(args.pred))
    truth = _mask_from_image(read_image(args.truth))
    print(dsc(pred, truth))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "segment": _cmd_segment,
    "landscape": _cmd_landscape,
    "bench": _cmd_bench,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - uniform machine-readable exit
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
