"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config
from .errors import CelforgeError, FormatError, InvalidInputError, NoValidPixelsError
from .evaluation import evaluate_dirs, line_metrics, read_tags
from .flo import read_flo
from .imgproc import check_same_size, read_png, write_png
from .linework import edt_squared, edt_squared_brute, extract_sketch, nedt
from .mining import (
    DedupModel, FlowDir, TripletFlows, dedup_features, fit_dedup, mine, read_cuts, score_triplet,
    write_manifest,
)
from .parallel import configure_threads, resolve_workers
from .synth import cel_frame
from .warp import halfway_guess, softmax_splat

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message, parser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 540x960, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return h, w


def _crop(text: str) -> tuple[int, int, int, int]:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"crop must be x,y,w,h, got {text!r}") from None
    return x, y, w, h


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config document; flags override it")
    common.add_argument("--workers", type=int, help="worker count (default: $CELFORGE_WORKERS or all cores)")

    p = _Parser(prog="celforge", description="Line metrics, splat interpolation and triplet mining for 2D animation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("mine", parents=[common], help="mine training triplets from a frame sequence")
    s.add_argument("--frames", type=Path, required=True, help="directory of PNG frames, ordered by name")
    s.add_argument("--flows", type=Path, required=True, help="directory of <src>_to_<dst>.flo files")
    s.add_argument("--cuts", type=Path, required=True, help="cut list: cut_id,start,end per line")
    s.add_argument("--rrld-threshold", type=float)
    s.add_argument("--min-norm", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--dedup-model", type=Path)
    s.add_argument("--out", type=Path, required=True, help="manifest path (JSON lines)")

    s = sub.add_parser("rrld", parents=[common], help="score one triplet from its two middle-frame flows")
    s.add_argument("--flow-prev", type=Path, required=True, help="flow from middle to previous frame")
    s.add_argument("--flow-next", type=Path, required=True, help="flow from middle to next frame")
    s.add_argument("--min-norm", type=float)
    s.add_argument("--verbose", action="store_true", help="also print restricted-set fraction and pan flag")

    d = sub.add_parser("dedup", help="duplicate-frame detector")
    dsub = d.add_subparsers(dest="dedup_command", parser_class=_Parser, metavar="ACTION")
    dsub.required = True
    s = dsub.add_parser("fit", parents=[common], help="fit the detector on labelled frame pairs")
    s.add_argument("--pairs", type=Path, required=True, help="lines of frame_a,frame_b,label (1 = duplicate)")
    s.add_argument("--frames", type=Path, required=True, help="directory the pair names are relative to")
    s.add_argument("--out", type=Path, required=True)
    s = dsub.add_parser("apply", parents=[common], help="flag duplicates between consecutive frames")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--frames", type=Path, required=True)
    s.add_argument("--out", type=Path, help="CSV output (default: stdout)")

    s = sub.add_parser("interp", parents=[common], help="non-neural halfway interpolation of two frames")
    s.add_argument("--frame0", type=Path, required=True)
    s.add_argument("--frame1", type=Path, required=True)
    s.add_argument("--flow01", type=Path, required=True)
    s.add_argument("--flow10", type=Path, required=True)
    s.add_argument("--t", type=float, default=0.5)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--holes", type=Path, help="optional PNG of pixels neither warp reached")

    s = sub.add_parser("eval", parents=[common], help="score predictions against ground truth")
    s.add_argument("--pred", type=Path, required=True)
    s.add_argument("--gt", type=Path, required=True)
    s.add_argument("--tags", type=Path, help="lines of sample_id,tag[,tag...]")
    s.add_argument("--crop", type=_crop, help="x,y,w,h region applied to every pair")
    s.add_argument("--out", type=Path, required=True, help="report path; a .txt table is written alongside")

    s = sub.add_parser("edt", parents=[common], help="write the normalized distance transform of a frame")
    s.add_argument("--image", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--tau", type=float)
    s.add_argument("--sketch-out", type=Path, help="also write the binary sketch")

    s = sub.add_parser("bench", parents=[common], help="time a kernel on synthetic frames")
    s.add_argument("--op", choices=["edt", "brute-edt", "metric", "splat", "interp"], default="edt")
    s.add_argument("--size", type=_size, default=(540, 960), help="HxW, e.g. 540x960")
    s.add_argument("--iters", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--compare-brute", action="store_true", help="with --op edt: report speedup over brute force")
    return p


def _config(args) -> Config:
    cfg = Config.load(args.config) if getattr(args, "config", None) else Config()
    return cfg.override(
        workers=getattr(args, "workers", None),
        seed=getattr(args, "seed", None),
        rrld_threshold=getattr(args, "rrld_threshold", None),
        min_norm=getattr(args, "min_norm", None),
        nedt_tau=getattr(args, "tau", None),
    )


def cmd_mine(args, cfg: Config, workers: int) -> int:
    frames = sorted(args.frames.glob("*.png"))
    if len(frames) < 3:
        raise InvalidInputError(f"{args.frames}: need at least 3 PNG frames, found {len(frames)}")
    dedup = DedupModel.load(args.dedup_model) if args.dedup_model else None
    cuts = read_cuts(args.cuts)
    records = mine(frames, FlowDir(args.flows), cuts, cfg.rrld_threshold, cfg.seed, dedup,
                   cfg.min_norm, cfg.pan, workers)
    write_manifest(records, args.out)
    accepted = sum(r.accepted for r in records)
    print(f"{len(records)} records, {accepted} accepted across {len(cuts)} cuts -> {args.out}")
    return EXIT_OK


def cmd_rrld(args, cfg: Config, workers: int) -> int:
    flows = TripletFlows(read_flo(args.flow_prev), read_flo(args.flow_next))
    s = score_triplet(flows, cfg.rrld_threshold, cfg.min_norm, cfg.pan)
    if s.rrld is None:
        raise NoValidPixelsError("no pixels pass the flow-norm and in-frame tests")
    print(f"{s.rrld:.6f}")
    if args.verbose:
        print(f"omega_fraction {s.omega_fraction:.6f}")
        print(f"is_pan {str(s.is_pan).lower()}")
        print(f"accept {str(s.reason is None).lower()}")
    return EXIT_OK


def _resolve_frame(root: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else root / p


def cmd_dedup(args, cfg: Config, workers: int) -> int:
    if args.dedup_command == "fit":
        samples = []
        for n, line in enumerate(args.pairs.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise FormatError(f"{args.pairs}:{n}: expected frame_a,frame_b,0|1")
            a = read_png(_resolve_frame(args.frames, parts[0]))
            b = read_png(_resolve_frame(args.frames, parts[1]))
            samples.append((dedup_features(a, b), parts[2] == "1"))
        model = fit_dedup(samples)
        model.save(args.out)
        correct = sum(model.is_duplicate(f) == lab for f, lab in samples)
        print(f"fitted on {len(samples)} pairs, training accuracy {correct / len(samples):.3f} -> {args.out}")
        return EXIT_OK

    model = DedupModel.load(args.model)
    frames = sorted(args.frames.glob("*.png"))
    lines = ["frame_a,frame_b,mean,max,score,duplicate"]
    prev = read_png(frames[0]) if frames else None
    for a, b in zip(frames[:-1], frames[1:]):
        cur = read_png(b)
        f = dedup_features(prev, cur)
        lines.append(f"{a.name},{b.name},{f[0]:.6f},{f[1]:.6f},{model.score(*f):.6f},{int(model.is_duplicate(f))}")
        prev = cur
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_interp(args, cfg: Config, workers: int) -> int:
    i0, i1 = read_png(args.frame0), read_png(args.frame1)
    f01, f10 = read_flo(args.flow01), read_flo(args.flow10)
    check_same_size((f"frame0 {args.frame0.name}", i0), (f"frame1 {args.frame1.name}", i1),
                    (f"flow01 {args.flow01.name}", f01), (f"flow10 {args.flow10.name}", f10))
    if i0.shape[2] != 3 or i1.shape[2] != 3:
        raise InvalidInputError("interp needs RGB frames")
    out, holes = halfway_guess(i0, i1, f01, f10, args.t, k=cfg.open_kernel, return_holes=True)
    write_png(args.out, out)
    if args.holes:
        write_png(args.holes, holes)
    print(f"wrote {args.out} ({int(holes.sum())} hole pixels)")
    return EXIT_OK


def cmd_eval(args, cfg: Config, workers: int) -> int:
    tags = read_tags(args.tags) if args.tags else None
    report = evaluate_dirs(args.pred, args.gt, tags, cfg.dog, args.crop, workers)
    args.out.write_text(report.to_jsonl())
    table = report.to_table()
    args.out.with_suffix(".txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_edt(args, cfg: Config, workers: int) -> int:
    img = read_png(args.image)
    field = nedt(img, cfg.nedt_tau, cfg.dog)
    write_png(args.out, field[:, :, None])
    if args.sketch_out:
        write_png(args.sketch_out, extract_sketch(img, cfg.dog))
    print(f"wrote {args.out}")
    return EXIT_OK


def _machine() -> str:
    return f"{platform.processor() or platform.machine()}, {os.cpu_count()} logical cores, Python {platform.python_version()}"


def _timed(fn, iters):
    fn()  # warm-up; excludes JIT compilation
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return times


def cmd_bench(args, cfg: Config, workers: int) -> int:
    h, w = args.size
    rng = np.random.default_rng(cfg.seed)
    if args.iters < 1:
        raise UsageError("--iters must be >= 1", None)
    a = cel_frame(h, w, rng)
    b = cel_frame(h, w, rng)
    sketch = extract_sketch(a, cfg.dog)
    if args.op == "edt":
        fn = lambda: edt_squared(sketch)
    elif args.op == "brute-edt":
        fn = lambda: edt_squared_brute(sketch)
    elif args.op == "metric":
        fn = lambda: line_metrics(a, b, cfg.dog, cfg.nedt_tau)
    elif args.op == "splat":
        flow = rng.uniform(-8, 8, (h, w, 2)).astype(np.float32)
        z = -rng.uniform(0, 3, (h, w, 1)).astype(np.float32)
        fn = lambda: softmax_splat(a, flow, z)
    else:
        f01 = rng.uniform(-8, 8, (h, w, 2)).astype(np.float32)
        f10 = -f01
        fn = lambda: halfway_guess(a, b, f01, f10, 0.5)

    print(f"op {args.op}  size {h}x{w}  workers {workers}  machine: {_machine()}")
    times = _timed(fn, args.iters)
    for i, t in enumerate(times):
        print(f"iter {i:3d}  {t * 1e3:9.3f} ms  {h * w / t:14.0f} px/s")
    mean = sum(times) / len(times)
    print(f"mean {mean * 1e3:.3f} ms  min {min(times) * 1e3:.3f} ms  {h * w / mean:.0f} px/s")
    if args.compare_brute and args.op == "edt":
        brute = _timed(lambda: edt_squared_brute(sketch), max(1, min(args.iters, 3)))
        bmean = sum(brute) / len(brute)
        exact = np.array_equal(edt_squared(sketch), edt_squared_brute(sketch))
        print(f"brute-force mean {bmean * 1e3:.3f} ms  speedup {bmean / mean:.1f}x  identical {str(exact).lower()}")
    return EXIT_OK


COMMANDS = {
    "mine": cmd_mine, "rrld": cmd_rrld, "dedup": cmd_dedup, "interp": cmd_interp,
    "eval": cmd_eval, "edt": cmd_edt, "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
        workers = resolve_workers(cfg.workers)
        configure_threads(workers)
        return COMMANDS[args.command](args, cfg, workers)
    except UsageError as exc:
        (exc.parser or parser).print_usage(sys.stderr)
        print(f"celforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CelforgeError, OSError) as exc:
        print(f"celforge: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # bad option values that argparse could not catch, e.g. --workers 0
        print(f"celforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
