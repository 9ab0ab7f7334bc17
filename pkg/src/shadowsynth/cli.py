"""Command-line entry point: ``shadowsynth <command> [flags]``.

Exit codes: 0 on success, 1 for usage errors (unknown flags, bad values),
2 for data errors (unreadable inputs, malformed libraries, every item failing).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .decay import DecayParams, ParamLibrary, build_library, save_library
from .gradsuite import format_results, timed_suite
from .image import load_image, load_mask, save_mask
from .losses import color_loss, rec_loss
from .masks import GuidedFilterConfig, MorphConfig, umbra_penumbra_split
from .metrics import dataset_stats, dumps_report, restoration_aggregates, restoration_item, save_report
from .pipeline import MANIFEST_NAME, PipelineConfig, band_excluding_morph, load_manifest, run_batch
from .rng import derive_seed
from .synthetic import write_fixture_corpus

logger = logging.getLogger("shadowsynth")

U64_MAX = 2**64 - 1


class UsageError(Exception):
    """Bad command line; reported with usage text and exit code 1."""


class DataError(Exception):
    """Inputs exist but cannot be used; exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64 - 1], got {value}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_morph(p):
    d = MorphConfig()
    p.add_argument("--core-erode", type=_nonneg_int, default=d.core_erode_radius, help="core erosion radius in pixels")
    p.add_argument("--ring-gap", type=_nonneg_int, default=d.ring_gap, help="gap between mask edge and lit ring")
    p.add_argument("--ring-width", type=_pos_int, default=d.ring_width, help="lit ring width in pixels")


def _morph(args) -> MorphConfig:
    try:
        return MorphConfig(args.core_erode, args.ring_gap, args.ring_width)
    except ValueError as exc:
        raise UsageError(f"invalid morphology flags: {exc}") from exc


def _guided(args) -> GuidedFilterConfig:
    try:
        return GuidedFilterConfig(args.gf_radius, args.gf_eps)
    except ValueError as exc:
        raise UsageError(f"invalid guided-filter flags: {exc}") from exc


def _add_seed(p, default=0):
    p.add_argument("--seed", type=_u64, default=default, help="64-bit seed; all randomness derives from it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shadowsynth", description="Physics-guided shadow synthesis and evaluation.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("extract-params", help="estimate a decay-parameter library from real shadow images")
    p.add_argument("--images", required=True, help="directory of shadow images")
    p.add_argument("--masks", required=True, help="directory of hard masks (same base names)")
    p.add_argument("--library", required=True, help="output library path")
    _add_morph(p)

    p = sub.add_parser("synthesize", help="build shadowed/shadow-free/mask triplets")
    p.add_argument("--free", required=True, help="directory of shadow-free images")
    p.add_argument("--masks", required=True, help="directory of pseudo masks (same base names)")
    p.add_argument("--library", required=True, help="decay-parameter library")
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p)
    p.add_argument("--gf-radius", type=_pos_int, default=GuidedFilterConfig().radius)
    p.add_argument("--gf-eps", type=float, default=GuidedFilterConfig().epsilon)
    p.add_argument("--jobs", type=_pos_int, default=1)
    _add_morph(p)

    p = sub.add_parser("decompose", help="split a hard mask into umbra and penumbra")
    p.add_argument("--mask", "--masks", dest="mask", required=True, help="hard mask PNG")
    p.add_argument("--radius", "--split-radius", dest="radius", type=_nonneg_int, default=MorphConfig().split_radius)
    p.add_argument("--out", default=None, help="output directory (default: next to the mask)")

    p = sub.add_parser("evaluate", help="score restored images against shadow-free references")
    p.add_argument("--images", required=True, help="directory of restored images")
    p.add_argument("--free", required=True, help="directory of shadow-free references")
    p.add_argument("--masks", required=True, help="directory of shadow masks")
    p.add_argument("--report", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("stats", help="SLR, delta-a and entropy of a synthesized dataset")
    p.add_argument("--out", required=True, help="dataset directory holding the manifest")
    p.add_argument("--report", default=None, help="write the report here instead of stdout")
    p.add_argument("--percentile-range", type=float, default=None,
                   help="report the central p%% SLR interval instead of min/max")
    p.add_argument("--jobs", type=_pos_int, default=1)
    _add_morph(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable block")
    _add_seed(p, default=7)

    p = sub.add_parser("demo", help="synthesize and summarize a small fixture dataset")
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p)
    return parser


def _paired_names(image_dir, mask_dir):
    for d in (image_dir, mask_dir):
        if not os.path.isdir(d):
            raise DataError(f"not a directory: {d}")
    names = sorted(n for n in os.listdir(image_dir) if n.lower().endswith(".png"))
    if not names:
        raise DataError(f"no PNG files in {image_dir}")
    return names


def cmd_extract_params(args) -> int:
    cfg = _morph(args)
    pairs, sources, rejected = [], [], []
    for name in _paired_names(args.images, args.masks):
        try:
            img = load_image(os.path.join(args.images, name))
            mask = load_mask(os.path.join(args.masks, name))
        except (OSError, ValueError) as exc:
            rejected.append((name, str(exc)))
            continue
        pairs.append((img, mask))
        sources.append(name)
    library, failed = build_library(pairs, cfg, sources)
    rejected.extend(failed)
    for src, reason in rejected:
        print(f"rejected {src}: {reason}", file=sys.stderr)
    if len(library) == 0:
        raise DataError("no usable image/mask pair; library not written")
    save_library(library, args.library)
    print(f"wrote {len(library)} entries to {args.library} ({len(rejected)} rejected)")
    return 0


def cmd_synthesize(args) -> int:
    cfg = PipelineConfig(morph=_morph(args), guided=_guided(args))
    for d in (args.free, args.masks):
        if not os.path.isdir(d):
            raise DataError(f"not a directory: {d}")
    manifest = run_batch(args.free, args.masks, args.library, args.out, args.seed, cfg, jobs=args.jobs)
    n_ok, n_fail = len(manifest["records"]), len(manifest["failures"])
    for fail in manifest["failures"]:
        print(f"failed {fail['id']}: {fail['reason']}", file=sys.stderr)
    print(f"wrote {n_ok} triplets to {args.out} ({n_fail} failed)")
    if n_ok == 0 and n_fail > 0:
        raise DataError("every item failed")
    return 0


def cmd_decompose(args) -> int:
    mask = load_mask(args.mask)
    split = umbra_penumbra_split(mask, args.radius)
    out = args.out or os.path.dirname(os.path.abspath(args.mask))
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.mask))[0]
    paths = [os.path.join(out, f"{stem}_umbra.png"), os.path.join(out, f"{stem}_penumbra.png")]
    save_mask(paths[0], split.umbra)
    save_mask(paths[1], split.penumbra)
    if split.umbra_empty:
        print(f"warning: umbra is empty at radius {args.radius}", file=sys.stderr)
    print("\n".join(paths))
    return 0


def cmd_evaluate(args) -> int:
    items, failures = [], []
    for name in _paired_names(args.images, args.free):
        item_id = os.path.splitext(name)[0]
        try:
            pred = load_image(os.path.join(args.images, name))
            gt = load_image(os.path.join(args.free, name))
            mask = load_mask(os.path.join(args.masks, name))
            item = restoration_item(pred, gt, mask, item_id)
            item["losses"] = {"rec_l1": rec_loss(pred, gt), "color": color_loss(pred, gt)}
            items.append(item)
        except (OSError, ValueError) as exc:
            failures.append({"id": item_id, "reason": str(exc)})
    report = {"items": items, "aggregates": restoration_aggregates(items), "failures": failures}
    _emit(report, args.report)
    if not items:
        raise DataError("every item failed")
    return 0


def cmd_stats(args) -> int:
    path = os.path.join(args.out, MANIFEST_NAME)
    try:
        manifest = load_manifest(path)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc
    report = dataset_stats(manifest, _morph(args), root=args.out, percentile=args.percentile_range, jobs=args.jobs)
    _emit(report, args.report)
    if report["aggregates"]["count"] == 0 and report["failures"]:
        raise DataError("every item failed")
    return 0


def cmd_gradcheck(args) -> int:
    results, elapsed = timed_suite(args.seed)
    print(format_results(results, elapsed))
    return 0 if all(r.passed for r in results) else 2


DEMO_W = (0.30, 0.40, 0.50)


def cmd_demo(args) -> int:
    inputs = os.path.join(args.out, "inputs")
    free_dir, mask_dir = write_fixture_corpus(inputs, 10, derive_seed(args.seed, 0), size=128, radius_range=(30, 44))
    library = ParamLibrary(
        entries=[DecayParams(w=(w, w, w), b=(0.0, 0.0, 0.0)) for w in DEMO_W],
        sources=[f"planted-w{w}" for w in DEMO_W],
    )
    lib_path = os.path.join(args.out, "library.json")
    save_library(library, lib_path)
    dataset = os.path.join(args.out, "dataset")
    cfg = PipelineConfig()
    manifest = run_batch(free_dir, mask_dir, lib_path, dataset, derive_seed(args.seed, 1), cfg)
    report = dataset_stats(manifest, band_excluding_morph(cfg.guided), root=dataset)
    save_report(report, os.path.join(args.out, "stats.json"))
    planted = float(np.mean([r["params"]["w"][0] for r in manifest["records"]]))
    agg = report["aggregates"]
    print(f"triplets: {len(manifest['records'])} in {dataset}")
    print(f"mean SLR measured {agg['mean_slr']:.4f}, planted {planted:.4f}")
    return 0


COMMANDS = {
    "extract-params": cmd_extract_params,
    "synthesize": cmd_synthesize,
    "decompose": cmd_decompose,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
    "gradcheck": cmd_gradcheck,
    "demo": cmd_demo,
}


def _emit(report, path):
    if path:
        save_report(report, path)
    else:
        print(dumps_report(report))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"shadowsynth {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
