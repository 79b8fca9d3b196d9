"""Command-line frontend: train / synthesize / search / baseline / evaluate / phantom.

Every subcommand is deterministic given its inputs and --seed: rerunning
with identical arguments produces byte-identical output files.  Exit
status is 0 iff no error was reported.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .backend import active_backend
from .manifest import ManifestError, load_eval_cases, load_training_pairs, write_manifest
from .mapping import DEFAULT_MAX_ROWS, ModelFormatError, load_model, save_model
from .metrics import evaluate, report_to_text, report_to_tsv
from .nifti import NiftiError, read_nifti, write_nifti
from .phantom import make_phantom_pair
from .pipeline import (
    PipelineError,
    SearchConfig,
    search_synthesize,
    synthesize,
    train,
)
from .preprocess import complement, normalize, random_fill
from .rng import derive_seed
from .volume import brain_mask

log = logging.getLogger("brainsynth")


def _default_threads() -> int:
    env = os.environ.get("BRAINSYNTH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parse_labels(text: str) -> dict[str, int]:
    codes = {}
    for part in text.split(","):
        role, _, value = part.partition("=")
        codes[role.strip()] = int(value)
    return codes


def _parse_dims(values: list[int]) -> tuple[int, int, int]:
    if len(values) == 1:
        return (values[0],) * 3
    if len(values) == 3:
        return tuple(values)
    raise argparse.ArgumentTypeError("--dims takes one or three integers")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="brainsynth",
        description="Synthesize a missing MRI modality from another via "
        "cluster-based intensity mapping; includes baselines and evaluation.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-patient progress")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="build a model from a manifest of T1/T2 pairs")
    sp.add_argument("--manifest", required=True, help="TSV manifest: id, t1, t2[, seg]")
    sp.add_argument("--out-model", required=True, help="output model file")
    sp.add_argument("--k-macro", type=int, default=3, help="macro clusters (default 3)")
    sp.add_argument("--k-micro", type=int, default=100, help="micro clusters per tissue (default 100)")
    sp.add_argument("--max-rows", type=int, default=DEFAULT_MAX_ROWS, help="table compression limit")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    sp = sub.add_parser("synthesize", help="synthesize T2 from T1 with a trained model")
    sp.add_argument("--t1", required=True, help="input T1 NIfTI")
    sp.add_argument("--model", required=True, help="model file from 'train'")
    sp.add_argument("--out", required=True, help="output NIfTI (.nii or .nii.gz)")
    sp.add_argument(
        "--output-range",
        type=float,
        nargs=2,
        metavar=("LO", "HI"),
        default=None,
        help="rescale in-mask output from [0,1] to this range",
    )

    sp = sub.add_parser("search", help="per-query model from the w nearest training pairs")
    sp.add_argument("--t1", required=True, help="query T1 NIfTI")
    sp.add_argument("--manifest", required=True, help="TSV manifest: id, t1, t2[, seg]")
    sp.add_argument("--out", required=True, help="output NIfTI")
    sp.add_argument("--w", type=int, default=10, help="neighbor count (default 10)")
    sp.add_argument("--k-macro", type=int, default=5, help="macro clusters (default 5)")
    sp.add_argument("--k-micro", type=int, default=100, help="micro clusters (default 100)")
    sp.add_argument("--max-rows", type=int, default=DEFAULT_MAX_ROWS, help="table compression limit")
    sp.add_argument("--neighbors-out", default=None, help="chosen-neighbor list (default: OUT.neighbors.txt)")
    sp.add_argument("--save-model", default=None, help="also persist the per-query model")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    sp = sub.add_parser("baseline", help="complement or random baseline volume")
    sp.add_argument("--t1", required=True, help="input T1 NIfTI")
    sp.add_argument("--kind", required=True, choices=("complement", "random"))
    sp.add_argument("--out", required=True, help="output NIfTI")
    sp.add_argument("--seed", type=int, default=0, help="seed for the random baseline")

    sp = sub.add_parser("evaluate", help="score synthesized volumes and segmentations")
    sp.add_argument("--manifest", required=True, help="TSV manifest: id, synth, real[, pred_seg[, ref_seg]]")
    sp.add_argument(
        "--mode",
        default="ground-truth",
        choices=("ground-truth", "reference-segmentation"),
        help="what ref_seg means (expert truth vs real-scan segmentation)",
    )
    sp.add_argument("--out-report", required=True, help="output TSV report")
    sp.add_argument(
        "--labels",
        default="necrotic=1,edema=2,enhancing=4",
        help="tumor label codes, e.g. 'necrotic=1,edema=2,enhancing=4'",
    )
    sp.add_argument("--hd95-combine", default="max", choices=("max", "mean"))
    sp.add_argument("--hd95-surface", action="store_true", help="use surface voxels only")
    sp.add_argument(
        "--empty-penalty",
        type=float,
        default=None,
        help="HD95 when exactly one mask is empty (default: volume diagonal)",
    )

    sp = sub.add_parser("phantom", help="generate a synthetic T1/T2 corpus plus manifest")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--count", type=int, default=10, help="number of pairs (default 10)")
    sp.add_argument("--dims", type=int, nargs="+", default=[64], help="volume side(s), 1 or 3 ints")
    sp.add_argument("--tissues", type=int, default=4, help="tissue count in [2, 6]")
    sp.add_argument("--noise-sd", type=float, default=0.0, help="T2 Gaussian noise sigma")
    sp.add_argument("--seed", type=int, default=0)
    return p


def _cmd_train(args) -> int:
    pairs = load_training_pairs(args.manifest)
    mod = train(
        pairs,
        args.k_macro,
        args.k_micro,
        max_rows=args.max_rows,
        threads=args.threads if args.threads else _default_threads(),
    )
    save_model(mod, args.out_model)
    log.info("wrote model %s (%d patients)", args.out_model, len(pairs))
    return 0


def _cmd_synthesize(args) -> int:
    mod = load_model(args.model)
    t1 = read_nifti(args.t1)
    mask = brain_mask(t1)
    out_range = tuple(args.output_range) if args.output_range else None
    vol = synthesize(normalize(t1, mask), mod, mask=mask, out_range=out_range)
    write_nifti(vol, args.out)
    log.info("wrote %s", args.out)
    return 0


def _cmd_search(args) -> int:
    pairs = load_training_pairs(args.manifest)
    query = read_nifti(args.t1)
    cfg = SearchConfig(w=args.w, k_macro=args.k_macro, k_micro=args.k_micro)
    result = search_synthesize(
        query,
        pairs,
        cfg,
        max_rows=args.max_rows,
        threads=args.threads if args.threads else _default_threads(),
    )
    write_nifti(result.volume, args.out)
    neighbors_out = args.neighbors_out or args.out + ".neighbors.txt"
    Path(neighbors_out).write_text("\n".join(result.neighbors) + "\n")
    if args.save_model:
        save_model(result.model, args.save_model)
    log.info("wrote %s (neighbors: %s)", args.out, ", ".join(result.neighbors))
    return 0


def _cmd_baseline(args) -> int:
    t1 = read_nifti(args.t1)
    if args.kind == "complement":
        vol = complement(t1)
    else:
        vol = random_fill(t1, derive_seed(args.seed, 0))
    write_nifti(vol, args.out)
    log.info("wrote %s", args.out)
    return 0


def _cmd_evaluate(args) -> int:
    cases = load_eval_cases(args.manifest)
    report = evaluate(
        cases,
        mode=args.mode,
        label_codes=_parse_labels(args.labels),
        hd95_combine=args.hd95_combine,
        hd95_surface=args.hd95_surface,
        empty_penalty=args.empty_penalty,
    )
    Path(args.out_report).write_text(report_to_tsv(report))
    sys.stdout.write(report_to_text(report))
    if report.errors:
        for pid, msg in report.errors:
            log.error("patient %s failed: %s", pid, msg)
        return 1
    return 0


def _cmd_phantom(args) -> int:
    dims = _parse_dims(args.dims)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(args.count):
        pair = make_phantom_pair(
            seed=derive_seed(args.seed, i),
            dims=dims,
            tissue_count=args.tissues,
            noise_sd=args.noise_sd,
            pair_id=f"phantom{i:03d}",
        )
        t1_name = f"{pair.id}_t1.nii.gz"
        t2_name = f"{pair.id}_t2.nii.gz"
        write_nifti(pair.t1, out_dir / t1_name)
        write_nifti(pair.t2, out_dir / t2_name)
        rows.append((pair.id, t1_name, t2_name))
        log.info("generated %s", pair.id)
    write_manifest(out_dir / "manifest.tsv", rows)
    log.info("wrote %s", out_dir / "manifest.tsv")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "synthesize": _cmd_synthesize,
    "search": _cmd_search,
    "baseline": _cmd_baseline,
    "evaluate": _cmd_evaluate,
    "phantom": _cmd_phantom,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    log.debug("kernel backend: %s", active_backend())
    try:
        return _COMMANDS[args.command](args)
    except (ManifestError, ModelFormatError, NiftiError, PipelineError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
