"""Evaluation metrics: masked MSE, Dice, and 95th-percentile Hausdorff.

Segmentation label maps are scored directly (this package never runs a
segmentation model).  Tumor label maps follow the BraTS convention by
default (1 = necrotic/non-enhancing, 2 = edema, 4 = enhancing) and are
grouped into whole / core / active regions; Dice and HD95 are reported per
region plus their three-region average.

HD95 uses the nearest-rank 95th percentile of voxel-center distances from
every set voxel of one mask to the nearest set voxel of the other
(spacing-scaled, exact Euclidean distance transform), combined over both
directions by max (configurable to mean).  Empty-mask conventions: both
empty -> Dice 1 / HD95 0; exactly one empty -> Dice 0 / HD95 = penalty
(default: volume diagonal in mm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .preprocess import normalize
from .volume import Mask, Volume, brain_mask

DEFAULT_LABEL_CODES = {"necrotic": 1, "edema": 2, "enhancing": 4}
REGIONS = ("whole", "core", "active")


@dataclass(frozen=True)
class RegionSet:
    whole: Mask
    core: Mask
    active: Mask


def mse(a: Volume, b: Volume, m: Mask) -> float:
    """Mean squared difference over in-mask voxels."""
    if a.dims != b.dims or a.dims != tuple(m.shape):
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims} vs {m.shape}")
    if not m.any():
        raise ValueError("empty mask")
    diff = a.data[m] - b.data[m]
    return float(np.mean(diff * diff))


def region_masks(seg: Volume, label_codes: dict[str, int] | None = None) -> RegionSet:
    """Tumor region masks from a label map; active <= core <= whole."""
    codes = dict(DEFAULT_LABEL_CODES if label_codes is None else label_codes)
    missing = {"necrotic", "edema", "enhancing"} - codes.keys()
    if missing:
        raise ValueError(f"label codes missing roles: {sorted(missing)}")
    data = seg.data
    if not (data == np.rint(data)).all():
        raise ValueError("segmentation contains non-integer labels")
    labels = np.rint(data).astype(np.int64)
    known = set(codes.values()) | {0}
    present = set(np.unique(labels).tolist())
    unknown = present - known
    if unknown:
        raise ValueError(f"unknown label codes in segmentation: {sorted(unknown)}")
    necrotic = labels == codes["necrotic"]
    edema = labels == codes["edema"]
    enhancing = labels == codes["enhancing"]
    return RegionSet(
        whole=necrotic | edema | enhancing,
        core=necrotic | enhancing,
        active=enhancing,
    )


def dice(pred: Mask, truth: Mask) -> float:
    """Dice overlap 2|A^B| / (|A|+|B|); two empty masks score 1.0."""
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    na = int(pred.sum())
    nb = int(truth.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((pred & truth).sum()) / (na + nb)


def _nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    idx = max(int(math.ceil(pct / 100.0 * sorted_vals.size)) - 1, 0)
    return float(sorted_vals[idx])


def _surface(m: Mask) -> Mask:
    eroded = ndimage.binary_erosion(m, structure=ndimage.generate_binary_structure(3, 1))
    return m & ~eroded


def volume_diagonal(dims, spacing) -> float:
    """Length of the volume diagonal in millimeters."""
    return float(np.linalg.norm(np.asarray(dims, dtype=np.float64) * np.asarray(spacing)))


def hd95(
    pred: Mask,
    truth: Mask,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
    combine: str = "max",
    surface: bool = False,
    empty_penalty: float | None = None,
) -> float:
    """Undirected 95th-percentile Hausdorff distance in millimeters."""
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    if combine not in ("max", "mean"):
        raise ValueError(f"combine must be 'max' or 'mean', got {combine!r}")
    pa = bool(pred.any())
    ta = bool(truth.any())
    if not pa and not ta:
        return 0.0
    if pa != ta:
        if empty_penalty is None:
            return volume_diagonal(pred.shape, spacing)
        return float(empty_penalty)
    if surface:
        pred = _surface(pred)
        truth = _surface(truth)
    d_to_truth = ndimage.distance_transform_edt(~truth, sampling=spacing)
    d_to_pred = ndimage.distance_transform_edt(~pred, sampling=spacing)
    fwd = _nearest_rank(np.sort(d_to_truth[pred]), 95.0)
    bwd = _nearest_rank(np.sort(d_to_pred[truth]), 95.0)
    if combine == "max":
        return max(fwd, bwd)
    return (fwd + bwd) / 2.0


@dataclass
class PatientMetrics:
    id: str
    mse_brain: float | None = None
    mse_tumor: float | None = None
    dice: dict[str, float] | None = None  # whole/core/active/average
    hd95: dict[str, float] | None = None
    error: str | None = None


@dataclass
class MetricsReport:
    mode: str
    patients: list[PatientMetrics] = field(default_factory=list)
    aggregates: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def errors(self) -> list[tuple[str, str]]:
        return [(p.id, p.error) for p in self.patients if p.error]


@dataclass
class EvalCase:
    """Inputs for one patient's evaluation; absent pieces are skipped.

    In ground-truth mode `ref_seg` is the expert segmentation; in
    reference-segmentation mode it is the label map produced from the real
    scan.  Either way `pred_seg` is scored against it, and `synth`/`real`
    feed the masked MSE.
    """

    id: str
    synth: Volume | None = None
    real: Volume | None = None
    pred_seg: Volume | None = None
    ref_seg: Volume | None = None
    error: str | None = None  # set by loaders when inputs could not be read


def _metric_rows(p: PatientMetrics):
    if p.mse_brain is not None:
        yield ("mse", "brain", p.mse_brain)
    if p.mse_tumor is not None:
        yield ("mse", "tumor", p.mse_tumor)
    for name, values in (("dice", p.dice), ("hd95", p.hd95)):
        if values is not None:
            for region in (*REGIONS, "average"):
                yield (name, region, values[region])


def evaluate(
    patients: list[EvalCase],
    mode: str = "ground-truth",
    label_codes: dict[str, int] | None = None,
    hd95_combine: str = "max",
    hd95_surface: bool = False,
    empty_penalty: float | None = None,
) -> MetricsReport:
    """Score every patient, skipping (and recording) broken ones."""
    if mode not in ("ground-truth", "reference-segmentation"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    report = MetricsReport(mode=mode)
    for case in sorted(patients, key=lambda c: c.id):
        entry = PatientMetrics(id=case.id)
        if case.error:
            entry.error = case.error
            report.patients.append(entry)
            continue
        try:
            did_any = False
            if case.synth is not None and case.real is not None:
                ma = brain_mask(case.synth)
                mb = brain_mask(case.real)
                joint = ma & mb
                a_n = normalize(case.synth, ma)
                b_n = normalize(case.real, mb)
                entry.mse_brain = mse(a_n, b_n, joint)
                if case.ref_seg is not None:
                    tumor = region_masks(case.ref_seg, label_codes).whole & joint
                    if tumor.any():
                        entry.mse_tumor = mse(a_n, b_n, tumor)
                did_any = True
            if case.pred_seg is not None and case.ref_seg is not None:
                rp = region_masks(case.pred_seg, label_codes)
                rt = region_masks(case.ref_seg, label_codes)
                spacing = case.ref_seg.spacing
                d = {}
                h = {}
                for region in REGIONS:
                    pm = getattr(rp, region)
                    tm = getattr(rt, region)
                    d[region] = dice(pm, tm)
                    h[region] = hd95(
                        pm,
                        tm,
                        spacing,
                        combine=hd95_combine,
                        surface=hd95_surface,
                        empty_penalty=empty_penalty,
                    )
                d["average"] = sum(d[r] for r in REGIONS) / 3.0
                h["average"] = sum(h[r] for r in REGIONS) / 3.0
                entry.dice = d
                entry.hd95 = h
                did_any = True
            if not did_any:
                raise ValueError("no usable inputs (need synth+real and/or pred_seg+ref_seg)")
        except Exception as e:
            entry.error = str(e)
        report.patients.append(entry)

    columns: dict[str, list[float]] = {}
    for p in report.patients:
        if p.error:
            continue
        for metric, region, value in _metric_rows(p):
            columns.setdefault(f"{metric}/{region}", []).append(value)
    for key, vals in columns.items():
        arr = np.asarray(vals)
        report.aggregates[key] = {
            "mean": float(arr.mean()),
            "median": float(np.median(arr)),
            "std": float(arr.std()),
        }
    return report


TSV_HEADER = "patient\tmetric\tregion\tvalue"


def report_to_tsv(report: MetricsReport) -> str:
    """Machine-readable report: one row per patient per metric per region.

    Aggregate rows use the pseudo-patients MEAN / MEDIAN / STD; per-patient
    failures appear as trailing '# error' comment lines.
    """
    lines = [f"# mode: {report.mode}", TSV_HEADER]
    for p in report.patients:
        for metric, region, value in _metric_rows(p):
            lines.append(f"{p.id}\t{metric}\t{region}\t{value:.17g}")
    for stat in ("mean", "median", "std"):
        for key in sorted(report.aggregates):
            metric, region = key.split("/")
            value = report.aggregates[key][stat]
            lines.append(f"{stat.upper()}\t{metric}\t{region}\t{value:.17g}")
    for pid, msg in report.errors:
        lines.append(f"# error\t{pid}\t{msg}")
    return "\n".join(lines) + "\n"


def report_to_text(report: MetricsReport) -> str:
    """Human-readable summary table."""
    head = f"{'patient':<24}{'mse_brain':>12}{'mse_tumor':>12}{'dice_avg':>10}{'hd95_avg':>10}"
    lines = [f"evaluation mode: {report.mode}", head, "-" * len(head)]

    def fmt(x, width):
        return f"{'-':>{width}}" if x is None else f"{x:>{width}.4f}"

    for p in report.patients:
        if p.error:
            lines.append(f"{p.id:<24}  ERROR: {p.error}")
            continue
        lines.append(
            f"{p.id:<24}"
            + fmt(p.mse_brain, 12)
            + fmt(p.mse_tumor, 12)
            + fmt(p.dice["average"] if p.dice else None, 10)
            + fmt(p.hd95["average"] if p.hd95 else None, 10)
        )
    if report.aggregates:
        lines.append("-" * len(head))
        get = report.aggregates.get

        def agg(key):
            entry = get(key)
            return None if entry is None else entry["mean"]

        lines.append(
            f"{'MEAN':<24}"
            + fmt(agg("mse/brain"), 12)
            + fmt(agg("mse/tumor"), 12)
            + fmt(agg("dice/average"), 10)
            + fmt(agg("hd95/average"), 10)
        )
    return "\n".join(lines) + "\n"
