"""Dataset manifests: one tab-separated record per line.

Column roles depend on the consuming command and are documented in the
README: training/search manifests hold (id, t1, t2[, seg]), evaluation
manifests hold (id, synth, real[, pred_seg[, ref_seg]]).  Empty fields or
"-" mark absent paths.  Relative paths are resolved against the manifest's
own directory; blank lines and lines starting with '#' are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike
from pathlib import Path

from .metrics import EvalCase
from .nifti import NiftiError, read_nifti
from .pipeline import PatientPair


class ManifestError(Exception):
    """Malformed manifest line, reported with its line number."""


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    paths: tuple[Path | None, ...]
    line_no: int


def read_manifest(path: str | PathLike) -> list[ManifestRecord]:
    path = Path(path)
    base = path.parent
    records = []
    seen = set()
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        pid = fields[0].strip()
        if not pid:
            raise ManifestError(f"{path}:{line_no}: empty patient id")
        if pid in seen:
            raise ManifestError(f"{path}:{line_no}: duplicate patient id {pid!r}")
        seen.add(pid)
        if len(fields) < 2 or not fields[1].strip():
            raise ManifestError(f"{path}:{line_no}: record needs at least one path")
        paths = []
        for raw in fields[1:]:
            raw = raw.strip()
            if not raw or raw == "-":
                paths.append(None)
            else:
                p = Path(raw)
                paths.append(p if p.is_absolute() else base / p)
        records.append(ManifestRecord(id=pid, paths=tuple(paths), line_no=line_no))
    return records


def _load(rec: ManifestRecord, idx: int, manifest: Path | str):
    if idx >= len(rec.paths) or rec.paths[idx] is None:
        return None
    p = rec.paths[idx]
    try:
        return read_nifti(p)
    except FileNotFoundError:
        raise ManifestError(f"{manifest}:{rec.line_no}: patient {rec.id}: missing file {p}")


def load_training_pairs(path: str | PathLike, require_t2: bool = True) -> list[PatientPair]:
    """Manifest columns: id, t1, t2, seg (last two optional)."""
    pairs = []
    for rec in read_manifest(path):
        t1 = _load(rec, 0, path)
        t2 = _load(rec, 1, path)
        seg = _load(rec, 2, path)
        if t1 is None:
            raise ManifestError(f"{path}:{rec.line_no}: patient {rec.id}: t1 path required")
        if require_t2 and t2 is None:
            raise ManifestError(f"{path}:{rec.line_no}: patient {rec.id}: t2 path required")
        pairs.append(PatientPair(id=rec.id, t1=t1, t2=t2, seg=seg))
    return pairs


def load_eval_cases(path: str | PathLike) -> list[EvalCase]:
    """Manifest columns: id, synth, real, pred_seg, ref_seg (all but id optional).

    A patient whose files cannot be read becomes an errored case instead of
    aborting the run, so evaluation continues for the others.
    """
    cases = []
    for rec in read_manifest(path):
        try:
            cases.append(
                EvalCase(
                    id=rec.id,
                    synth=_load(rec, 0, path),
                    real=_load(rec, 1, path),
                    pred_seg=_load(rec, 2, path),
                    ref_seg=_load(rec, 3, path),
                )
            )
        except (ManifestError, NiftiError, OSError, ValueError) as e:
            cases.append(EvalCase(id=rec.id, error=str(e)))
    return cases


def write_manifest(path: str | PathLike, rows: list[tuple[str, ...]]) -> None:
    lines = ["\t".join(row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
