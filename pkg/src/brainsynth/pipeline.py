"""End-to-end training and synthesis.

Training, per patient pair: macro-cluster both scans over the joint mask,
match macro labels by voxel overlap, micro-cluster each matched tissue on
both sides, match micro labels the same way, and insert each matched
micro-cluster mean pair into the tissue's mapping table (and the merged
fallback).  Patients are always processed in sorted-id order, so model
bytes are reproducible regardless of input order or thread count.

Synthesis macro-clusters the query scan, maps every in-mask voxel through
its tissue table, and median-filters the result.  Search mode builds a
small throwaway model from the w nearest training patients (by T1 MSE)
for each query.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kmeans1d import assign_labels, cluster_1d, intensity_histogram
from .mapping import DEFAULT_MAX_ROWS, Model, lookup_model
from .matching import max_weight_matching, overlap_matrix
from .preprocess import median_filter_3x3, normalize
from .volume import Mask, Volume, brain_mask

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """Training/synthesis failure, annotated with the offending patient."""


@dataclass
class PatientPair:
    """One patient's scans; t2/seg may be absent for query patients."""

    id: str
    t1: Volume
    t2: Volume | None = None
    seg: Volume | None = None

    def __post_init__(self):
        for name in ("t2", "seg"):
            other = getattr(self, name)
            if other is not None and other.dims != self.t1.dims:
                raise ValueError(
                    f"{self.id}: {name} dims {other.dims} != t1 dims {self.t1.dims}"
                )


@dataclass(frozen=True)
class SearchConfig:
    """Search-mode settings; defaults match the best published variant."""

    w: int = 10
    k_macro: int = 5
    k_micro: int = 100

    def __post_init__(self):
        if self.w < 1:
            raise ValueError("w must be >= 1")
        if not 3 <= self.k_macro <= 6:
            raise ValueError("k_macro must be in [3, 6]")
        if self.k_micro < 100:
            raise ValueError("k_micro must be >= 100")


@dataclass(frozen=True)
class SearchResult:
    volume: Volume
    neighbors: list[str]
    model: Model


def pair_mappings(
    t1n: Volume, t2n: Volume, jm: Mask, k_macro: int, k_micro: int
) -> list[tuple[int, float, float]]:
    """(tissue, mean_t1, mean_t2) triples for one normalized scan pair."""
    if not jm.any():
        raise ValueError("empty joint mask")
    h1 = intensity_histogram(t1n, jm)
    h2 = intensity_histogram(t2n, jm)
    k_used = min(k_macro, len(h1), len(h2))
    c1 = cluster_1d(h1, k_used)
    c2 = cluster_1d(h2, k_used)
    la = assign_labels(t1n, jm, c1)
    lb = assign_labels(t2n, jm, c2)
    perm = max_weight_matching(overlap_matrix(la, lb, jm, k_used)).perm

    triples = []
    for tissue in range(k_used):
        ma = la == tissue
        mb = lb == perm[tissue]
        mh1 = intensity_histogram(t1n, ma)
        mh2 = intensity_histogram(t2n, mb)
        k_mic = min(k_micro, len(mh1), len(mh2))
        mc1 = cluster_1d(mh1, k_mic)
        mc2 = cluster_1d(mh2, k_mic)
        mla = assign_labels(t1n, ma, mc1)
        mlb = assign_labels(t2n, mb, mc2)
        mperm = max_weight_matching(overlap_matrix(mla, mlb, ma & mb, k_mic)).perm
        for j in range(k_mic):
            triples.append((tissue, float(mc1.means[j]), float(mc2.means[mperm[j]])))
    return triples


def train_pair(
    p: PatientPair,
    k_macro: int,
    k_micro: int,
    mod: Model,
    masks: tuple[Mask, Mask] | None = None,
) -> None:
    """Insert one normalized pair's mappings into an existing model.

    `masks` are the raw-volume brain masks; they default to the nonzero
    voxels of the (normalized) inputs, which drops the voxels that held the
    pre-normalization minimum — pass explicit masks when that matters.
    """
    if p.t2 is None:
        raise ValueError(f"{p.id}: training requires both t1 and t2")
    if masks is None:
        masks = (brain_mask(p.t1), brain_mask(p.t2))
    jm = masks[0] & masks[1]
    for tissue, a1, a2 in pair_mappings(p.t1, p.t2, jm, k_macro, k_micro):
        mod.tables[tissue].insert(a1, a2)
        mod.fallback.insert(a1, a2)


def _normalized_pair(p: PatientPair) -> tuple[PatientPair, tuple[Mask, Mask]]:
    m1 = brain_mask(p.t1)
    m2 = brain_mask(p.t2)
    pn = PatientPair(id=p.id, t1=normalize(p.t1, m1), t2=normalize(p.t2, m2), seg=p.seg)
    return pn, (m1, m2)


def train(
    dataset: list[PatientPair],
    k_macro: int,
    k_micro: int,
    max_rows: int = DEFAULT_MAX_ROWS,
    threads: int = 1,
) -> Model:
    """Build a model from raw scan pairs (normalization happens here).

    Fails fast on the first broken patient.  The result is a pure function
    of the patient set and parameters: input order and thread count do not
    affect the output bytes.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    pairs = sorted(dataset, key=lambda q: q.id)
    ids = [q.id for q in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate patient ids in training dataset")

    def mappings_for(p: PatientPair):
        try:
            if p.t2 is None:
                raise ValueError("training requires both t1 and t2")
            pn, (m1, m2) = _normalized_pair(p)
            out = pair_mappings(pn.t1, pn.t2, m1 & m2, k_macro, k_micro)
            log.info("trained %s (%d table entries)", p.id, len(out))
            return out
        except Exception as e:
            raise PipelineError(f"patient {p.id}: {e}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_patient = list(pool.map(mappings_for, pairs))
    else:
        per_patient = [mappings_for(p) for p in pairs]

    mod = Model(
        k_macro=k_macro,
        k_micro=k_micro,
        fingerprint=hashlib.sha256("\n".join(ids).encode()).hexdigest(),
    )
    for triples in per_patient:
        for tissue, a1, a2 in triples:
            mod.tables[tissue].insert(a1, a2)
            mod.fallback.insert(a1, a2)
    mod.tables = [t.compress(max_rows) for t in mod.tables]
    mod.fallback = mod.fallback.compress(max_rows)
    return mod


def synthesize(
    t1: Volume,
    mod: Model,
    mask: Mask | None = None,
    out_range: tuple[float, float] | None = None,
) -> Volume:
    """Synthesize the missing modality from a normalized T1 volume.

    Background stays 0; in-mask values come from the per-tissue tables and
    are median-filtered last.  `out_range=(lo, hi)` optionally rescales the
    in-mask output from [0, 1] to a target range.
    """
    if mask is None:
        mask = brain_mask(t1)
    if not mask.any():
        raise ValueError("empty brain mask")
    if mod.is_empty():
        raise ValueError("empty model: no mapping tables to query")

    c = cluster_1d(intensity_histogram(t1, mask), mod.k_macro)
    labels = assign_labels(t1, mask, c)
    out = np.zeros(t1.dims)
    for tissue in range(c.k):
        sel = labels == tissue
        if sel.any():
            out[sel] = lookup_model(mod, tissue, t1.data[sel])
    result = median_filter_3x3(Volume(out, t1.spacing), mask)
    if out_range is not None:
        lo, hi = float(out_range[0]), float(out_range[1])
        scaled = np.zeros(t1.dims)
        scaled[mask] = lo + result.data[mask] * (hi - lo)
        result = Volume(scaled, t1.spacing)
    return result


def mse_ranking(query_t1: Volume, candidates: list[PatientPair]) -> list[tuple[float, str]]:
    """(mse, id) pairs sorted ascending; MSE over the joint nonzero mask."""
    scored = []
    for cand in candidates:
        if cand.t1.dims != query_t1.dims:
            raise ValueError(f"{cand.id}: dims {cand.t1.dims} != query dims {query_t1.dims}")
        m = (query_t1.data != 0) & (cand.t1.data != 0)
        if m.any():
            diff = query_t1.data[m] - cand.t1.data[m]
            score = float(np.mean(diff * diff))
        else:
            score = float("inf")
        scored.append((score, cand.id))
    return sorted(scored)


def rank_by_mse(query_t1: Volume, candidates: list[PatientPair]) -> list[str]:
    """Candidate ids ordered by ascending T1 MSE to the query (ties by id)."""
    return [pid for _, pid in mse_ranking(query_t1, candidates)]


def search_synthesize(
    query_t1: Volume,
    dataset: list[PatientPair],
    cfg: SearchConfig,
    max_rows: int = DEFAULT_MAX_ROWS,
    threads: int = 1,
) -> SearchResult:
    """Per-query model: train on the w nearest patients, then synthesize.

    Takes raw (unnormalized) volumes; the chosen neighbor ids are reported
    on the result.  With w == len(dataset) the output is identical to
    training once on the whole dataset.
    """
    if len(dataset) < cfg.w:
        raise ValueError(f"dataset has {len(dataset)} pairs, need at least w={cfg.w}")
    qmask = brain_mask(query_t1)
    qn = normalize(query_t1, qmask)
    ranking_pairs = []
    for p in dataset:
        if p.t2 is None:
            raise PipelineError(f"patient {p.id}: training requires both t1 and t2")
        ranking_pairs.append(PatientPair(id=p.id, t1=normalize(p.t1, brain_mask(p.t1))))
    neighbors = rank_by_mse(qn, ranking_pairs)[: cfg.w]
    chosen = set(neighbors)
    subset = [p for p in dataset if p.id in chosen]
    mod = train(subset, cfg.k_macro, cfg.k_micro, max_rows=max_rows, threads=threads)
    vol = synthesize(qn, mod, mask=qmask)
    return SearchResult(volume=vol, neighbors=neighbors, model=mod)
