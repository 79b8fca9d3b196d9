"""Per-tissue intensity transfer tables and the trained model container.

A MappingTable holds ordered (source intensity -> target intensity, count)
rows.  Training inserts matched micro-cluster mean pairs with a moving
average; two source intensities count as the same key iff they quantize to
the same grid bin (the row keeps the first-seen key value).  Queries
linearly interpolate between the two bracketing rows and clamp outside the
key range.

A Model is one table per macro cluster plus a merged fallback table, saved
in a little-endian binary format (magic "BMAP", version 1) documented in
the README.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .kmeans1d import GRID_BINS

MODEL_MAGIC = b"BMAP"
MODEL_VERSION = 1
NORM_MODE_MINMAX01 = 1
_NORM_MODES = {NORM_MODE_MINMAX01: "minmax01"}
DEFAULT_MAX_ROWS = 1024


class ModelFormatError(Exception):
    """Base class for model file errors."""


class ModelCorruptError(ModelFormatError):
    """File is truncated or structurally invalid."""


class ModelVersionError(ModelFormatError):
    """File declares an unsupported format version."""


class ModelInvariantError(ModelFormatError):
    """Decoded content violates table/model invariants."""


class MappingTable:
    """Ordered (key, value, count) rows with moving-average insertion."""

    def __init__(self):
        self._rows: dict[int, list] = {}  # grid bin -> [key, value, count]
        self._arrays = None

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def total_count(self) -> int:
        return sum(r[2] for r in self._rows.values())

    def insert(self, a1: float, a2: float) -> None:
        """Add one (source, target) observation.

        A fresh key starts a row (a1, a2, 1); an existing key (same grid
        bin) is updated with the moving average
        value += (a2 - value) / count, which equals the plain mean of all
        targets inserted at that key.
        """
        a1 = float(a1)
        a2 = float(a2)
        if not (np.isfinite(a1) and np.isfinite(a2)):
            raise ValueError(f"non-finite table entry ({a1}, {a2})")
        b = int(np.clip(round(a1 * GRID_BINS), 0, GRID_BINS))
        row = self._rows.get(b)
        if row is None:
            self._rows[b] = [a1, a2, 1]
        else:
            row[2] += 1
            row[1] += (a2 - row[1]) / row[2]
        self._arrays = None

    def rows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(keys, values, counts) sorted by strictly increasing key."""
        if self._arrays is None:
            items = sorted(self._rows.items())
            keys = np.array([r[0] for _, r in items], dtype=np.float64)
            vals = np.array([r[1] for _, r in items], dtype=np.float64)
            counts = np.array([r[2] for _, r in items], dtype=np.int64)
            self._arrays = (keys, vals, counts)
        return self._arrays

    def lookup(self, p: float) -> float:
        """Interpolated target intensity for source intensity p."""
        return float(self.lookup_many(np.asarray([p]))[0])

    def lookup_many(self, p: np.ndarray) -> np.ndarray:
        if not self._rows:
            raise ValueError("lookup on an empty mapping table")
        keys, vals, _ = self.rows()
        return np.interp(p, keys, vals)

    def compress(self, max_rows: int) -> "MappingTable":
        """Merge rows into at most max_rows uniform-width key bins.

        Rows inside a bin collapse to count-weighted mean key and value
        with summed count; total count is conserved.  Tables already at or
        under the limit are returned as a copy unchanged.
        """
        if max_rows < 2:
            raise ValueError("max_rows must be >= 2")
        out = MappingTable()
        if len(self._rows) <= max_rows:
            out._rows = {b: list(r) for b, r in self._rows.items()}
            return out
        keys, vals, counts = self.rows()
        span = keys[-1] - keys[0]
        bins = np.minimum(((keys - keys[0]) / span * max_rows).astype(np.int64), max_rows - 1)
        w = counts.astype(np.float64)
        for b in np.unique(bins):
            sel = bins == b
            cw = w[sel]
            tot = cw.sum()
            key = float((keys[sel] * cw).sum() / tot)
            val = float((vals[sel] * cw).sum() / tot)
            grid = int(np.clip(round(key * GRID_BINS), 0, GRID_BINS))
            # Distinct bins produce distinct grid keys except under extreme
            # crowding; nudge upward to keep keys strictly increasing.
            while grid in out._rows:
                grid += 1
            out._rows[grid] = [key, val, int(counts[sel].sum())]
        return out

    def copy(self) -> "MappingTable":
        out = MappingTable()
        out._rows = {b: list(r) for b, r in self._rows.items()}
        return out

    def _set_rows(self, keys, vals, counts) -> None:
        self._rows = {}
        for key, val, count in zip(keys, vals, counts):
            b = int(np.clip(round(float(key) * GRID_BINS), 0, GRID_BINS))
            while b in self._rows:
                b += 1
            self._rows[b] = [float(key), float(val), int(count)]
        self._arrays = None


@dataclass
class Model:
    """Trained intensity-transfer model: one table per macro cluster."""

    k_macro: int
    k_micro: int
    tables: list[MappingTable] = field(default_factory=list)
    fallback: MappingTable = field(default_factory=MappingTable)
    norm_mode: str = "minmax01"
    fingerprint: str = ""

    def __post_init__(self):
        if self.k_macro < 1 or self.k_micro < 1:
            raise ValueError("k_macro and k_micro must be >= 1")
        if not self.tables:
            self.tables = [MappingTable() for _ in range(self.k_macro)]
        if len(self.tables) != self.k_macro:
            raise ValueError(f"expected {self.k_macro} tables, got {len(self.tables)}")

    def is_empty(self) -> bool:
        return len(self.fallback) == 0 and all(len(t) == 0 for t in self.tables)


def lookup_model(mod: Model, tissue: int, p) -> float | np.ndarray:
    """Table lookup for one macro cluster, falling back to the merged table."""
    if not 0 <= tissue < mod.k_macro:
        raise ValueError(f"tissue {tissue} outside [0, {mod.k_macro})")
    table = mod.tables[tissue]
    if len(table) == 0:
        table = mod.fallback
    if len(table) == 0:
        raise ValueError("all mapping tables are empty")
    if np.ndim(p) == 0:
        return table.lookup(float(p))
    return table.lookup_many(np.asarray(p, dtype=np.float64))


_NORM_CODES = {name: code for code, name in _NORM_MODES.items()}


def save_model(mod: Model, path: str | PathLike) -> None:
    """Serialize a model; exact round-trip via load_model."""
    parts = [MODEL_MAGIC, struct.pack("<IIIH", MODEL_VERSION, mod.k_macro, mod.k_micro, _NORM_CODES[mod.norm_mode])]
    fp = mod.fingerprint.encode("utf-8")
    parts.append(struct.pack("<I", len(fp)))
    parts.append(fp)
    all_tables = list(mod.tables) + [mod.fallback]
    parts.append(struct.pack("<I", len(all_tables)))
    for table in all_tables:
        keys, vals, counts = table.rows()
        parts.append(struct.pack("<Q", len(keys)))
        packed = np.empty(len(keys), dtype=[("k", "<f8"), ("v", "<f8"), ("c", "<u8")])
        packed["k"] = keys
        packed["v"] = vals
        packed["c"] = counts.astype(np.uint64)
        parts.append(packed.tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelCorruptError(f"{self.path}: truncated model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path: str | PathLike) -> Model:
    """Load and validate a model file written by save_model."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != MODEL_MAGIC:
        raise ModelCorruptError(f"{path}: not a model file (bad magic)")
    (version,) = r.unpack("<I")
    if version != MODEL_VERSION:
        raise ModelVersionError(f"{path}: unsupported model version {version}")
    k_macro, k_micro, norm_code = r.unpack("<IIH")
    if norm_code not in _NORM_MODES:
        raise ModelInvariantError(f"{path}: unknown normalization mode {norm_code}")
    (fp_len,) = r.unpack("<I")
    fingerprint = r.take(fp_len).decode("utf-8")
    (n_tables,) = r.unpack("<I")
    if k_macro < 1 or n_tables != k_macro + 1:
        raise ModelInvariantError(f"{path}: expected {k_macro + 1} tables, file has {n_tables}")
    tables = []
    for _ in range(n_tables):
        (n_rows,) = r.unpack("<Q")
        packed = np.frombuffer(r.take(24 * n_rows), dtype=[("k", "<f8"), ("v", "<f8"), ("c", "<u8")])
        keys = packed["k"].astype(np.float64)
        vals = packed["v"].astype(np.float64)
        counts = packed["c"].astype(np.int64)
        if not (np.isfinite(keys).all() and np.isfinite(vals).all()):
            raise ModelInvariantError(f"{path}: non-finite table entries")
        if keys.size and not (np.diff(keys) > 0).all():
            raise ModelInvariantError(f"{path}: table keys not strictly increasing")
        if (counts < 1).any():
            raise ModelInvariantError(f"{path}: row count below 1")
        table = MappingTable()
        table._set_rows(keys, vals, counts)
        tables.append(table)
    if r.pos != len(r.data):
        raise ModelCorruptError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    mod = Model(
        k_macro=int(k_macro),
        k_micro=int(k_micro),
        tables=tables[:-1],
        fallback=tables[-1],
        norm_mode=_NORM_MODES[norm_code],
        fingerprint=fingerprint,
    )
    if not mod.is_empty() and len(mod.fallback) == 0:
        raise ModelInvariantError(f"{path}: nonempty tables but empty fallback")
    return mod
