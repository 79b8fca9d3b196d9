"""Minimal NIfTI-1 reader/writer for single-file .nii / .nii.gz volumes.

Honored header fields: dim, pixdim, datatype, scl_slope, scl_inter,
vox_offset, magic ("n+1").  Orientation fields (qform/sform) are read but
never used to reorient: inputs are assumed co-registered, and the
canonical in-memory axis order is [x, y, z] with x fastest on disk
(Fortran order), matching the NIfTI layout.

Reading promotes all supported integer/float payloads to float64 and
applies scl_slope/scl_inter when the slope is nonzero.  Writing always
emits little-endian float32 with vox_offset 352; gzip compression is
applied iff the path ends in ".gz" (written with mtime=0 so identical
volumes produce byte-identical files).
"""

from __future__ import annotations

import gzip
import struct
from os import PathLike
from pathlib import Path

import numpy as np

from .volume import Volume

HEADER_SIZE = 348
_VOX_OFFSET = 352  # header + 4-byte extension flag

# NIfTI-1 datatype code -> numpy dtype (endianness applied at parse time)
_DATATYPES = {
    2: "u1",  # uint8
    4: "i2",  # int16
    8: "i4",  # int32
    16: "f4",  # float32
    64: "f8",  # float64
    512: "u2",  # uint16
}

_GZIP_MAGIC = b"\x1f\x8b"


class NiftiError(Exception):
    """Base class for NIfTI format errors."""


class MalformedHeaderError(NiftiError):
    """Header is not a valid single-file NIfTI-1 header."""


class UnsupportedDatatypeError(NiftiError):
    """Voxel datatype code is outside the supported scalar set."""


class BadDimensionsError(NiftiError):
    """Header dim field declares non-positive or non-3D dimensions."""


class TruncatedFileError(NiftiError):
    """File ends before the declared voxel payload."""


class NonFiniteDataError(NiftiError):
    """Voxel payload contains NaN or Inf after scaling."""


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return raw


def read_nifti(path: str | PathLike) -> Volume:
    """Load a single-file NIfTI-1 volume (.nii or .nii.gz)."""
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise TruncatedFileError(f"{path}: file shorter than the 348-byte header")

    magic = raw[344:348]
    if magic == b"ni1\x00":
        raise MalformedHeaderError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")
    if magic != b"n+1\x00":
        raise MalformedHeaderError(f"{path}: bad magic bytes {magic!r}")

    for bo in ("<", ">"):
        (sizeof_hdr,) = struct.unpack_from(bo + "i", raw, 0)
        if sizeof_hdr == HEADER_SIZE:
            break
    else:
        raise MalformedHeaderError(f"{path}: sizeof_hdr is not 348 in either byte order")

    dim = struct.unpack_from(bo + "8h", raw, 40)
    (datatype,) = struct.unpack_from(bo + "h", raw, 70)
    pixdim = struct.unpack_from(bo + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(bo + "f", raw, 108)
    scl_slope, scl_inter = struct.unpack_from(bo + "2f", raw, 112)

    ndim = dim[0]
    if ndim < 3 or ndim > 7:
        raise BadDimensionsError(f"{path}: expected a 3D volume, header ndim={ndim}")
    dims = dim[1:4]
    if any(d <= 0 for d in dims):
        raise BadDimensionsError(f"{path}: non-positive dimensions {dims}")
    if any(d not in (0, 1) for d in dim[4 : ndim + 1]):
        raise BadDimensionsError(f"{path}: higher dimensions {dim[4:ndim + 1]} are not singleton")

    if datatype not in _DATATYPES:
        raise UnsupportedDatatypeError(f"{path}: datatype code {datatype} not supported")
    dtype = np.dtype(bo + _DATATYPES[datatype])

    offset = int(round(vox_offset)) if vox_offset else _VOX_OFFSET
    if offset < HEADER_SIZE:
        raise MalformedHeaderError(f"{path}: vox_offset {offset} inside the header")
    nvox = dims[0] * dims[1] * dims[2]
    nbytes = nvox * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise TruncatedFileError(
            f"{path}: payload needs {nbytes} bytes at offset {offset}, file has {len(raw)}"
        )

    data = np.frombuffer(raw, dtype=dtype, count=nvox, offset=offset)
    data = data.reshape(dims, order="F").astype(np.float64)
    if scl_slope != 0.0 and not (scl_slope == 1.0 and scl_inter == 0.0):
        data = data * float(scl_slope) + float(scl_inter)
    if not np.isfinite(data).all():
        raise NonFiniteDataError(f"{path}: payload contains NaN or Inf values")

    spacing = pixdim[1:4]
    if any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise MalformedHeaderError(f"{path}: non-positive pixdim {spacing}")
    return Volume(data, tuple(float(s) for s in spacing))


def write_nifti(v: Volume, path: str | PathLike) -> None:
    """Write a volume as little-endian float32 NIfTI-1 (.nii or .nii.gz)."""
    payload = v.data.astype(np.float32)
    if not np.isfinite(payload).all():
        raise ValueError("volume values exceed the float32 range")

    hdr = bytearray(_VOX_OFFSET)  # trailing 4 zero bytes: no extensions
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    nx, ny, nz = v.dims
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 16)  # float32
    struct.pack_into("<h", hdr, 72, 32)  # bitpix
    sx, sy, sz = v.spacing
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(_VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<b", hdr, 123, 2)  # xyzt_units: millimeters
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform scaled-identity
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, 0.0)
    hdr[344:348] = b"n+1\x00"

    body = bytes(hdr) + payload.ravel(order="F").tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        # filename="" and mtime=0: identical volumes give identical bytes
        with open(path, "wb") as f:
            with gzip.GzipFile(filename="", fileobj=f, mode="wb", mtime=0) as gz:
                gz.write(body)
    else:
        path.write_bytes(body)
