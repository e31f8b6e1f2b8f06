"""Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.

Covers the subset this package needs: 3-D volumes, the common scalar
dtypes, sform/qform affines, and deterministic gzip output (fixed mtime,
so identical volumes produce identical bytes).
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import NiftiFormatError

HEADER_SIZE = 348
VOX_OFFSET = 352.0
MAGIC_SINGLE = b"n+1\x00"

# NIfTI-1 datatype codes for the dtypes we accept.
_CODE_TO_DTYPE = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_DTYPE_TO_CODE = {np.dtype(v): k for k, v in _CODE_TO_DTYPE.items()}

_HEADER_DTYPE = np.dtype(
    [
        ("sizeof_hdr", "i4"),
        ("data_type", "S10"),
        ("db_name", "S18"),
        ("extents", "i4"),
        ("session_error", "i2"),
        ("regular", "S1"),
        ("dim_info", "u1"),
        ("dim", "i2", (8,)),
        ("intent_p1", "f4"),
        ("intent_p2", "f4"),
        ("intent_p3", "f4"),
        ("intent_code", "i2"),
        ("datatype", "i2"),
        ("bitpix", "i2"),
        ("slice_start", "i2"),
        ("pixdim", "f4", (8,)),
        ("vox_offset", "f4"),
        ("scl_slope", "f4"),
        ("scl_inter", "f4"),
        ("slice_end", "i2"),
        ("slice_code", "u1"),
        ("xyzt_units", "u1"),
        ("cal_max", "f4"),
        ("cal_min", "f4"),
        ("slice_duration", "f4"),
        ("toffset", "f4"),
        ("glmax", "i4"),
        ("glmin", "i4"),
        ("descrip", "S80"),
        ("aux_file", "S24"),
        ("qform_code", "i2"),
        ("sform_code", "i2"),
        ("quatern_b", "f4"),
        ("quatern_c", "f4"),
        ("quatern_d", "f4"),
        ("qoffset_x", "f4"),
        ("qoffset_y", "f4"),
        ("qoffset_z", "f4"),
        ("srow_x", "f4", (4,)),
        ("srow_y", "f4", (4,)),
        ("srow_z", "f4", (4,)),
        ("intent_name", "S16"),
        ("magic", "S4"),
    ]
)
assert _HEADER_DTYPE.itemsize == HEADER_SIZE


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":  # gzip magic, regardless of suffix
        return gzip.decompress(raw)
    return raw


def _quaternion_affine(hdr) -> np.ndarray:
    b = float(hdr["quatern_b"])
    c = float(hdr["quatern_c"])
    d = float(hdr["quatern_d"])
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 0 else 0.0
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    pixdim = np.asarray(hdr["pixdim"], dtype=np.float64).reshape(-1)
    qfac = -1.0 if pixdim[0] == -1.0 else 1.0
    scale = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
    affine = np.eye(4)
    affine[:3, :3] = rot * scale
    affine[:3, 3] = [float(hdr["qoffset_x"]), float(hdr["qoffset_y"]), float(hdr["qoffset_z"])]
    return affine


def read_nifti(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a .nii or .nii.gz file.

    Returns (data, affine): data in (x, y, z) index order with the file's
    dtype, affine the 4x4 voxel-to-world matrix (sform preferred, then
    qform, then a diagonal pixdim fallback).
    """
    path = Path(path)
    if not path.is_file():
        raise NiftiFormatError(f"no such file: {path}")
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError(f"{path}: truncated header ({len(raw)} bytes)")

    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=_HEADER_DTYPE)[0]
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        swapped = hdr.byteswap()
        if int(swapped["sizeof_hdr"]) != HEADER_SIZE:
            raise NiftiFormatError(f"{path}: bad sizeof_hdr, not a NIfTI-1 file")
        hdr = swapped
        byte_order = ">" if np.little_endian else "<"
    else:
        byte_order = "<" if np.little_endian else ">"

    magic = bytes(hdr["magic"])
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise NiftiFormatError(f"{path}: bad magic {magic!r}")
    if magic == b"ni1\x00":
        raise NiftiFormatError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")

    dim = np.asarray(hdr["dim"], dtype=int).reshape(-1)
    ndim = int(dim[0])
    if not 1 <= ndim <= 7:
        raise NiftiFormatError(f"{path}: invalid dim[0]={ndim}")
    shape = tuple(int(d) for d in dim[1 : 1 + ndim])
    if any(d < 1 for d in shape):
        raise NiftiFormatError(f"{path}: non-positive dimension in {shape}")
    spatial = shape[:3] + (1,) * (3 - len(shape))
    if any(d != 1 for d in shape[3:]):
        raise NiftiFormatError(f"{path}: volume has non-singleton dimensions beyond 3-D: {shape}")

    code = int(hdr["datatype"])
    if code not in _CODE_TO_DTYPE:
        raise NiftiFormatError(f"{path}: unsupported datatype code {code}")
    dtype = np.dtype(_CODE_TO_DTYPE[code]).newbyteorder(byte_order)

    offset = int(float(hdr["vox_offset"]))
    if offset < HEADER_SIZE:
        raise NiftiFormatError(f"{path}: vox_offset {offset} inside the header")
    count = int(np.prod(spatial))
    need = offset + count * dtype.itemsize
    if len(raw) < need:
        raise NiftiFormatError(f"{path}: truncated data ({len(raw)} < {need} bytes)")

    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = flat.reshape(spatial, order="F")
    data = np.ascontiguousarray(data, dtype=dtype.newbyteorder("="))

    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    if slope not in (0.0, 1.0) or inter != 0.0:
        if slope == 0.0:
            slope = 1.0
        data = data.astype(np.float64) * slope + inter

    sform = int(hdr["sform_code"])
    qform = int(hdr["qform_code"])
    if sform > 0:
        affine = np.eye(4)
        affine[0] = np.asarray(hdr["srow_x"], dtype=np.float64)
        affine[1] = np.asarray(hdr["srow_y"], dtype=np.float64)
        affine[2] = np.asarray(hdr["srow_z"], dtype=np.float64)
    elif qform > 0:
        affine = _quaternion_affine(hdr)
    else:
        pixdim = np.asarray(hdr["pixdim"], dtype=np.float64).reshape(-1)
        affine = np.diag([pixdim[1] or 1.0, pixdim[2] or 1.0, pixdim[3] or 1.0, 1.0])
    return data, affine


def write_nifti(path, data: np.ndarray, affine: np.ndarray) -> None:
    """Write a 3-D array as single-file NIfTI-1; gzip when the name ends .gz.

    Gzip output uses mtime=0 so repeated writes of the same volume are
    byte-identical.
    """
    path = Path(path)
    data = np.asarray(data)
    if data.ndim != 3:
        raise NiftiFormatError(f"only 3-D volumes are written, got shape {data.shape}")
    if data.dtype not in _DTYPE_TO_CODE:
        raise NiftiFormatError(f"unsupported dtype {data.dtype}")
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (4, 4):
        raise NiftiFormatError("affine must be 4x4")

    hdr = np.zeros((), dtype=_HEADER_DTYPE)
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"] = [3, data.shape[0], data.shape[1], data.shape[2], 1, 1, 1, 1]
    hdr["datatype"] = _DTYPE_TO_CODE[data.dtype]
    hdr["bitpix"] = data.dtype.itemsize * 8
    spacing = np.sqrt((affine[:3, :3] ** 2).sum(axis=0))
    hdr["pixdim"] = [1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0]
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # millimetres
    hdr["sform_code"] = 1
    hdr["qform_code"] = 0
    hdr["srow_x"] = affine[0]
    hdr["srow_y"] = affine[1]
    hdr["srow_z"] = affine[2]
    hdr["magic"] = MAGIC_SINGLE

    # Emit little-endian regardless of host; readers detect order anyway and
    # fixing it keeps outputs byte-identical across platforms.
    body = hdr.astype(_HEADER_DTYPE.newbyteorder("<")).tobytes() + struct.pack("<i", 0)
    assert len(body) == int(VOX_OFFSET)
    le = data.astype(data.dtype.newbyteorder("<"), copy=False)
    payload = body + np.asfortranarray(le).tobytes(order="F")
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)
