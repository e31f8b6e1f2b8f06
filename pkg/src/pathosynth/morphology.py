"""3-D binary morphology primitives.

All operations treat voxels outside the grid as background. Functions
accept either a BinaryMask or a plain boolean array and return the same
kind. Connectivity names: 6 = face neighbours, 18 = face+edge,
26 = the full 3x3x3 neighbourhood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask


def _structure(connectivity: int) -> np.ndarray:
    try:
        rank = {6: 1, 18: 2, 26: 3}[int(connectivity)]
    except KeyError:
        raise VolumeError(f"connectivity must be 6, 18 or 26, got {connectivity!r}") from None
    return ndimage.generate_binary_structure(3, rank)


def _in_plane_structure() -> np.ndarray:
    # 4-neighbourhood in the x-y plane only; never touches z.
    s = np.zeros((3, 3, 3), dtype=bool)
    s[:, 1, 1] = True
    s[1, :, 1] = True
    return s


@dataclass(frozen=True)
class StructuringElement:
    """Named 3x3x3 neighbourhood used by dilation and erosion."""

    name: str
    footprint: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def face(cls) -> "StructuringElement":
        return cls("face", _structure(6))

    @classmethod
    def full(cls) -> "StructuringElement":
        return cls("full", _structure(26))

    @classmethod
    def in_plane(cls) -> "StructuringElement":
        return cls("in_plane", _in_plane_structure())

    @classmethod
    def named(cls, name: str) -> "StructuringElement":
        try:
            return {"face": cls.face, "full": cls.full, "in_plane": cls.in_plane}[name]()
        except KeyError:
            raise VolumeError(f"unknown structuring element {name!r}") from None


FACE = StructuringElement.face()
FULL = StructuringElement.full()
IN_PLANE = StructuringElement.in_plane()


def _bits_of(mask) -> tuple[np.ndarray, "callable"]:
    """Unwrap to a boolean array plus a rewrapper preserving the input kind."""
    if isinstance(mask, BinaryMask):
        return mask.bits, mask.with_bits
    bits = np.asarray(mask)
    if bits.dtype != np.bool_:
        raise VolumeError(f"expected a boolean mask, got dtype {bits.dtype}")
    return bits, lambda b: b


def dilate(mask, element: StructuringElement = FACE, iterations: int = 1):
    bits, wrap = _bits_of(mask)
    if iterations < 0:
        raise VolumeError("iterations must be >= 0")
    if iterations == 0:
        return wrap(bits.copy())
    return wrap(ndimage.binary_dilation(bits, structure=element.footprint, iterations=iterations))


def erode(mask, element: StructuringElement = FACE, iterations: int = 1):
    bits, wrap = _bits_of(mask)
    if iterations < 0:
        raise VolumeError("iterations must be >= 0")
    if iterations == 0:
        return wrap(bits.copy())
    return wrap(ndimage.binary_erosion(bits, structure=element.footprint, iterations=iterations))


def smooth_mask(mask, element: StructuringElement = FACE, iterations: int = 1):
    """Morphological closing followed by opening; rounds off spurs and slits."""
    closed = erode(dilate(mask, element, iterations), element, iterations)
    return dilate(erode(closed, element, iterations), element, iterations)


def connected_components(mask, connectivity: int = 26) -> list:
    """Components as masks, largest first; ties broken by first voxel in scan order."""
    bits, wrap = _bits_of(mask)
    labeled, count = ndimage.label(bits, structure=_structure(connectivity))
    if count == 0:
        return []
    sizes = np.bincount(labeled.ravel())
    # first occurrence of each label in C-order flattening = lexicographically
    # smallest voxel of that component
    values, first = np.unique(labeled.ravel(), return_index=True)
    first_of = dict(zip(values.tolist(), first.tolist()))
    order = sorted(range(1, count + 1), key=lambda k: (-int(sizes[k]), first_of[k]))
    return [wrap(labeled == k) for k in order]


def label_components(bits: np.ndarray, connectivity: int = 26) -> tuple[np.ndarray, int]:
    """Raw scipy labelling, for callers that need the integer component map."""
    labeled, count = ndimage.label(np.asarray(bits), structure=_structure(connectivity))
    return labeled, int(count)


def centroid(mask) -> np.ndarray:
    """Mean voxel index of the set voxels, as float (x, y, z)."""
    bits, _ = _bits_of(mask)
    if not bits.any():
        raise VolumeError("centroid of an empty mask is undefined")
    return np.argwhere(bits).mean(axis=0)


def distance_from(mask) -> np.ndarray:
    """Euclidean distance (voxel units) from every voxel to the nearest set voxel.

    An empty mask yields +inf everywhere.
    """
    bits, _ = _bits_of(mask)
    if not bits.any():
        return np.full(bits.shape, np.inf)
    return ndimage.distance_transform_edt(~bits)


def min_distance(mask_a, mask_b) -> float:
    """Minimum Euclidean distance (voxel units) between set voxels of a and b.

    Zero when the masks overlap; infinity when either is empty.
    """
    a, _ = _bits_of(mask_a)
    b, _ = _bits_of(mask_b)
    if a.shape != b.shape:
        raise VolumeError("masks must share a grid")
    if not a.any() or not b.any():
        return float("inf")
    dist_to_b = ndimage.distance_transform_edt(~b)
    return float(dist_to_b[a].min())


def scale_mask(mask, factors, center=None):
    """Rescale a mask about a point by per-axis factors, nearest-neighbour.

    The output voxel at q is set iff the source position
    center + (q - center) / f rounds to a set input voxel. Rounding ties go
    to the lower index; source positions outside the grid are background.
    Factors below 1 shrink the shape toward the center.
    """
    bits, wrap = _bits_of(mask)
    f = np.broadcast_to(np.asarray(factors, dtype=np.float64), (3,)).copy()
    if np.any(f <= 0) or not np.all(np.isfinite(f)):
        raise VolumeError(f"scale factors must be positive finite, got {factors!r}")
    if center is None:
        center = centroid(bits)
    c = np.asarray(center, dtype=np.float64)
    if np.all(f == 1.0):
        return wrap(bits.copy())

    shape = bits.shape
    out = np.zeros(shape, dtype=bool)
    axes_src = []
    axes_ok = []
    for ax in range(3):
        q = np.arange(shape[ax], dtype=np.float64)
        src = c[ax] + (q - c[ax]) / f[ax]
        idx = np.ceil(src - 0.5).astype(np.int64)  # nearest, ties to lower index
        ok = (idx >= 0) & (idx < shape[ax])
        axes_src.append(np.clip(idx, 0, shape[ax] - 1))
        axes_ok.append(ok)
    gathered = bits[np.ix_(axes_src[0], axes_src[1], axes_src[2])]
    valid = (
        axes_ok[0][:, None, None] & axes_ok[1][None, :, None] & axes_ok[2][None, None, :]
    )
    np.copyto(out, gathered, where=valid)
    return wrap(out)
