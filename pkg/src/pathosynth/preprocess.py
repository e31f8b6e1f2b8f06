"""Geometry preprocessing for diffusion training and its exact reversal.

The forward path is cleanup -> class remap -> crop to foreground ->
intensity normalization -> isotropic resize; every lossy step stores what
it needs in a CropRecord so revert_geometry can restore native dims,
position and intensity range.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from . import labelprep
from .errors import VolumeError
from .labelprep import ClassMap
from .volume import CropRecord, IntensityVolume, LabelVolume, VolumeGeometry


def _source_positions(n_out: int, n_in: int) -> np.ndarray:
    """Voxel-center aligned source coordinates for a 1-D resize."""
    i = np.arange(n_out, dtype=np.float64)
    return (i + 0.5) * (n_in / n_out) - 0.5


def _nearest_indices(n_out: int, n_in: int) -> np.ndarray:
    src = _source_positions(n_out, n_in)
    idx = np.ceil(src - 0.5).astype(np.int64)  # ties go to the lower index
    return np.clip(idx, 0, n_in - 1)


def _resize_nearest(voxels: np.ndarray, target: tuple[int, int, int]) -> np.ndarray:
    ix = _nearest_indices(target[0], voxels.shape[0])
    iy = _nearest_indices(target[1], voxels.shape[1])
    iz = _nearest_indices(target[2], voxels.shape[2])
    return voxels[np.ix_(ix, iy, iz)]


def _resize_trilinear(voxels: np.ndarray, target: tuple[int, int, int]) -> np.ndarray:
    data = voxels.astype(np.float64, copy=False)
    for axis in range(3):
        n_in = data.shape[axis]
        n_out = target[axis]
        if n_out == n_in:
            continue
        src = _source_positions(n_out, n_in)
        lo = np.clip(np.floor(src).astype(np.int64), 0, n_in - 1)
        hi = np.clip(lo + 1, 0, n_in - 1)
        frac = np.clip(src - lo, 0.0, 1.0)
        shape = [1, 1, 1]
        shape[axis] = n_out
        w = frac.reshape(shape)
        data = np.take(data, lo, axis=axis) * (1.0 - w) + np.take(data, hi, axis=axis) * w
    return data


def _resized_geometry(geometry: VolumeGeometry, target: tuple[int, int, int]) -> VolumeGeometry:
    ratios = np.array([n_in / n_out for n_in, n_out in zip(geometry.dims, target)])
    affine = geometry.affine.copy()
    affine[:3, :3] = geometry.affine[:3, :3] * ratios[np.newaxis, :]
    first_src = 0.5 * ratios - 0.5  # source position of output voxel 0
    affine[:3, 3] = geometry.voxel_to_world(first_src)
    spacing = tuple(float(s * r) for s, r in zip(geometry.spacing, ratios))
    return VolumeGeometry(target, spacing, affine)


def resize_isotropic(volume, target_dims, mode: str = "nearest"):
    """Resample a volume to target_dims with voxel-center alignment.

    mode "nearest" works for labels and intensities; "trilinear" only for
    intensities. Physical extent (dims x spacing) is preserved exactly.
    """
    target = tuple(int(d) for d in target_dims)
    if len(target) != 3 or any(d < 1 for d in target):
        raise VolumeError(f"target_dims must be three positive integers, got {target_dims!r}")
    geometry = _resized_geometry(volume.geometry, target)
    if isinstance(volume, LabelVolume):
        if mode != "nearest":
            raise VolumeError("label volumes must be resized with mode='nearest'")
        return LabelVolume(geometry, _resize_nearest(volume.voxels, target), volume.vocabulary)
    if isinstance(volume, IntensityVolume):
        if mode == "nearest":
            return IntensityVolume(geometry, _resize_nearest(volume.voxels, target))
        if mode == "trilinear":
            return IntensityVolume(geometry, _resize_trilinear(volume.voxels, target))
        raise VolumeError(f"unknown resize mode {mode!r}")
    raise VolumeError(f"cannot resize object of type {type(volume).__name__}")


def crop_to_foreground(labels: LabelVolume, margin: int = 0, intensity: IntensityVolume | None = None):
    """Crop to the label foreground bounding box plus a margin.

    Returns (labels, record) or (labels, intensity, record) when a paired
    intensity volume is given; the pair must share the grid and is cropped
    with the same box.
    """
    if margin < 0:
        raise VolumeError("margin must be >= 0")
    if intensity is not None and intensity.geometry != labels.geometry:
        raise VolumeError("label and intensity grids differ")
    fg = labels.foreground()
    if not fg.any():
        raise VolumeError("cannot crop: volume is entirely background")
    coords = np.argwhere(fg)
    lo = np.maximum(coords.min(axis=0) - margin, 0)
    hi = np.minimum(coords.max(axis=0) + margin + 1, labels.geometry.dims)
    box = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    cropped_dims = tuple(int(b - a) for a, b in zip(lo, hi))

    record = CropRecord(
        original_dims=labels.geometry.dims,
        offset=tuple(int(a) for a in lo),
        cropped_dims=cropped_dims,
        target_dims=cropped_dims,
        original_spacing=labels.geometry.spacing,
        original_affine=labels.geometry.affine.tolist(),
    )
    geometry = VolumeGeometry(
        cropped_dims, labels.geometry.spacing, labels.geometry.translated(lo).affine
    )
    cropped_labels = LabelVolume(geometry, labels.voxels[box], labels.vocabulary)
    if intensity is None:
        return cropped_labels, record
    cropped_intensity = IntensityVolume(geometry, intensity.voxels[box])
    return cropped_labels, cropped_intensity, record


def normalize_intensity(volume: IntensityVolume) -> tuple[IntensityVolume, tuple[float, float]]:
    """Affinely map intensities to [-1, 1]; returns the original (min, max)."""
    vmin = float(volume.voxels.min())
    vmax = float(volume.voxels.max())
    if vmax <= vmin:
        raise VolumeError("cannot normalize a constant intensity volume")
    scaled = (volume.voxels.astype(np.float64) - vmin) / (vmax - vmin) * 2.0 - 1.0
    return IntensityVolume(volume.geometry, scaled), (vmin, vmax)


def denormalize_intensity(volume: IntensityVolume, bounds: tuple[float, float]) -> IntensityVolume:
    vmin, vmax = float(bounds[0]), float(bounds[1])
    if vmax <= vmin:
        raise VolumeError(f"invalid intensity bounds ({vmin}, {vmax})")
    restored = (volume.voxels.astype(np.float64) + 1.0) / 2.0 * (vmax - vmin) + vmin
    return IntensityVolume(volume.geometry, restored)


def revert_geometry(volume, record: CropRecord):
    """Undo resize and crop, restoring the original grid and position.

    Labels are resized back with nearest-neighbour and padded with
    background. Intensities use trilinear, are expected to be denormalized
    already (see denormalize_intensity), and pad with the recorded
    pre-normalization minimum (zero when none was recorded).
    """
    if volume.geometry.dims != record.target_dims:
        raise VolumeError(
            f"volume dims {volume.geometry.dims} do not match record target {record.target_dims}"
        )
    original_geometry = record.original_geometry()
    box = tuple(
        slice(off, off + size) for off, size in zip(record.offset, record.cropped_dims)
    )
    if isinstance(volume, LabelVolume):
        small = resize_isotropic(volume, record.cropped_dims, mode="nearest")
        canvas = np.full(record.original_dims, volume.background_code, dtype=volume.voxels.dtype)
        canvas[box] = small.voxels
        return LabelVolume(original_geometry, canvas, volume.vocabulary)
    if isinstance(volume, IntensityVolume):
        small = resize_isotropic(volume, record.cropped_dims, mode="trilinear")
        fill = record.intensity_min if record.intensity_min is not None else 0.0
        canvas = np.full(record.original_dims, float(fill), dtype=np.float64)
        canvas[box] = small.voxels
        return IntensityVolume(original_geometry, canvas)
    raise VolumeError(f"cannot revert object of type {type(volume).__name__}")


def prepare_labels(
    labels: LabelVolume,
    target_dims=(160, 160, 160),
    margin: int = 0,
    min_size: int = 20,
    connectivity: int = 26,
    class_map: ClassMap | None = None,
) -> tuple[LabelVolume, CropRecord]:
    """Full label pipeline: cleanup -> 4-class remap -> crop -> resize."""
    cleaned = labelprep.clean_small_components(labels, min_size=min_size, connectivity=connectivity)
    remapped = labelprep.remap_classes(cleaned, class_map)
    cropped, record = crop_to_foreground(remapped, margin=margin)
    resized = resize_isotropic(cropped, target_dims, mode="nearest")
    record = dataclasses.replace(record, target_dims=resized.geometry.dims)
    return resized, record


def prepare_pair(
    labels: LabelVolume,
    image: IntensityVolume,
    target_dims=(160, 160, 160),
    margin: int = 0,
    min_size: int = 20,
    connectivity: int = 26,
    class_map: ClassMap | None = None,
) -> tuple[LabelVolume, IntensityVolume, CropRecord]:
    """Label pipeline plus the paired image: crop together, normalize, resize."""
    cleaned = labelprep.clean_small_components(labels, min_size=min_size, connectivity=connectivity)
    remapped = labelprep.remap_classes(cleaned, class_map)
    cropped_labels, cropped_image, record = crop_to_foreground(
        remapped, margin=margin, intensity=image
    )
    normalized, (vmin, vmax) = normalize_intensity(cropped_image)
    resized_labels = resize_isotropic(cropped_labels, target_dims, mode="nearest")
    resized_image = resize_isotropic(normalized, target_dims, mode="trilinear")
    record = dataclasses.replace(
        record,
        target_dims=resized_labels.geometry.dims,
        intensity_min=vmin,
        intensity_max=vmax,
    )
    return resized_labels, resized_image, record
