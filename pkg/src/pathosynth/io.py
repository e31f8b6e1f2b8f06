"""Volume file I/O: NIfTI voxel data plus JSON sidecars.

A label volume ``subject.nii.gz`` carries its code-to-role vocabulary in
``subject.labels.json`` next to it. Crop records and pathology plans are
plain JSON files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import nifti
from .errors import VolumeError
from .volume import (
    DEFAULT_VOCABULARY,
    CropRecord,
    IntensityVolume,
    LabelVolume,
    VolumeGeometry,
)


def _strip_volume_suffixes(path: Path) -> Path:
    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path.with_suffix("")


def sidecar_path(volume_path) -> Path:
    """Path of the vocabulary sidecar for a volume file."""
    return _strip_volume_suffixes(Path(volume_path)).with_suffix(".labels.json")


def load_vocabulary(path) -> dict[int, str]:
    payload = json.loads(Path(path).read_text())
    return {int(code): str(role) for code, role in payload.items()}


def save_vocabulary(vocabulary: dict[int, str], path) -> None:
    ordered = {str(code): vocabulary[code] for code in sorted(vocabulary)}
    Path(path).write_text(json.dumps(ordered, indent=2) + "\n")


def _geometry_from_file(data: np.ndarray, affine: np.ndarray) -> VolumeGeometry:
    spacing = tuple(float(s) for s in np.sqrt((affine[:3, :3] ** 2).sum(axis=0)))
    spacing = tuple(s if s > 0 else 1.0 for s in spacing)
    return VolumeGeometry(data.shape, spacing, affine)


def read_volume(path, kind: str, vocabulary: dict[int, str] | None = None):
    """Read a NIfTI volume as a LabelVolume or IntensityVolume.

    kind: "label" or "intensity". For labels the vocabulary is taken from,
    in order: the ``vocabulary`` argument, a ``.labels.json`` sidecar, or a
    default covering the codes present (generic names for unknown codes).
    """
    path = Path(path)
    data, affine = nifti.read_nifti(path)
    geometry = _geometry_from_file(data, affine)

    if kind == "intensity":
        voxels = data if np.issubdtype(data.dtype, np.floating) else data.astype(np.float64)
        return IntensityVolume(geometry, voxels)
    if kind != "label":
        raise VolumeError(f"kind must be 'label' or 'intensity', got {kind!r}")

    if np.issubdtype(data.dtype, np.floating):
        rounded = np.rint(data)
        if not np.array_equal(rounded, data):
            raise VolumeError(f"{path}: label volume has non-integer values")
        data = rounded.astype(np.int32)
    if vocabulary is None:
        sidecar = sidecar_path(path)
        if sidecar.is_file():
            vocabulary = load_vocabulary(sidecar)
        else:
            present = [int(c) for c in np.unique(data)]
            vocabulary = {
                c: DEFAULT_VOCABULARY.get(c, f"label_{c}") for c in sorted(set(present) | {0})
            }
    return LabelVolume(geometry, data.astype(np.int32), vocabulary)


def write_volume(volume, path) -> None:
    """Write a volume to .nii/.nii.gz; label volumes also get a sidecar."""
    path = Path(path)
    if isinstance(volume, LabelVolume):
        codes = volume.voxels
        dtype = np.int16 if codes.max(initial=0) <= np.iinfo(np.int16).max else np.int32
        nifti.write_nifti(path, codes.astype(dtype), volume.geometry.affine)
        save_vocabulary(volume.vocabulary, sidecar_path(path))
    elif isinstance(volume, IntensityVolume):
        voxels = volume.voxels
        if voxels.dtype not in (np.float32, np.float64):
            voxels = voxels.astype(np.float64)
        nifti.write_nifti(path, voxels, volume.geometry.affine)
    else:
        raise VolumeError(f"cannot write object of type {type(volume).__name__}")


def save_crop_record(record: CropRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_dict(), indent=2) + "\n")


def load_crop_record(path) -> CropRecord:
    return CropRecord.from_dict(json.loads(Path(path).read_text()))
