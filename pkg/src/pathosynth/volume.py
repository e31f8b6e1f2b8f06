"""Core containers: voxel grid geometry, label maps, intensity volumes, masks.

Array axes are (x, y, z). Axis 0 runs left-to-right (lower x = anatomical
left), axis 1 runs along the anterior-posterior direction, axis 2 is
inferior-superior. "In-plane" means axes (0, 1).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import VocabularyError, VolumeError

# Canonical role names for the multi-label segmentation vocabulary.
ROLE_BACKGROUND = "background"
ROLE_EXTERNAL_CSF = "external_csf"
ROLE_GRAY_MATTER = "gray_matter"
ROLE_WHITE_MATTER = "white_matter"
ROLE_VENTRICLES = "ventricles"
ROLE_CEREBELLUM = "cerebellum"
ROLE_DEEP_GRAY_MATTER = "deep_gray_matter"
ROLE_BRAINSTEM = "brainstem"

# Roles of the reduced 4-class vocabulary used for diffusion conditioning.
ROLE_FLUID = "fluid"
ROLE_CORTEX = "cortex"
ROLE_MISC = "misc"

LEFT_SUFFIX = "_left"
RIGHT_SUFFIX = "_right"

# Default code assignment for a freshly labelled brain segmentation.
DEFAULT_VOCABULARY: dict[int, str] = {
    0: ROLE_BACKGROUND,
    1: ROLE_EXTERNAL_CSF,
    2: ROLE_GRAY_MATTER,
    3: ROLE_WHITE_MATTER,
    4: ROLE_VENTRICLES,
    5: ROLE_CEREBELLUM,
    6: ROLE_DEEP_GRAY_MATTER,
    7: ROLE_BRAINSTEM,
}

FOUR_CLASS_VOCABULARY: dict[int, str] = {
    0: ROLE_BACKGROUND,
    1: ROLE_FLUID,
    2: ROLE_CORTEX,
    3: ROLE_MISC,
}


def base_role(role: str) -> str:
    """Strip a hemisphere suffix, if any: 'white_matter_left' -> 'white_matter'."""
    for suffix in (LEFT_SUFFIX, RIGHT_SUFFIX):
        if role.endswith(suffix):
            return role[: -len(suffix)]
    return role


def _as_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise VolumeError(f"dims must be three positive integers, got {dims!r}")
    return dims


@dataclass(frozen=True)
class VolumeGeometry:
    """Grid shape plus the voxel-to-world mapping.

    spacing is the voxel edge length per axis in millimetres; affine is the
    4x4 homogeneous matrix taking voxel indices to world coordinates.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray = field(repr=False)

    def __init__(self, dims, spacing=(1.0, 1.0, 1.0), affine=None):
        dims = _as_dims(dims)
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise VolumeError(f"spacing must be three positive floats, got {spacing!r}")
        if affine is None:
            affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])
        affine = np.asarray(affine, dtype=np.float64)
        if affine.shape != (4, 4) or not np.all(np.isfinite(affine)):
            raise VolumeError("affine must be a finite 4x4 matrix")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VolumeGeometry):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.affine, other.affine)
        )

    def __hash__(self):
        return hash((self.dims, self.spacing, self.affine.tobytes()))

    @property
    def voxel_count(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def voxel_to_world(self, index) -> np.ndarray:
        """World coordinates of a voxel index (may be fractional)."""
        ijk = np.asarray(index, dtype=np.float64)
        return self.affine[:3, :3] @ ijk + self.affine[:3, 3]

    def translated(self, offset) -> "VolumeGeometry":
        """Geometry of a subgrid starting at ``offset``, same spacing."""
        affine = self.affine.copy()
        affine[:3, 3] = self.voxel_to_world(offset)
        return VolumeGeometry(self.dims, self.spacing, affine)

    def with_dims(self, dims) -> "VolumeGeometry":
        return VolumeGeometry(_as_dims(dims), self.spacing, self.affine)


def _check_grid(geometry: VolumeGeometry, voxels: np.ndarray) -> None:
    if tuple(voxels.shape) != geometry.dims:
        raise VolumeError(
            f"voxel array shape {voxels.shape} does not match geometry dims {geometry.dims}"
        )


@dataclass
class LabelVolume:
    """Integer-coded segmentation on a grid, with a code-to-role vocabulary.

    Every code present in ``voxels`` must appear in ``vocabulary``; the
    vocabulary may carry additional (currently unused) codes, which lets a
    hemisphere split retain the original codes for an exact merge later.
    """

    geometry: VolumeGeometry
    voxels: np.ndarray
    vocabulary: dict[int, str]

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels)
        if not np.issubdtype(self.voxels.dtype, np.integer):
            raise VolumeError(f"label voxels must be integers, got {self.voxels.dtype}")
        _check_grid(self.geometry, self.voxels)
        if self.voxels.min(initial=0) < 0:
            raise VolumeError("label codes must be non-negative")
        self.vocabulary = {int(k): str(v) for k, v in self.vocabulary.items()}
        present = set(int(c) for c in np.unique(self.voxels))
        missing = present - set(self.vocabulary)
        if missing:
            raise VocabularyError(f"codes {sorted(missing)} present but not in vocabulary")
        roles = list(self.vocabulary.values())
        if len(set(roles)) != len(roles):
            raise VocabularyError("vocabulary roles must be unique")

    # -- role lookups -------------------------------------------------

    def code_for(self, role: str) -> int:
        for code, r in self.vocabulary.items():
            if r == role:
                return code
        raise VocabularyError(f"role {role!r} not in vocabulary")

    def has_role(self, role: str) -> bool:
        return role in self.vocabulary.values()

    def codes_for_base(self, role: str) -> list[int]:
        """All codes whose role reduces to ``role`` after stripping a side suffix."""
        return sorted(c for c, r in self.vocabulary.items() if base_role(r) == role)

    @property
    def background_code(self) -> int:
        return self.code_for(ROLE_BACKGROUND)

    # -- mask extraction ----------------------------------------------

    def mask(self, role: str) -> np.ndarray:
        """Boolean mask of one role (exact match)."""
        return self.voxels == self.code_for(role)

    def mask_base(self, role: str) -> np.ndarray:
        """Boolean mask of a role including its _left/_right variants."""
        codes = self.codes_for_base(role)
        if not codes:
            raise VocabularyError(f"no codes for base role {role!r}")
        return np.isin(self.voxels, codes)

    def foreground(self) -> np.ndarray:
        return self.voxels != self.background_code

    # -- copies --------------------------------------------------------

    def with_voxels(self, voxels: np.ndarray, vocabulary: dict[int, str] | None = None) -> "LabelVolume":
        return LabelVolume(self.geometry, voxels, self.vocabulary if vocabulary is None else vocabulary)

    def copy(self) -> "LabelVolume":
        return LabelVolume(self.geometry, self.voxels.copy(), dict(self.vocabulary))


@dataclass
class IntensityVolume:
    """Scalar image on a grid; voxel values must be finite floats."""

    geometry: VolumeGeometry
    voxels: np.ndarray

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels)
        if not np.issubdtype(self.voxels.dtype, np.floating):
            self.voxels = self.voxels.astype(np.float64)
        _check_grid(self.geometry, self.voxels)
        if not np.all(np.isfinite(self.voxels)):
            raise VolumeError("intensity voxels must be finite")

    def with_voxels(self, voxels: np.ndarray) -> "IntensityVolume":
        return IntensityVolume(self.geometry, voxels)

    def copy(self) -> "IntensityVolume":
        return IntensityVolume(self.geometry, self.voxels.copy())


@dataclass
class BinaryMask:
    """Boolean occupancy grid used at morphology boundaries."""

    geometry: VolumeGeometry
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits)
        if self.bits.dtype != np.bool_:
            raise VolumeError(f"mask bits must be boolean, got {self.bits.dtype}")
        _check_grid(self.geometry, self.bits)

    @property
    def volume(self) -> int:
        return int(self.bits.sum())

    def with_bits(self, bits: np.ndarray) -> "BinaryMask":
        return BinaryMask(self.geometry, bits)


@dataclass
class CropRecord:
    """Everything needed to undo crop + resize + intensity normalization.

    offset is the corner (inclusive) of the crop box in the original grid;
    cropped_dims the box size; target_dims the resize target. intensity_min
    and intensity_max are the pre-normalization extremes (None for
    label-only runs). original_spacing/original_affine restore geometry.
    """

    original_dims: tuple[int, int, int]
    offset: tuple[int, int, int]
    cropped_dims: tuple[int, int, int]
    target_dims: tuple[int, int, int]
    original_spacing: tuple[float, float, float]
    original_affine: list[list[float]]
    intensity_min: float | None = None
    intensity_max: float | None = None

    def __post_init__(self):
        self.original_dims = _as_dims(self.original_dims)
        self.offset = tuple(int(o) for o in self.offset)
        self.cropped_dims = _as_dims(self.cropped_dims)
        self.target_dims = _as_dims(self.target_dims)
        self.original_spacing = tuple(float(s) for s in self.original_spacing)
        self.original_affine = [[float(v) for v in row] for row in self.original_affine]
        if any(o < 0 for o in self.offset):
            raise VolumeError("crop offset must be non-negative")
        for off, cd, od in zip(self.offset, self.cropped_dims, self.original_dims):
            if off + cd > od:
                raise VolumeError("crop box exceeds original dims")

    def original_geometry(self) -> VolumeGeometry:
        return VolumeGeometry(self.original_dims, self.original_spacing, np.array(self.original_affine))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "CropRecord":
        return cls(**payload)
