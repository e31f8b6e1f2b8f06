"""Label-map preparation: cleanup, class reduction, hemisphere handling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import morphology
from .errors import VocabularyError, VolumeError
from .volume import (
    FOUR_CLASS_VOCABULARY,
    LEFT_SUFFIX,
    RIGHT_SUFFIX,
    ROLE_BACKGROUND,
    ROLE_BRAINSTEM,
    ROLE_CEREBELLUM,
    ROLE_CORTEX,
    ROLE_DEEP_GRAY_MATTER,
    ROLE_EXTERNAL_CSF,
    ROLE_FLUID,
    ROLE_GRAY_MATTER,
    ROLE_MISC,
    ROLE_VENTRICLES,
    ROLE_WHITE_MATTER,
    BinaryMask,
    LabelVolume,
    base_role,
)

CLASS_NAMES = {0: ROLE_BACKGROUND, 1: ROLE_FLUID, 2: ROLE_CORTEX, 3: ROLE_MISC}


@dataclass(frozen=True)
class ClassMap:
    """Base-role to reduced-class assignment (classes 0..3)."""

    role_to_class: dict[str, int]

    def __post_init__(self):
        for role, cls in self.role_to_class.items():
            if cls not in CLASS_NAMES:
                raise VocabularyError(f"class for {role!r} must be 0..3, got {cls}")

    def class_of(self, role: str) -> int:
        key = base_role(role)
        if key not in self.role_to_class:
            raise VocabularyError(f"role {role!r} has no class assignment")
        return self.role_to_class[key]


def default_class_map() -> ClassMap:
    """Fluid = external CSF + ventricles; cortex = gray matter; misc = the rest."""
    return ClassMap(
        {
            ROLE_BACKGROUND: 0,
            ROLE_EXTERNAL_CSF: 1,
            ROLE_VENTRICLES: 1,
            ROLE_GRAY_MATTER: 2,
            ROLE_WHITE_MATTER: 3,
            ROLE_CEREBELLUM: 3,
            ROLE_DEEP_GRAY_MATTER: 3,
            ROLE_BRAINSTEM: 3,
        }
    )


def remap_classes(labels: LabelVolume, class_map: ClassMap | None = None) -> LabelVolume:
    """Collapse a multi-label segmentation to the 4-class vocabulary."""
    class_map = class_map or default_class_map()
    lookup = np.zeros(int(labels.voxels.max(initial=0)) + 1, dtype=np.int32)
    for code in np.unique(labels.voxels):
        lookup[code] = class_map.class_of(labels.vocabulary[int(code)])
    return LabelVolume(labels.geometry, lookup[labels.voxels], dict(FOUR_CLASS_VOCABULARY))


def clean_small_components(
    labels: LabelVolume, min_size: int = 20, connectivity: int = 26
) -> LabelVolume:
    """Reassign connected components smaller than min_size voxels.

    Components are measured per label code (background included) on the
    input. Each small component is reassigned wholesale to the label that
    occurs most often in the one-voxel 26-neighbourhood shell around it,
    read from the *input* labels; ties pick the smallest code. All
    reassignments are computed from the input snapshot and applied at once,
    so processing order cannot influence the result.
    """
    if min_size < 0:
        raise VolumeError("min_size must be >= 0")
    src = labels.voxels
    out = src.copy()
    full = morphology.FULL
    for code in np.unique(src):
        comp_map, count = morphology.label_components(src == code, connectivity)
        if count == 0:
            continue
        sizes = np.bincount(comp_map.ravel())
        for k in range(1, count + 1):
            if sizes[k] >= min_size:
                continue
            comp = comp_map == k
            shell = morphology.dilate(comp, full, 1) & ~comp
            around = src[shell]
            if around.size == 0:  # component fills the whole grid
                continue
            counts = np.bincount(around)
            out[comp] = int(np.argmax(counts))  # argmax takes the smallest code on ties
    return labels.with_voxels(out)


@dataclass
class HemisphereSplit:
    """Bookkeeping for a left/right split: code assignments and clustering state."""

    roles: tuple[str, ...]
    original_codes: dict[str, int]
    left_codes: dict[str, int]
    right_codes: dict[str, int]
    rotation_degrees: float
    centers: np.ndarray = field(repr=False)  # (2, 3) cluster centers, rotated frame
    iterations: int = 0


def _rotate_xy(coords: np.ndarray, degrees: float, center: np.ndarray) -> np.ndarray:
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    shifted = coords - center
    out = shifted.copy()
    out[:, 0] = cos * shifted[:, 0] - sin * shifted[:, 1]
    out[:, 1] = sin * shifted[:, 0] + cos * shifted[:, 1]
    return out + center


def _two_means(coords: np.ndarray, max_iterations: int = 100):
    """Lloyd's algorithm, k=2, seeded by splitting at the mean x coordinate."""
    x = coords[:, 0]
    pivot = x.mean()
    low = coords[x <= pivot]
    high = coords[x > pivot]
    if low.size == 0 or high.size == 0:
        raise VolumeError("cannot split: structure is one-sided along x")
    centers = np.stack([low.mean(axis=0), high.mean(axis=0)])
    assign = np.zeros(len(coords), dtype=bool)
    for iteration in range(1, max_iterations + 1):
        d0 = ((coords - centers[0]) ** 2).sum(axis=1)
        d1 = ((coords - centers[1]) ** 2).sum(axis=1)
        new_assign = d1 < d0  # True -> cluster 1; ties stay with cluster 0
        if iteration > 1 and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        if assign.all() or not assign.any():
            raise VolumeError("cannot split: clustering collapsed to one side")
        centers = np.stack([coords[~assign].mean(axis=0), coords[assign].mean(axis=0)])
    return assign, centers, iteration


def split_hemispheres(
    labels: LabelVolume,
    roles: tuple[str, ...] = (ROLE_WHITE_MATTER, ROLE_VENTRICLES),
    rotation_degrees: float = 0.0,
) -> tuple[LabelVolume, HemisphereSplit]:
    """Split bilateral structures into _left/_right coded halves.

    Voxel coordinates of the union of the named roles are clustered into two
    groups (k-means, k=2); the cluster with the smaller mean x becomes left.
    rotation_degrees rotates the coordinates in the x-y plane about the grid
    center before clustering, for volumes whose anterior-posterior axis is
    not aligned with y. The rotation only affects clustering; voxels are
    never moved, so undoing it later is a no-op. The original codes stay in
    the vocabulary so a later merge restores them exactly.
    """
    for role in roles:
        if not labels.has_role(role):
            raise VocabularyError(f"role {role!r} not present, cannot split")
    union = np.zeros(labels.geometry.dims, dtype=bool)
    for role in roles:
        union |= labels.mask(role)
    coords = np.argwhere(union).astype(np.float64)
    if coords.size == 0:
        raise VolumeError("nothing to split: named roles are empty")

    grid_center = (np.asarray(labels.geometry.dims, dtype=np.float64) - 1.0) / 2.0
    rotated = _rotate_xy(coords, rotation_degrees, grid_center) if rotation_degrees else coords
    assign, centers, iterations = _two_means(rotated)
    if centers[0, 0] > centers[1, 0]:  # enforce: cluster 0 = smaller mean x = left
        assign = ~assign
        centers = centers[::-1].copy()

    side_of = np.zeros(labels.geometry.dims, dtype=np.int8)  # 0 none, 1 left, 2 right
    idx = coords.astype(np.intp)
    side_of[idx[:, 0], idx[:, 1], idx[:, 2]] = np.where(assign, 2, 1)

    voxels = labels.voxels.copy()
    vocabulary = dict(labels.vocabulary)
    next_code = max(vocabulary) + 1
    original_codes: dict[str, int] = {}
    left_codes: dict[str, int] = {}
    right_codes: dict[str, int] = {}
    for role in roles:
        code = labels.code_for(role)
        left, right = next_code, next_code + 1
        next_code += 2
        vocabulary[left] = role + LEFT_SUFFIX
        vocabulary[right] = role + RIGHT_SUFFIX
        role_mask = labels.mask(role)
        voxels[role_mask & (side_of == 1)] = left
        voxels[role_mask & (side_of == 2)] = right
        original_codes[role] = code
        left_codes[role] = left
        right_codes[role] = right

    split = HemisphereSplit(
        roles=tuple(roles),
        original_codes=original_codes,
        left_codes=left_codes,
        right_codes=right_codes,
        rotation_degrees=float(rotation_degrees),
        centers=centers,
        iterations=iterations,
    )
    return LabelVolume(labels.geometry, voxels, vocabulary), split


def merge_hemispheres(labels: LabelVolume, split: HemisphereSplit | None = None) -> LabelVolume:
    """Undo a hemisphere split, restoring the original codes exactly."""
    voxels = labels.voxels.copy()
    vocabulary = dict(labels.vocabulary)
    if split is not None:
        pairs = [
            (split.left_codes[role], split.right_codes[role], split.original_codes[role])
            for role in split.roles
        ]
    else:
        pairs = []
        for code, role in labels.vocabulary.items():
            if role.endswith(LEFT_SUFFIX):
                base = base_role(role)
                try:
                    right = labels.code_for(base + RIGHT_SUFFIX)
                    original = labels.code_for(base)
                except VocabularyError as exc:
                    raise VocabularyError(f"cannot merge {role!r}: {exc}") from exc
                pairs.append((code, right, original))
        if not pairs:
            raise VocabularyError("no hemisphere-split roles to merge")
    for left, right, original in pairs:
        voxels[voxels == left] = original
        voxels[voxels == right] = original
        vocabulary.pop(left, None)
        vocabulary.pop(right, None)
    return LabelVolume(labels.geometry, voxels, vocabulary)


def extract_fourth_ventricle(labels: LabelVolume, iterations: int = 4) -> BinaryMask:
    """Ventricle voxels within a few in-plane dilations of brainstem/cerebellum.

    The lateral ventricles sit well away from the posterior fossa, so
    growing the brainstem-plus-cerebellum region a few voxels in x-y and
    intersecting with the ventricle labels isolates the fourth ventricle.
    """
    seed = labels.mask_base(ROLE_BRAINSTEM) | labels.mask_base(ROLE_CEREBELLUM)
    if not seed.any():
        raise VolumeError("brainstem and cerebellum are empty; cannot locate the fourth ventricle")
    grown = morphology.dilate(seed, morphology.IN_PLANE, iterations)
    ventricles = labels.mask_base(ROLE_VENTRICLES)
    return BinaryMask(labels.geometry, grown & ventricles)
