"""Synthetic pathology: plan sampling and label-map surgery.

Supported conditions: ventriculomegaly (VM), cerebellar hypoplasia (CH),
pontocerebellar hypoplasia (PCH) and microcephaly. A PathologyPlan pins
which conditions apply and how severely; apply_plan edits a multi-label
segmentation accordingly and is fully deterministic given (labels, plan).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import labelprep, morphology
from .errors import PlanError, SynthesisError, VocabularyError
from .seeds import derive_seed
from .volume import (
    LEFT_SUFFIX,
    RIGHT_SUFFIX,
    ROLE_BRAINSTEM,
    ROLE_CEREBELLUM,
    ROLE_EXTERNAL_CSF,
    ROLE_FLUID,
    ROLE_VENTRICLES,
    ROLE_WHITE_MATTER,
    LabelVolume,
)

VENTRICULOMEGALY = "ventriculomegaly"
CEREBELLAR_HYPOPLASIA = "cerebellar_hypoplasia"
PONTOCEREBELLAR_HYPOPLASIA = "pontocerebellar_hypoplasia"
MICROCEPHALY = "microcephaly"

# Fixed order: used for the initial uniform draw, the follow-up coin flips,
# and the severity draws. Application order is microcephaly -> hypoplasia
# -> ventriculomegaly, see apply_plan.
PATHOLOGY_ORDER = (
    VENTRICULOMEGALY,
    CEREBELLAR_HYPOPLASIA,
    PONTOCEREBELLAR_HYPOPLASIA,
    MICROCEPHALY,
)

VM_BUDGET = 0.65  # grown ventricle may use at most this fraction of hemisphere WM
VM_CLEARANCE = 2.0  # voxels kept clear of every non-WM, non-ventricle structure
HYPOPLASIA_MAX_SHRINK = 0.20
MICRO_MAX_SHRINK = 0.10
# Asymmetric VM draws a per-side attenuation in this range so both sides
# stay visibly enlarged at high severity while differing in extent.
VM_ASYMMETRY_RANGE = (0.25, 1.0)


@dataclass
class PathologyPlan:
    """Which conditions to synthesize, their severities, and the plan seed.

    severities live in [0, 1] and are present exactly for the selected
    conditions. Invariants: CH and PCH are mutually exclusive;
    microcephaly requires VM. vm_iterations, when set, overrides the
    severity-derived dilation counts (left, right).
    """

    seed: int
    initial: str
    ventriculomegaly: bool = False
    vm_severity: float | None = None
    vm_symmetric: bool | None = None
    cerebellar_hypoplasia: bool = False
    ch_severity: float | None = None
    pontocerebellar_hypoplasia: bool = False
    pch_severity: float | None = None
    microcephaly: bool = False
    micro_severity: float | None = None
    vm_iterations: tuple[int, int] | None = None

    def __post_init__(self):
        self.validate()

    def selected(self) -> list[str]:
        return [name for name in PATHOLOGY_ORDER if getattr(self, _FLAG[name])]

    def validate(self) -> None:
        flags = {name: bool(getattr(self, _FLAG[name])) for name in PATHOLOGY_ORDER}
        if not any(flags.values()):
            raise PlanError("plan selects no pathology")
        if self.initial not in PATHOLOGY_ORDER:
            raise PlanError(f"unknown initial pathology {self.initial!r}")
        if not flags[self.initial]:
            raise PlanError("initial pathology is not selected")
        if flags[CEREBELLAR_HYPOPLASIA] and flags[PONTOCEREBELLAR_HYPOPLASIA]:
            raise PlanError("cerebellar and pontocerebellar hypoplasia are mutually exclusive")
        if flags[MICROCEPHALY] and not flags[VENTRICULOMEGALY]:
            raise PlanError("microcephaly requires ventriculomegaly")
        for name in PATHOLOGY_ORDER:
            severity = getattr(self, _SEVERITY[name])
            if flags[name]:
                if severity is None or not 0.0 <= severity <= 1.0:
                    raise PlanError(f"{name}: severity must be in [0, 1], got {severity!r}")
            elif severity is not None:
                raise PlanError(f"{name}: severity given but condition not selected")
        if flags[VENTRICULOMEGALY] and self.vm_symmetric is None:
            raise PlanError("ventriculomegaly requires vm_symmetric")
        if self.vm_iterations is not None:
            left, right = self.vm_iterations
            if left < 0 or right < 0:
                raise PlanError("vm_iterations must be non-negative")

    def to_dict(self) -> dict:
        payload = dataclasses.asdict(self)
        if payload["vm_iterations"] is not None:
            payload["vm_iterations"] = list(payload["vm_iterations"])
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "PathologyPlan":
        data = dict(payload)
        if data.get("vm_iterations") is not None:
            data["vm_iterations"] = tuple(int(v) for v in data["vm_iterations"])
        return cls(**data)


_FLAG = {
    VENTRICULOMEGALY: "ventriculomegaly",
    CEREBELLAR_HYPOPLASIA: "cerebellar_hypoplasia",
    PONTOCEREBELLAR_HYPOPLASIA: "pontocerebellar_hypoplasia",
    MICROCEPHALY: "microcephaly",
}
_SEVERITY = {
    VENTRICULOMEGALY: "vm_severity",
    CEREBELLAR_HYPOPLASIA: "ch_severity",
    PONTOCEREBELLAR_HYPOPLASIA: "pch_severity",
    MICROCEPHALY: "micro_severity",
}


def save_plan(plan: PathologyPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n")


def load_plan(path) -> PathologyPlan:
    return PathologyPlan.from_dict(json.loads(Path(path).read_text()))


def sample_plan(seed_or_rng, force: list[str] | None = None) -> PathologyPlan:
    """Draw a random pathology plan.

    Draw sequence (fixed): initial condition uniform over the four; each
    remaining condition is offered a fair coin in PATHOLOGY_ORDER, except
    that whichever of CH/PCH is already excluded by a selected sibling is
    skipped without consuming randomness; microcephaly force-adds VM; then
    severities uniform [0, 1) in order; finally the VM symmetry coin.

    force, when given, fixes the selected set (constraints still apply:
    CH+PCH rejected, VM added when microcephaly demands it); severities and
    symmetry are still drawn.
    """
    if isinstance(seed_or_rng, np.random.Generator):
        rng = seed_or_rng
        seed = int(rng.integers(0, 2**63))
    else:
        seed = int(seed_or_rng)
        rng = np.random.default_rng(seed)

    if force is not None:
        chosen = list(dict.fromkeys(force))
        unknown = [name for name in chosen if name not in PATHOLOGY_ORDER]
        if unknown:
            raise PlanError(f"unknown pathology names {unknown}")
        if not chosen:
            raise PlanError("forced pathology set is empty")
        selected = set(chosen)
        if CEREBELLAR_HYPOPLASIA in selected and PONTOCEREBELLAR_HYPOPLASIA in selected:
            raise PlanError("cannot force both hypoplasia variants")
        if MICROCEPHALY in selected:
            selected.add(VENTRICULOMEGALY)
        initial = next(name for name in PATHOLOGY_ORDER if name in selected)
    else:
        initial = PATHOLOGY_ORDER[int(rng.integers(0, len(PATHOLOGY_ORDER)))]
        selected = {initial}
        for name in PATHOLOGY_ORDER:
            if name in selected:
                continue
            if name == CEREBELLAR_HYPOPLASIA and PONTOCEREBELLAR_HYPOPLASIA in selected:
                continue
            if name == PONTOCEREBELLAR_HYPOPLASIA and CEREBELLAR_HYPOPLASIA in selected:
                continue
            if rng.random() < 0.5:
                selected.add(name)
        if MICROCEPHALY in selected:
            selected.add(VENTRICULOMEGALY)

    fields: dict = {"seed": seed, "initial": initial}
    for name in PATHOLOGY_ORDER:
        if name in selected:
            fields[_FLAG[name]] = True
            fields[_SEVERITY[name]] = float(rng.random())
    if VENTRICULOMEGALY in selected:
        fields["vm_symmetric"] = bool(rng.random() < 0.5)
    return PathologyPlan(**fields)


@dataclass
class SynthesisReport:
    """What apply_plan (or a single synthesis step) actually did."""

    applied: list[str]
    details: dict[str, dict]

    def to_dict(self) -> dict:
        return {"applied": list(self.applied), "details": self.details}


def _mode_label(values: np.ndarray) -> int:
    counts = np.bincount(values)
    return int(np.argmax(counts))  # smallest code wins ties


def _require_role(labels: LabelVolume, role: str) -> int:
    if not labels.has_role(role):
        raise VocabularyError(f"synthesis needs role {role!r} in the vocabulary")
    return labels.code_for(role)


# ---------------------------------------------------------------------------
# Ventriculomegaly
# ---------------------------------------------------------------------------


def _grow_ventricle(ventricle: np.ndarray, claimable: np.ndarray, budget_voxels: float):
    """Dilation ladder restricted to claimable WM; stops at budget or saturation.

    Returns (masks, k_max, saturated): masks[k] is the ventricle after k
    face-connected dilations, k_max the largest k whose mask stays within
    budget_voxels.
    """
    allowed = ventricle | claimable
    masks = [ventricle]
    saturated = False
    while True:
        grown = morphology.dilate(masks[-1], morphology.FACE, 1) & allowed
        if np.array_equal(grown, masks[-1]):
            saturated = True
            break
        masks.append(grown)
        if int(grown.sum()) > budget_voxels:
            break  # one past the budget; enough to know k_max
    k_max = 0
    for k in range(len(masks) - 1, -1, -1):
        if int(masks[k].sum()) <= budget_voxels:
            k_max = k
            break
    return masks, k_max, saturated


def synthesize_ventriculomegaly(
    labels: LabelVolume,
    severity: float,
    symmetric: bool = True,
    seed: int = 0,
    budget: float = VM_BUDGET,
    clearance: float = VM_CLEARANCE,
    smooth_iterations: int = 1,
    iterations_override: tuple[int, int] | None = None,
) -> tuple[LabelVolume, dict]:
    """Enlarge the lateral ventricles into hemisphere white matter.

    Needs a hemisphere-split volume (ventricles_left/right and
    white_matter_left/right). Per hemisphere, the ventricle is grown by
    face-connected dilation but may only claim WM voxels at least
    ``clearance`` voxels away from every other structure, and the grown
    ventricle may occupy at most ``budget`` of the hemisphere's
    pre-dilation WM volume. severity maps to the dilation count relative
    to the budget ceiling; symmetric applies one count to both sides,
    otherwise per-side counts are attenuated by independent draws from a
    stream derived from ``seed``. Zero iterations leave the volume
    untouched, bit for bit.
    """
    if not 0.0 <= severity <= 1.0:
        raise PlanError(f"severity must be in [0, 1], got {severity}")
    for role in (ROLE_VENTRICLES, ROLE_WHITE_MATTER):
        for suffix in (LEFT_SUFFIX, RIGHT_SUFFIX):
            _require_role(labels, role + suffix)

    ventricle_any = labels.mask_base(ROLE_VENTRICLES)
    wm_any = labels.mask_base(ROLE_WHITE_MATTER)
    others = labels.foreground() & ~ventricle_any & ~wm_any
    # distance from each voxel to the nearest non-WM, non-ventricle structure
    dist_to_others = morphology.distance_from(others)

    sides = {}
    for side, suffix in (("left", LEFT_SUFFIX), ("right", RIGHT_SUFFIX)):
        ventricle = labels.mask(ROLE_VENTRICLES + suffix)
        wm = labels.mask(ROLE_WHITE_MATTER + suffix)
        if not ventricle.any():
            raise SynthesisError(f"{side} ventricle is empty")
        budget_voxels = budget * float(wm.sum())
        claimable = wm & (dist_to_others >= clearance)
        masks, k_max, saturated = _grow_ventricle(ventricle, claimable, budget_voxels)
        sides[side] = {
            "ventricle": ventricle,
            "wm_volume": int(wm.sum()),
            "budget_voxels": budget_voxels,
            "claimable": claimable,
            "masks": masks,
            "k_max": k_max,
            "saturated": saturated,
        }

    if iterations_override is not None:
        req = {"left": int(iterations_override[0]), "right": int(iterations_override[1])}
        chosen = {s: min(req[s], sides[s]["k_max"]) for s in ("left", "right")}
    elif symmetric:
        k = round(severity * min(sides["left"]["k_max"], sides["right"]["k_max"]))
        chosen = {"left": k, "right": k}
    else:
        rng = np.random.default_rng(derive_seed(seed, "vm-asymmetry"))
        lo, hi = VM_ASYMMETRY_RANGE
        chosen = {}
        for side in ("left", "right"):
            attenuation = float(rng.uniform(lo, hi))
            chosen[side] = round(attenuation * severity * sides[side]["k_max"])

    voxels = labels.voxels.copy()
    report: dict = {"budget": budget, "clearance": clearance, "symmetric": bool(symmetric)}
    for side, suffix in (("left", LEFT_SUFFIX), ("right", RIGHT_SUFFIX)):
        info = sides[side]
        k = int(chosen[side])
        while True:
            if k == 0:
                final = info["ventricle"]  # exact identity, never smoothed
                break
            candidate = info["masks"][min(k, len(info["masks"]) - 1)]
            smoothed = morphology.smooth_mask(candidate, morphology.FACE, smooth_iterations)
            final = info["ventricle"] | (smoothed & (info["ventricle"] | info["claimable"]))
            if float(final.sum()) <= info["budget_voxels"]:
                break
            k -= 1  # smoothing pushed past budget; back off one step
        if k > 0 and float(final.sum()) > info["budget_voxels"]:
            raise SynthesisError(f"{side}: grown ventricle exceeds the WM budget")
        added = final & ~info["ventricle"]
        if added.any() and float(dist_to_others[added].min()) < clearance:
            raise SynthesisError(f"{side}: clearance constraint violated")
        code = labels.code_for(ROLE_VENTRICLES + suffix)
        voxels[final] = code
        report[side] = {
            "wm_volume": info["wm_volume"],
            "ventricle_before": int(info["ventricle"].sum()),
            "ventricle_after": int(final.sum()),
            "budget_voxels": info["budget_voxels"],
            "k_max": info["k_max"],
            "k": k,
            "saturated": info["saturated"],
            "added_voxels": int(added.sum()),
        }
    return labels.with_voxels(voxels), report


# ---------------------------------------------------------------------------
# Hypoplasia (cerebellar and pontocerebellar)
# ---------------------------------------------------------------------------


def _in_plane_radius(mask: np.ndarray) -> float:
    """Mean equivalent disc radius over the non-empty z slices."""
    areas = mask.sum(axis=(0, 1))
    areas = areas[areas > 0]
    if areas.size == 0:
        return 0.0
    return float(np.sqrt(areas.mean() / np.pi))


def _attachment_point(cerebellum: np.ndarray, brainstem: np.ndarray) -> np.ndarray:
    """Centroid of cerebellum voxels 26-adjacent to the brainstem."""
    touching = cerebellum & morphology.dilate(brainstem, morphology.FULL, 1)
    if touching.any():
        return morphology.centroid(touching)
    return morphology.centroid(cerebellum)


def _restore_adjacency(cerebellum: np.ndarray, brainstem: np.ndarray, limit: int = 10):
    """Grow the cerebellum face-wise until it touches the brainstem again."""
    grown = cerebellum
    repairs = 0
    while not (grown & morphology.dilate(brainstem, morphology.FULL, 1)).any():
        if repairs >= limit:
            raise SynthesisError("cerebellum detached from brainstem beyond repair")
        grown = morphology.dilate(grown, morphology.FACE, 1)
        repairs += 1
    return grown, repairs


def synthesize_hypoplasia(
    labels: LabelVolume,
    severity: float,
    variant: str = PONTOCEREBELLAR_HYPOPLASIA,
    max_shrink: float = HYPOPLASIA_MAX_SHRINK,
    reading: str = "linear",
) -> tuple[LabelVolume, dict]:
    """Shrink the posterior fossa structures.

    Pontocerebellar variant: brainstem and fourth ventricle shrink in-plane
    (x-y) about their joint centroid by factor f = 1 - max_shrink*severity;
    the cerebellum shrinks with them, gets an in-plane dilation restoring
    its roundness, then shrinks isotropically about its attachment point on
    the brainstem. Cerebellar variant: only the cerebellum shrinks
    (isotropically, about the attachment point); the brainstem stays
    bit-identical. Voxels vacated by the shrink take the label most common
    around the original region. reading="volumetric" reinterprets
    max_shrink as a volume fraction (per-axis factor becomes sqrt(f)).
    """
    if not 0.0 <= severity <= 1.0:
        raise PlanError(f"severity must be in [0, 1], got {severity}")
    if variant not in (CEREBELLAR_HYPOPLASIA, PONTOCEREBELLAR_HYPOPLASIA):
        raise PlanError(f"unknown hypoplasia variant {variant!r}")
    if reading not in ("linear", "volumetric"):
        raise PlanError(f"reading must be 'linear' or 'volumetric', got {reading!r}")

    f = 1.0 - max_shrink * severity
    if reading == "volumetric":
        f = float(np.sqrt(f))
    brainstem_code = _require_role(labels, ROLE_BRAINSTEM)
    cerebellum_code = _require_role(labels, ROLE_CEREBELLUM)
    ventricle_code = _require_role(labels, ROLE_VENTRICLES)

    report: dict = {"variant": variant, "factor": f, "reading": reading}
    if f >= 1.0:  # severity zero: exact identity
        report["identity"] = True
        return labels.copy(), report

    brainstem = labels.mask(ROLE_BRAINSTEM)
    cerebellum = labels.mask(ROLE_CEREBELLUM)
    if not brainstem.any() or not cerebellum.any():
        raise SynthesisError("hypoplasia needs non-empty brainstem and cerebellum")
    fourth = labelprep.extract_fourth_ventricle(labels).bits

    voxels = labels.voxels.copy()
    if variant == PONTOCEREBELLAR_HYPOPLASIA:
        group = brainstem | fourth | cerebellum
        center = morphology.centroid(group)
        in_plane = (f, f, 1.0)
        new_brainstem = morphology.scale_mask(brainstem, in_plane, center)
        new_fourth = morphology.scale_mask(fourth, in_plane, center)
        squeezed = morphology.scale_mask(cerebellum, in_plane, center)
        # the in-plane squeeze flattens the cerebellum; dilate it back round
        rounding = int(round((1.0 - f) * _in_plane_radius(squeezed)))
        if rounding > 0:
            squeezed = morphology.dilate(squeezed, morphology.IN_PLANE, rounding)
        attachment = _attachment_point(squeezed, new_brainstem)
        new_cerebellum = morphology.scale_mask(squeezed, (f, f, f), attachment)
        new_cerebellum, repairs = _restore_adjacency(new_cerebellum, new_brainstem)
        if not new_brainstem.any() or (fourth.any() and not new_fourth.any()):
            raise SynthesisError("shrink erased a posterior fossa structure")

        shell = morphology.dilate(group, morphology.FULL, 1) & ~group
        fill = _mode_label(labels.voxels[shell]) if shell.any() else labels.background_code
        voxels[group] = fill
        voxels[new_cerebellum & ~new_brainstem] = cerebellum_code
        voxels[new_fourth & ~new_brainstem] = ventricle_code
        voxels[new_brainstem] = brainstem_code
        report.update(
            {
                "fill_label": int(fill),
                "rounding_dilations": rounding,
                "adjacency_repairs": repairs,
                "brainstem_before": int(brainstem.sum()),
                "brainstem_after": int(new_brainstem.sum()),
                "cerebellum_before": int(cerebellum.sum()),
                "cerebellum_after": int((new_cerebellum & ~new_brainstem).sum()),
                "fourth_ventricle_before": int(fourth.sum()),
                "fourth_ventricle_after": int((new_fourth & ~new_brainstem).sum()),
            }
        )
    else:
        attachment = _attachment_point(cerebellum, brainstem)
        new_cerebellum = morphology.scale_mask(cerebellum, (f, f, f), attachment)
        new_cerebellum, repairs = _restore_adjacency(new_cerebellum, brainstem)
        vacated = cerebellum & ~new_cerebellum
        shell = morphology.dilate(cerebellum, morphology.FULL, 1) & ~cerebellum
        fill = _mode_label(labels.voxels[shell]) if shell.any() else labels.background_code
        voxels[vacated] = fill
        voxels[new_cerebellum & ~brainstem] = cerebellum_code
        report.update(
            {
                "fill_label": int(fill),
                "adjacency_repairs": repairs,
                "cerebellum_before": int(cerebellum.sum()),
                "cerebellum_after": int((new_cerebellum & ~brainstem).sum()),
            }
        )
    return labels.with_voxels(voxels), report


# ---------------------------------------------------------------------------
# Microcephaly
# ---------------------------------------------------------------------------


def synthesize_microcephaly(
    labels: LabelVolume,
    severity: float,
    max_shrink: float = MICRO_MAX_SHRINK,
) -> tuple[LabelVolume, dict]:
    """Uniformly shrink the whole brain toward its centroid.

    Every structure scales by f = 1 - max_shrink*severity per axis. The
    head outline is preserved exactly: the non-background union of the
    output equals the input's, with the vacated rim refilled as external
    fluid. Severity zero is an exact identity.
    """
    if not 0.0 <= severity <= 1.0:
        raise PlanError(f"severity must be in [0, 1], got {severity}")
    f = 1.0 - max_shrink * severity
    if labels.has_role(ROLE_EXTERNAL_CSF):
        csf_code = labels.code_for(ROLE_EXTERNAL_CSF)
    elif labels.has_role(ROLE_FLUID):
        csf_code = labels.code_for(ROLE_FLUID)
    else:
        raise VocabularyError("microcephaly needs an external fluid role to backfill")

    report: dict = {"factor": f}
    if f >= 1.0:
        report["identity"] = True
        return labels.copy(), report

    union = labels.foreground()
    if not union.any():
        raise SynthesisError("volume is entirely background")
    center = morphology.centroid(union)
    background = labels.background_code

    # one nearest-neighbour gather of the whole label field keeps the
    # structures a partition by construction
    shape = labels.geometry.dims
    axes_idx = []
    outside = np.zeros(shape, dtype=bool)
    for ax in range(3):
        q = np.arange(shape[ax], dtype=np.float64)
        src = center[ax] + (q - center[ax]) / f
        idx = np.ceil(src - 0.5).astype(np.int64)  # nearest, ties to lower index
        bad = (idx < 0) | (idx >= shape[ax])
        view = [np.newaxis] * 3
        view[ax] = slice(None)
        outside |= bad[tuple(view)]
        axes_idx.append(np.clip(idx, 0, shape[ax] - 1))
    gathered = labels.voxels[np.ix_(axes_idx[0], axes_idx[1], axes_idx[2])]
    gathered = np.where(outside, background, gathered)

    out = np.where(union, gathered, background)
    out = np.where(union & (out == background), csf_code, out).astype(labels.voxels.dtype)

    def tissue(voxels):
        return int(((voxels != background) & (voxels != csf_code)).sum())

    report.update(
        {
            "centroid": [float(c) for c in center],
            "union_volume": int(union.sum()),
            "tissue_before": tissue(labels.voxels),
            "tissue_after": tissue(out),
        }
    )
    return labels.with_voxels(out), report


# ---------------------------------------------------------------------------
# Plan application
# ---------------------------------------------------------------------------


def apply_plan(labels: LabelVolume, plan: PathologyPlan, **overrides) -> tuple[LabelVolume, SynthesisReport]:
    """Apply every selected condition of a plan to a multi-label volume.

    Application order is microcephaly, then hypoplasia, then
    ventriculomegaly: the global shrink first, regional surgery second,
    ventricle growth last so its budget sees the already-reshaped WM.
    Hemisphere splitting for VM happens here and is merged away before
    returning. Deterministic given (labels, plan). ``overrides`` tweak
    synthesis constants (budget, clearance, max_shrink...), mainly for
    configuration plumbing.
    """
    plan.validate()
    report = SynthesisReport(applied=[], details={})
    current = labels

    if plan.microcephaly:
        current, detail = synthesize_microcephaly(
            current,
            plan.micro_severity,
            max_shrink=overrides.get("micro_max_shrink", MICRO_MAX_SHRINK),
        )
        report.applied.append(MICROCEPHALY)
        report.details[MICROCEPHALY] = detail

    for variant in (CEREBELLAR_HYPOPLASIA, PONTOCEREBELLAR_HYPOPLASIA):
        if getattr(plan, _FLAG[variant]):
            current, detail = synthesize_hypoplasia(
                current,
                getattr(plan, _SEVERITY[variant]),
                variant=variant,
                max_shrink=overrides.get("hypoplasia_max_shrink", HYPOPLASIA_MAX_SHRINK),
                reading=overrides.get("hypoplasia_reading", "linear"),
            )
            report.applied.append(variant)
            report.details[variant] = detail

    if plan.ventriculomegaly:
        split_volume, split = labelprep.split_hemispheres(
            current, rotation_degrees=overrides.get("rotation_degrees", 0.0)
        )
        grown, detail = synthesize_ventriculomegaly(
            split_volume,
            plan.vm_severity,
            symmetric=plan.vm_symmetric,
            seed=plan.seed,
            budget=overrides.get("vm_budget", VM_BUDGET),
            clearance=overrides.get("vm_clearance", VM_CLEARANCE),
            iterations_override=plan.vm_iterations,
        )
        current = labelprep.merge_hemispheres(grown, split)
        report.applied.append(VENTRICULOMEGALY)
        report.details[VENTRICULOMEGALY] = detail

    return current, report
