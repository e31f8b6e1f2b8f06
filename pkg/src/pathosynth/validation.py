"""Input validation helpers shared by the estimator layer and the CLI."""
from __future__ import annotations

from .errors import VolumeError
from .volume import IntensityVolume, LabelVolume


def check_label_volume(value, name: str = "X") -> LabelVolume:
    if not isinstance(value, LabelVolume):
        raise TypeError(f"{name} must be a LabelVolume, got {type(value).__name__}")
    return value


def check_intensity_volume(value, name: str = "X") -> IntensityVolume:
    if not isinstance(value, IntensityVolume):
        raise TypeError(f"{name} must be an IntensityVolume, got {type(value).__name__}")
    return value


def check_same_grid(a, b) -> None:
    if a.geometry != b.geometry:
        raise VolumeError("volumes must share geometry")


def check_unit_interval(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")
    return value


def check_positive_int(value, name: str) -> int:
    ivalue = int(value)
    if ivalue < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return ivalue


def check_volume_list(X, name: str = "X") -> list:
    """Accepts a sequence of LabelVolume or (LabelVolume, IntensityVolume)."""
    if isinstance(X, (LabelVolume, IntensityVolume)):
        raise TypeError(f"{name} must be a sequence of volumes, not a single volume")
    items = list(X)
    if not items:
        raise ValueError(f"{name} is empty")
    for i, item in enumerate(items):
        if isinstance(item, tuple):
            if len(item) != 2:
                raise TypeError(f"{name}[{i}]: pairs must be (labels, image)")
            check_label_volume(item[0], f"{name}[{i}][0]")
            check_intensity_volume(item[1], f"{name}[{i}][1]")
            check_same_grid(item[0], item[1])
        else:
            check_label_volume(item, f"{name}[{i}]")
    return items
