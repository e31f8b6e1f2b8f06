"""Denoising diffusion: noise schedule, forward process, ancestral sampling.

Numeric contract: the sampler keeps its state in float32; every update is
computed in float64 on the promoted state and cast back to float32. The
schedule itself is float64 built from the explicit interpolation formula
(not a linspace), so an external denoiser implementation can reproduce
every coefficient bit for bit from (timesteps, beta_start, beta_end).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ScheduleError, VolumeError
from .volume import IntensityVolume, LabelVolume, VolumeGeometry

N_CLASSES = 4  # conditioning channels: one per label class
CHANNELS = 1 + N_CLASSES  # noisy image + condition

DEFAULT_TIMESTEPS = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02

# Published training recipe for the conditioned denoiser; documented here
# because the sampler's contract (L1 objective, EMA weights) depends on it.
TRAINING_DEFAULTS = {
    "epochs": 500_000,
    "learning_rate": 1e-5,
    "learning_rate_late": 1e-6,
    "learning_rate_switch_epoch": 100_000,
    "optimizer": "adam",
    "loss": "l1",
    "ema_decay": 0.995,
}


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule: beta, alpha = 1-beta, alpha_bar = cumprod(alpha)."""

    timesteps: int
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.timesteps < 1:
            raise ScheduleError("timesteps must be >= 1")
        for name in ("beta", "alpha", "alpha_bar"):
            arr = getattr(self, name)
            if arr.shape != (self.timesteps,) or arr.dtype != np.float64:
                raise ScheduleError(f"{name} must be float64 of shape ({self.timesteps},)")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ScheduleError("beta values must lie in (0, 1)")
        if np.any(self.alpha_bar <= 0) or np.any(self.alpha_bar > 1):
            raise ScheduleError("alpha_bar values must lie in (0, 1]")


def make_linear_schedule(
    timesteps: int = DEFAULT_TIMESTEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linearly interpolated beta in [beta_start, beta_end] over timesteps.

    beta[i] = beta_start + (beta_end - beta_start) * (i / (timesteps - 1)),
    evaluated in float64 exactly in that form. A single timestep uses
    beta_start alone.
    """
    timesteps = int(timesteps)
    if timesteps < 1:
        raise ScheduleError("timesteps must be >= 1")
    beta_start = float(beta_start)
    beta_end = float(beta_end)
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    if timesteps == 1:
        beta = np.array([beta_start], dtype=np.float64)
    else:
        i = np.arange(timesteps, dtype=np.float64)
        beta = beta_start + (beta_end - beta_start) * (i / (timesteps - 1))
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(timesteps=timesteps, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _as_array(x) -> tuple[np.ndarray, VolumeGeometry | None]:
    if isinstance(x, IntensityVolume):
        return x.voxels, x.geometry
    return np.asarray(x), None


def forward_diffuse(x0, t: int, eps, schedule: NoiseSchedule):
    """Noise a clean volume to step t (1-indexed): sqrt(ab_t)*x0 + sqrt(1-ab_t)*eps."""
    if not 1 <= int(t) <= schedule.timesteps:
        raise ScheduleError(f"t must be in [1, {schedule.timesteps}], got {t}")
    x0_arr, geometry = _as_array(x0)
    eps_arr, _ = _as_array(eps)
    if x0_arr.shape != eps_arr.shape:
        raise VolumeError("x0 and eps must share a shape")
    ab = float(schedule.alpha_bar[int(t) - 1])
    noisy = math.sqrt(ab) * x0_arr.astype(np.float64) + math.sqrt(1.0 - ab) * eps_arr.astype(
        np.float64
    )
    if geometry is not None:
        return IntensityVolume(geometry, noisy)
    return noisy


def one_hot_condition(labels: LabelVolume) -> np.ndarray:
    """Indicator channels (4, x, y, z) float32 for a 4-class label volume."""
    codes = np.unique(labels.voxels)
    if codes.min(initial=0) < 0 or codes.max(initial=0) >= N_CLASSES:
        raise VolumeError(f"conditioning expects classes 0..{N_CLASSES - 1}, found {codes.tolist()}")
    out = np.zeros((N_CLASSES,) + labels.geometry.dims, dtype=np.float32)
    for c in range(N_CLASSES):
        out[c] = labels.voxels == c
    return out


@dataclass
class ConditionedInput:
    """A noisy image with its condition channels, ready to stack for a model."""

    image: np.ndarray  # (x, y, z) float32
    condition: np.ndarray  # (4, x, y, z) float32

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float32)
        self.condition = np.asarray(self.condition, dtype=np.float32)
        if self.condition.shape != (N_CLASSES,) + self.image.shape:
            raise VolumeError(
                f"condition shape {self.condition.shape} does not match image {self.image.shape}"
            )
        sums = self.condition.sum(axis=0)
        if not np.allclose(sums, 1.0):
            raise VolumeError("condition channels must sum to one at every voxel")

    def as_channels(self) -> np.ndarray:
        """(5, x, y, z): image first, then the four class indicators."""
        return np.concatenate([self.image[np.newaxis], self.condition], axis=0)


@runtime_checkable
class DenoiserContract(Protocol):
    """Predicts the noise in x_t given the condition channels and the step."""

    def __call__(self, x_t: np.ndarray, condition: np.ndarray, t: int) -> np.ndarray: ...


class ZeroDenoiser:
    """Predicts no noise; useful as a trivial built-in and for wiring tests."""

    def __call__(self, x_t: np.ndarray, condition: np.ndarray, t: int) -> np.ndarray:
        return np.zeros_like(x_t, dtype=np.float32)


class OracleEpsilonDenoiser:
    """Analytically exact denoiser for a known clean target volume.

    Inverts the forward process: eps = (x_t - sqrt(ab_t)*x0) / sqrt(1-ab_t),
    computed in float64 and returned as float32. Sampling with this oracle
    and zero variance reconstructs the target up to float rounding.
    """

    def __init__(self, target: np.ndarray, schedule: NoiseSchedule):
        self.target = np.asarray(target, dtype=np.float32)
        self.schedule = schedule

    def __call__(self, x_t: np.ndarray, condition: np.ndarray, t: int) -> np.ndarray:
        if x_t.shape != self.target.shape:
            raise VolumeError("x_t does not match the oracle target shape")
        ab = float(self.schedule.alpha_bar[int(t) - 1])
        c0 = math.sqrt(ab)
        c1 = math.sqrt(1.0 - ab)
        eps = (x_t.astype(np.float64) - c0 * self.target.astype(np.float64)) / c1
        return eps.astype(np.float32)


def ddpm_sample(
    denoiser: DenoiserContract,
    condition: np.ndarray,
    schedule: NoiseSchedule,
    rng_or_seed=0,
    variance_mode: str = "stochastic",
    geometry: VolumeGeometry | None = None,
    initial_noise: np.ndarray | None = None,
) -> IntensityVolume:
    """Ancestral sampling from pure noise, conditioned on label channels.

    x_{t-1} = (x_t - (beta_t / sqrt(1-ab_t)) * eps_hat) / sqrt(alpha_t)
              [+ sqrt(beta_t) * z when t > 1 and variance_mode="stochastic"].

    variance_mode "zero" drops the noise term entirely (deterministic given
    the start noise). The state is float32; each step runs in float64 and
    casts back, so equal inputs give bit-equal outputs regardless of where
    the denoiser runs. initial_noise, when given, replaces the x_T draw and
    must be float32.
    """
    if variance_mode not in ("stochastic", "zero"):
        raise ScheduleError(f"variance_mode must be 'stochastic' or 'zero', got {variance_mode!r}")
    condition = np.asarray(condition)
    if condition.ndim != 4 or condition.shape[0] != N_CLASSES:
        raise VolumeError(f"condition must have shape (4, x, y, z), got {condition.shape}")
    if condition.dtype != np.float32:
        condition = condition.astype(np.float32)
    dims = condition.shape[1:]
    if geometry is None:
        geometry = VolumeGeometry(dims)
    elif geometry.dims != dims:
        raise VolumeError(f"geometry dims {geometry.dims} do not match condition {dims}")

    rng = (
        rng_or_seed
        if isinstance(rng_or_seed, np.random.Generator)
        else np.random.default_rng(rng_or_seed)
    )
    if initial_noise is not None:
        x = np.asarray(initial_noise)
        if x.shape != dims or x.dtype != np.float32:
            raise VolumeError("initial_noise must be float32 with the condition's spatial shape")
        x = x.copy()
    else:
        x = rng.standard_normal(dims, dtype=np.float32)

    for t in range(schedule.timesteps, 0, -1):
        eps_hat = np.asarray(denoiser(x, condition, t))
        if eps_hat.shape != dims:
            raise VolumeError(f"denoiser returned shape {eps_hat.shape}, expected {dims}")
        if eps_hat.dtype != np.float32:
            raise VolumeError(f"denoiser must return float32, got {eps_hat.dtype}")
        idx = t - 1
        beta_t = float(schedule.beta[idx])
        coef_eps = beta_t / math.sqrt(1.0 - float(schedule.alpha_bar[idx]))
        coef_x = 1.0 / math.sqrt(float(schedule.alpha[idx]))
        mean = coef_x * (x.astype(np.float64) - coef_eps * eps_hat.astype(np.float64))
        if t > 1 and variance_mode == "stochastic":
            z = rng.standard_normal(dims)
            mean = mean + math.sqrt(beta_t) * z
        x = mean.astype(np.float32)
        if not np.all(np.isfinite(x)):
            raise VolumeError(f"sampling diverged at t={t}")
    return IntensityVolume(geometry, x)


def l1_loss(prediction, target) -> float:
    """Mean absolute error in float64."""
    pred, _ = _as_array(prediction)
    tgt, _ = _as_array(target)
    if pred.shape != tgt.shape:
        raise VolumeError("prediction and target must share a shape")
    return float(np.mean(np.abs(pred.astype(np.float64) - tgt.astype(np.float64))))


def ema_update(average, current, decay: float = 0.995):
    """Exponential moving average: decay*average + (1-decay)*current.

    Accepts a single array or an arbitrarily nested dict/list/tuple of
    arrays; returns the same structure, float64 values.
    """
    if not 0.0 <= decay < 1.0:
        raise ScheduleError(f"decay must be in [0, 1), got {decay}")
    if isinstance(average, dict):
        if not isinstance(current, dict) or average.keys() != current.keys():
            raise VolumeError("EMA structures do not match")
        return {k: ema_update(average[k], current[k], decay) for k in average}
    if isinstance(average, (list, tuple)):
        if not isinstance(current, (list, tuple)) or len(average) != len(current):
            raise VolumeError("EMA structures do not match")
        pairs = [ema_update(a, c, decay) for a, c in zip(average, current)]
        return type(average)(pairs)
    a = np.asarray(average, dtype=np.float64)
    c = np.asarray(current, dtype=np.float64)
    if a.shape != c.shape:
        raise VolumeError("EMA arrays must share a shape")
    return decay * a + (1.0 - decay) * c
