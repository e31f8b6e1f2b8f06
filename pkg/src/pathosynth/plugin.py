"""Framed stdio protocol for out-of-process denoiser plugins.

Wire format, little-endian throughout. Every frame is a 16-byte header:

    magic   4 bytes  b"FNDP"
    version u32      1
    kind    u32
    length  u32      payload byte count

followed by ``length`` payload bytes. Frame kinds:

    HANDSHAKE      host -> plugin. JSON: dims, channels (5), timesteps,
                   beta_start, beta_end. Sent once, first. No reply.
    STEP_REQUEST   host -> plugin. u32 t, then the noisy image voxels as
                   float32, then the four condition channels, each C-order.
    STEP_RESPONSE  plugin -> host. Predicted noise voxels, float32.
    SHUTDOWN       host -> plugin. Empty payload; plugin exits cleanly.
    ERROR          plugin -> host. UTF-8 message; the plugin then exits
                   nonzero.

One request is in flight at a time.
"""
from __future__ import annotations

import json
import struct
import subprocess

import numpy as np

from .errors import PluginError
from .diffusion import CHANNELS, N_CLASSES, NoiseSchedule

MAGIC = b"FNDP"
VERSION = 1

HANDSHAKE = 1
STEP_REQUEST = 2
STEP_RESPONSE = 3
SHUTDOWN = 4
ERROR = 5

_KINDS = (HANDSHAKE, STEP_REQUEST, STEP_RESPONSE, SHUTDOWN, ERROR)
_HEADER = struct.Struct("<4sIII")
HEADER_SIZE = _HEADER.size
MAX_PAYLOAD = 1 << 30


def write_frame(stream, kind: int, payload: bytes = b"") -> None:
    if kind not in _KINDS:
        raise PluginError(f"unknown frame kind {kind}")
    if len(payload) > MAX_PAYLOAD:
        raise PluginError("payload too large")
    stream.write(_HEADER.pack(MAGIC, VERSION, kind, len(payload)))
    if payload:
        stream.write(payload)
    stream.flush()


def _read_exact(stream, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise PluginError(f"stream closed mid-frame ({n - remaining} of {n} bytes)")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream) -> tuple[int, bytes]:
    """Read one frame; raises PluginError on malformed or truncated input."""
    header = stream.read(HEADER_SIZE)
    if not header:
        raise PluginError("stream closed")
    if len(header) < HEADER_SIZE:
        header += _read_exact(stream, HEADER_SIZE - len(header))
    magic, version, kind, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise PluginError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise PluginError(f"unsupported protocol version {version}")
    if kind not in _KINDS:
        raise PluginError(f"unknown frame kind {kind}")
    if length > MAX_PAYLOAD:
        raise PluginError(f"frame payload too large ({length} bytes)")
    payload = _read_exact(stream, length) if length else b""
    return kind, payload


def encode_handshake(dims, timesteps: int, beta_start: float, beta_end: float) -> bytes:
    payload = {
        "dims": [int(d) for d in dims],
        "channels": CHANNELS,
        "timesteps": int(timesteps),
        "beta_start": float(beta_start),
        "beta_end": float(beta_end),
    }
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def decode_handshake(payload: bytes) -> dict:
    try:
        data = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PluginError(f"handshake payload is not valid JSON: {exc}") from exc
    for key in ("dims", "channels", "timesteps", "beta_start", "beta_end"):
        if key not in data:
            raise PluginError(f"handshake missing {key!r}")
    dims = tuple(int(d) for d in data["dims"])
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise PluginError(f"handshake dims invalid: {data['dims']!r}")
    if int(data["channels"]) != CHANNELS:
        raise PluginError(f"handshake channels must be {CHANNELS}")
    if int(data["timesteps"]) < 1:
        raise PluginError("handshake timesteps must be >= 1")
    return data


def encode_step_request(t: int, image: np.ndarray, condition: np.ndarray) -> bytes:
    image = np.ascontiguousarray(image, dtype="<f4")
    condition = np.ascontiguousarray(condition, dtype="<f4")
    return struct.pack("<I", int(t)) + image.tobytes() + condition.tobytes()


def decode_step_request(payload: bytes, dims) -> tuple[int, np.ndarray, np.ndarray]:
    voxels = int(np.prod(dims))
    expected = 4 + CHANNELS * voxels * 4
    if len(payload) != expected:
        raise PluginError(f"step request is {len(payload)} bytes, expected {expected}")
    (t,) = struct.unpack_from("<I", payload, 0)
    flat = np.frombuffer(payload, dtype="<f4", count=CHANNELS * voxels, offset=4)
    image = flat[:voxels].reshape(dims).copy()
    condition = flat[voxels:].reshape((N_CLASSES,) + tuple(dims)).copy()
    return int(t), image, condition


class PluginDenoiser:
    """Denoiser backed by a plugin subprocess speaking the framed protocol.

    Satisfies the in-process denoiser contract, so ddpm_sample cannot tell
    the difference. Use as a context manager or call close() to send the
    shutdown frame and reap the child.
    """

    def __init__(self, command: list[str], dims, schedule: NoiseSchedule):
        self.dims = tuple(int(d) for d in dims)
        self.schedule = schedule
        self._voxels = int(np.prod(self.dims))
        self._process = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        try:
            write_frame(
                self._process.stdin,
                HANDSHAKE,
                encode_handshake(
                    self.dims,
                    schedule.timesteps,
                    float(schedule.beta[0]),
                    float(schedule.beta[-1]),
                ),
            )
        except (OSError, PluginError) as exc:
            self._reap(kill=True)
            raise PluginError(f"plugin handshake failed: {exc}") from exc

    def __call__(self, x_t: np.ndarray, condition: np.ndarray, t: int) -> np.ndarray:
        if self._process.poll() is not None:
            raise PluginError(f"plugin exited early with code {self._process.returncode}")
        if x_t.shape != self.dims:
            raise PluginError(f"x_t shape {x_t.shape} does not match handshake dims {self.dims}")
        try:
            write_frame(
                self._process.stdin, STEP_REQUEST, encode_step_request(t, x_t, condition)
            )
            kind, payload = read_frame(self._process.stdout)
        except (OSError, BrokenPipeError) as exc:
            self._reap(kill=True)
            raise PluginError(f"plugin communication failed: {exc}") from exc
        if kind == ERROR:
            message = payload.decode("utf-8", errors="replace")
            self._reap(kill=True)
            raise PluginError(f"plugin reported an error: {message}")
        if kind != STEP_RESPONSE:
            self._reap(kill=True)
            raise PluginError(f"expected a step response, got frame kind {kind}")
        if len(payload) != self._voxels * 4:
            self._reap(kill=True)
            raise PluginError(
                f"step response is {len(payload)} bytes, expected {self._voxels * 4}"
            )
        return np.frombuffer(payload, dtype="<f4").reshape(self.dims).copy()

    def close(self, timeout: float = 10.0) -> int:
        """Send SHUTDOWN and wait; returns the plugin's exit code."""
        if self._process.poll() is None:
            try:
                write_frame(self._process.stdin, SHUTDOWN)
                self._process.stdin.close()
            except (OSError, BrokenPipeError):
                pass
            try:
                self._process.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                self._reap(kill=True)
        self._reap()
        return int(self._process.returncode)

    def _reap(self, kill: bool = False) -> None:
        if self._process.poll() is None:
            if kill:
                self._process.kill()
            self._process.wait()
        for stream in (self._process.stdin, self._process.stdout):
            if stream and not stream.closed:
                stream.close()

    def __enter__(self) -> "PluginDenoiser":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
