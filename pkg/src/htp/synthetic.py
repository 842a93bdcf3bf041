"""Seeded synthetic pose sequences and their pinhole projections.

Replaces dataset ingestion: coordinates are millimeters, the subject stands
a few meters in front of the camera, and every kind is a pure function of
(joints, frames, seed).
"""

from __future__ import annotations

import numpy as np

from .core import RngStream
from .diffusion import CameraModel

MOTION_KINDS = ("static", "walk_cycle", "random_smooth")

_BODY_CENTER = np.array([0.0, 0.0, 4500.0])  # mm in front of the camera
_BODY_SPREAD = np.array([400.0, 700.0, 300.0])
_GAIT_PERIOD = 60  # frames, ~1.2 s at 50 Hz


def generate_pose_sequence(joints: int, frames: int, seed: int, kind: str) -> np.ndarray:
    """Smooth (J, F, 3) trajectory in mm, deterministic per seed."""
    if kind not in MOTION_KINDS:
        raise ValueError(f"unknown motion kind {kind!r}, expected one of {MOTION_KINDS}")
    rng = RngStream(seed)
    base = _BODY_CENTER + rng.uniform(-1.0, 1.0, (joints, 3)) * _BODY_SPREAD
    t = np.arange(frames)

    if kind == "static":
        return np.repeat(base[:, None, :], frames, axis=1)

    if kind == "walk_cycle":
        amp = rng.uniform(20.0, 120.0, (joints, 3))
        phase = rng.uniform(0.0, 2.0 * np.pi, (joints, 3))
        swing = amp[:, None, :] * np.sin(2.0 * np.pi * t[None, :, None] / _GAIT_PERIOD + phase[:, None, :])
        drift = np.zeros((frames, 3))
        drift[:, 0] = 2.0 * t  # steady lateral progress
        return base[:, None, :] + swing + drift[None, :, :]

    # random_smooth: a few band-limited sinusoids per joint and axis
    pose = np.repeat(base[:, None, :], frames, axis=1)
    for _ in range(3):
        amp = rng.uniform(10.0, 100.0, (joints, 3))
        cycles = rng.uniform(0.5, 3.0, (joints, 3))
        phase = rng.uniform(0.0, 2.0 * np.pi, (joints, 3))
        pose += amp[:, None, :] * np.sin(
            2.0 * np.pi * cycles[:, None, :] * t[None, :, None] / frames + phase[:, None, :]
        )
    return pose


def project_to_2d(
    pose_3d: np.ndarray, camera: CameraModel, noise_scale: float = 0.0, rng: RngStream | None = None
) -> np.ndarray:
    """Pinhole projection of (J, F, 3) points, with optional seeded pixel noise."""
    pose_3d = np.asarray(pose_3d, dtype=np.float64)
    if np.any(pose_3d[..., 2] <= 0):
        raise ValueError("project_to_2d: all points must have positive depth")
    projected = camera.project(pose_3d)
    if noise_scale > 0.0:
        if rng is None:
            raise ValueError("project_to_2d: noise requires an RngStream")
        projected = projected + noise_scale * rng.normal(projected.shape)
    return projected


def generate_synthetic(
    joints: int,
    frames: int,
    seed: int,
    kind: str,
    camera: CameraModel,
    noise_2d: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth 3-D sequence plus its (optionally noisy) 2-D projection."""
    pose_3d = generate_pose_sequence(joints, frames, seed, kind)
    noise_rng = RngStream(seed).child(1) if noise_2d > 0.0 else None
    pose_2d = project_to_2d(pose_3d, camera, noise_2d, noise_rng)
    return pose_3d, pose_2d
