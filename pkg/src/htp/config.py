"""Run configuration: JSON loading, strict validation, CLI overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .denoiser import DenoiserConfig
from .diffusion import SCHEDULE_KINDS, CameraModel


class ConfigError(ValueError):
    """Invalid or unknown configuration content; message names the field."""


_CAMERA_KEYS = ("fx", "fy", "cx", "cy")

DEFAULT_CAMERA = {"fx": 1145.0, "fy": 1145.0, "cx": 512.0, "cy": 512.0}


@dataclass
class RunConfig:
    # architecture
    joints: int = 17
    frames: int = 243
    embed_dim: int = 512
    keep_frames: int = 54
    corr_topk: int = 162
    blocks: int = 8
    sparse_blocks: int = 3
    heads: int = 8
    mlp_ratio: float = 6.0
    pool_threshold: float = 0.5
    knn_k: int = 5
    temporal_graph: str = "chain"
    recompute_mask_per_block: bool = False
    # sampling
    hypotheses: int = 20
    iterations: int = 10
    timesteps: int = 1000
    ddim_eta: float = 1.0
    schedule: str = "linear"
    seed: int = 0
    # profiling
    inference_sparse_blocks: int = 2
    # camera and paths
    camera: dict = field(default_factory=lambda: dict(DEFAULT_CAMERA))
    joint_adjacency: list | None = None  # optional J x J override of the default skeleton
    input_2d: str | None = None
    input_gt: str | None = None
    output_3d: str | None = None

    def validate(self) -> None:
        problems = []
        try:
            self.denoiser_config()
        except ValueError as exc:
            problems.append(str(exc))
        if self.hypotheses < 1:
            problems.append(f"hypotheses: must be >= 1 (got {self.hypotheses})")
        if self.iterations < 1:
            problems.append(f"iterations: must be >= 1 (got {self.iterations})")
        if self.timesteps < 1:
            problems.append(f"timesteps: must be >= 1 (got {self.timesteps})")
        if not 0.0 <= self.ddim_eta <= 1.0:
            problems.append(f"ddim_eta: must be in [0, 1] (got {self.ddim_eta})")
        if self.schedule not in SCHEDULE_KINDS:
            problems.append(f"schedule: must be one of {SCHEDULE_KINDS} (got {self.schedule!r})")
        if not 0 <= self.inference_sparse_blocks <= self.blocks:
            problems.append(
                f"inference_sparse_blocks: must be in [0, blocks={self.blocks}] "
                f"(got {self.inference_sparse_blocks})"
            )
        unknown_cam = sorted(set(self.camera) - set(_CAMERA_KEYS))
        missing_cam = sorted(set(_CAMERA_KEYS) - set(self.camera))
        if unknown_cam or missing_cam:
            problems.append(f"camera: unknown keys {unknown_cam}, missing keys {missing_cam}")
        else:
            try:
                self.camera_model()
            except ValueError as exc:
                problems.append(f"camera: {exc}")
        if problems:
            raise ConfigError("; ".join(problems))

    def denoiser_config(self) -> DenoiserConfig:
        adjacency = None
        if self.joint_adjacency is not None:
            adjacency = np.asarray(self.joint_adjacency, dtype=np.float64)
            if adjacency.ndim != 2 or not np.array_equal(adjacency, adjacency.T):
                raise ValueError(f"joint_adjacency: must be a symmetric square matrix (got shape {adjacency.shape})")
        return DenoiserConfig(
            joints=self.joints,
            frames=self.frames,
            embed_dim=self.embed_dim,
            keep_frames=self.keep_frames,
            corr_topk=self.corr_topk,
            blocks=self.blocks,
            sparse_blocks=self.sparse_blocks,
            heads=self.heads,
            mlp_ratio=self.mlp_ratio,
            pool_threshold=self.pool_threshold,
            knn_k=self.knn_k,
            temporal_graph=self.temporal_graph,
            recompute_mask_per_block=self.recompute_mask_per_block,
            joint_adjacency=adjacency,
        )

    def camera_model(self) -> CameraModel:
        return CameraModel(**{k: float(self.camera[k]) for k in _CAMERA_KEYS})


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus overrides (flags win).

    Unknown keys are rejected; every violated constraint is reported with its
    field name.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    cfg = RunConfig(**data)
    cfg.validate()
    return cfg
