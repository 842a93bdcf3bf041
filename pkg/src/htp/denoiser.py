"""Full denoising network: embedding, spatial mixing, sparse temporal stack,
frame pruning, condensed refinement, and length-restoring cross attention.

The forward pass is a pure function of (inputs, config, params). A dense
reference path with full masks and no pruning backs the degenerate
equivalence checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import io as htp_io
from .attention import (
    AttnWeights,
    CrossWeights,
    MlpWeights,
    attention_block,
    cross_mhsa,
    to_additive_mask,
)
from .core import RngStream, ShapeError, gelu, linear
from .mgptp import prune_frames
from .tcep import (
    TcepParams,
    TemporalAdjacency,
    chain_adjacency,
    frame_similarity,
    select_topk_mask,
    tcep_refine,
)

# Human3.6M 17-joint skeleton (hip root, legs, spine/head, arms).
H36M_EDGES = (
    (0, 1), (1, 2), (2, 3),
    (0, 4), (4, 5), (5, 6),
    (0, 7), (7, 8), (8, 9), (9, 10),
    (8, 11), (11, 12), (12, 13),
    (8, 14), (14, 15), (15, 16),
)

TEMPORAL_GRAPHS = ("chain", "full")

INPUT_WIDTH = 5  # 3-D pose concatenated with the 2-D keypoints
OUTPUT_WIDTH = 3


class StageError(RuntimeError):
    """A pipeline stage failed; the message carries the stage name."""


def skeleton_adjacency(joints: int) -> np.ndarray:
    """Default joint graph with self-loops: Human3.6M skeleton for 17 joints,
    a joint chain otherwise."""
    adj = np.eye(joints)
    if joints == 17:
        for a, b in H36M_EDGES:
            adj[a, b] = adj[b, a] = 1.0
    else:
        idx = np.arange(joints - 1)
        adj[idx, idx + 1] = 1.0
        adj[idx + 1, idx] = 1.0
    return adj


def normalize_adjacency(adj: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization D^-1/2 A D^-1/2; requires symmetry."""
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ShapeError(f"normalize_adjacency: expected square matrix, got {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise ValueError("normalize_adjacency: adjacency must be symmetric")
    deg = adj.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("normalize_adjacency: every node needs at least one edge (self-loops)")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return adj * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass(frozen=True)
class DenoiserConfig:
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
    joint_adjacency: np.ndarray | None = None

    def __post_init__(self):
        problems = []
        if self.joints < 1:
            problems.append(f"joints: must be >= 1 (got {self.joints})")
        if self.frames < 1:
            problems.append(f"frames: must be >= 1 (got {self.frames})")
        if not 1 <= self.keep_frames <= self.frames:
            problems.append(f"keep_frames: must be in [1, frames={self.frames}] (got {self.keep_frames})")
        if self.corr_topk < 1:
            problems.append(f"corr_topk: must be >= 1 (got {self.corr_topk})")
        if not 0 <= self.sparse_blocks <= self.blocks:
            problems.append(f"sparse_blocks: must be in [0, blocks={self.blocks}] (got {self.sparse_blocks})")
        if self.embed_dim < 1 or self.embed_dim % self.heads != 0:
            problems.append(f"embed_dim: must be a positive multiple of heads={self.heads} (got {self.embed_dim})")
        if self.mlp_hidden < 1:
            problems.append(f"mlp_ratio: hidden width must be >= 1 (got ratio {self.mlp_ratio})")
        if not 0.0 < self.pool_threshold <= 1.0:
            problems.append(f"pool_threshold: must be in (0, 1] (got {self.pool_threshold})")
        if self.frames > 1 and not 1 <= self.knn_k <= self.frames - 1:
            problems.append(f"knn_k: must be in [1, frames-1={self.frames - 1}] (got {self.knn_k})")
        if self.temporal_graph not in TEMPORAL_GRAPHS:
            problems.append(f"temporal_graph: must be one of {TEMPORAL_GRAPHS} (got {self.temporal_graph!r})")
        if self.joint_adjacency is not None and self.joint_adjacency.shape != (self.joints, self.joints):
            problems.append(
                f"joint_adjacency: must be ({self.joints}, {self.joints}) (got {self.joint_adjacency.shape})"
            )
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def mlp_hidden(self) -> int:
        return int(round(self.embed_dim * self.mlp_ratio))

    def joint_graph(self) -> np.ndarray:
        if self.joint_adjacency is not None:
            return self.joint_adjacency
        return skeleton_adjacency(self.joints)

    def temporal_base(self) -> np.ndarray:
        if self.temporal_graph == "full":
            return np.ones((self.frames, self.frames))
        return chain_adjacency(self.frames)


@dataclass
class BlockParams:
    spatial_attn: AttnWeights
    spatial_mlp: MlpWeights
    temporal_attn: AttnWeights
    temporal_mlp: MlpWeights


@dataclass
class DenoiserParams:
    embed_w: np.ndarray
    embed_b: np.ndarray
    gcn_w: np.ndarray
    spatial_pos: np.ndarray
    temporal_pos: np.ndarray
    entry_attn: AttnWeights
    entry_mlp: MlpWeights
    tcep_w: np.ndarray
    adj_learned: np.ndarray
    time_w1: np.ndarray
    time_b1: np.ndarray
    time_w2: np.ndarray
    time_b2: np.ndarray
    blocks: list[BlockParams]
    cross: CrossWeights
    head_w: np.ndarray
    head_b: np.ndarray


def _uniform(rng: RngStream, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


def _init_attn(rng: RngStream, dim: int, heads: int) -> AttnWeights:
    return AttnWeights(
        wq=_uniform(rng, (dim, dim), dim),
        wk=_uniform(rng, (dim, dim), dim),
        wv=_uniform(rng, (dim, dim), dim),
        wo=_uniform(rng, (dim, dim), dim),
        heads=heads,
        ln_scale=np.ones(dim),
        ln_shift=np.zeros(dim),
    )


def _init_mlp(rng: RngStream, dim: int, hidden: int) -> MlpWeights:
    return MlpWeights(
        w1=_uniform(rng, (dim, hidden), dim),
        b1=np.zeros(hidden),
        w2=_uniform(rng, (hidden, dim), hidden),
        b2=np.zeros(dim),
        ln_scale=np.ones(dim),
        ln_shift=np.zeros(dim),
    )


def init_params(cfg: DenoiserConfig, seed: int) -> DenoiserParams:
    """Seeded parameter set: uniform(+-1/sqrt(fan_in)) weights, zero biases,
    zero learned temporal overlay."""
    rng = RngStream(seed)
    dim, hidden = cfg.embed_dim, cfg.mlp_hidden
    blocks = []
    for _ in range(cfg.blocks):
        blocks.append(
            BlockParams(
                spatial_attn=_init_attn(rng, dim, cfg.heads),
                spatial_mlp=_init_mlp(rng, dim, hidden),
                temporal_attn=_init_attn(rng, dim, cfg.heads),
                temporal_mlp=_init_mlp(rng, dim, hidden),
            )
        )
    return DenoiserParams(
        embed_w=_uniform(rng, (INPUT_WIDTH, dim), INPUT_WIDTH),
        embed_b=np.zeros(dim),
        gcn_w=_uniform(rng, (dim, dim), dim),
        spatial_pos=_uniform(rng, (cfg.joints, dim), dim),
        temporal_pos=_uniform(rng, (cfg.frames, dim), dim),
        entry_attn=_init_attn(rng, dim, cfg.heads),
        entry_mlp=_init_mlp(rng, dim, hidden),
        tcep_w=_uniform(rng, (dim, dim), dim),
        adj_learned=np.zeros((cfg.frames, cfg.frames)),
        time_w1=_uniform(rng, (dim, dim), dim),
        time_b1=np.zeros(dim),
        time_w2=_uniform(rng, (dim, dim), dim),
        time_b2=np.zeros(dim),
        blocks=blocks,
        cross=CrossWeights(
            wq=_uniform(rng, (dim, dim), dim),
            wk=_uniform(rng, (dim, dim), dim),
            wv=_uniform(rng, (dim, dim), dim),
            wo=_uniform(rng, (dim, dim), dim),
            heads=cfg.heads,
            ln_q_scale=np.ones(dim),
            ln_q_shift=np.zeros(dim),
            ln_kv_scale=np.ones(dim),
            ln_kv_shift=np.zeros(dim),
        ),
        head_w=_uniform(rng, (dim, OUTPUT_WIDTH), dim),
        head_b=np.zeros(OUTPUT_WIDTH),
    )


def pose_embed(pose_3d: np.ndarray, keypoints_2d: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenate 3-D and 2-D inputs per token and project to the model width."""
    pose_3d = np.asarray(pose_3d, dtype=np.float64)
    keypoints_2d = np.asarray(keypoints_2d, dtype=np.float64)
    if pose_3d.shape[:2] != keypoints_2d.shape[:2]:
        raise ShapeError(
            f"pose_embed: 3-D {pose_3d.shape} and 2-D {keypoints_2d.shape} disagree on (J, F)"
        )
    stacked = np.concatenate([pose_3d, keypoints_2d], axis=-1)
    return linear(stacked, w, b)


def spatial_gcn(tokens: np.ndarray, joint_adj: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One residual graph-convolution step over the joint axis, per frame."""
    norm = normalize_adjacency(joint_adj)
    mixed = np.einsum("ij,jfd->ifd", norm, tokens)
    return tokens + gelu(linear(mixed, w))


def spatial_mhsa(tokens: np.ndarray, attn: AttnWeights, mlp: MlpWeights) -> np.ndarray:
    """Dense attention + MLP over the joint axis, independently per frame."""
    per_frame = np.swapaxes(tokens, 0, 1)  # (F, J, D)
    out = attention_block(per_frame, None, attn, mlp)
    return np.swapaxes(out, 0, 1)


def timestep_features(t: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of a timestep at the given width (sin half, cos half)."""
    if t < 0:
        raise ValueError(f"timestep_features: t must be >= 0, got {t}")
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    angles = t * freqs
    feats = np.concatenate([np.sin(angles), np.cos(angles)])
    if dim % 2:
        feats = np.concatenate([feats, np.zeros(1)])
    return feats


def timestep_embedding(t: int, params: DenoiserParams) -> np.ndarray:
    """Sinusoid followed by affine -> GELU -> affine, ready to broadcast-add."""
    feats = timestep_features(t, params.time_w1.shape[0])
    return linear(gelu(linear(feats, params.time_w1, params.time_b1)), params.time_w2, params.time_b2)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(f"{name}: {exc}") from exc


def _refresh_mask(tokens: np.ndarray, top_k: int) -> np.ndarray:
    return np.stack([select_topk_mask(frame_similarity(tokens[j]), top_k) for j in range(tokens.shape[0])])


def denoise_forward(
    noisy_pose: np.ndarray,
    keypoints_2d: np.ndarray,
    t: int,
    cfg: DenoiserConfig,
    params: DenoiserParams,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Predict the clean (J, F, 3) pose sequence from a noisy one.

    When ``diagnostics`` is a dict it receives the temporal mask and the
    retained frame indices of this call.
    """
    stream = _stage("pose_embed", pose_embed, noisy_pose, keypoints_2d, params.embed_w, params.embed_b)
    stream = _stage("spatial_gcn", spatial_gcn, stream, cfg.joint_graph(), params.gcn_w)
    stream = stream + params.spatial_pos[:, None, :]
    stream = _stage("entry_spatial_mhsa", spatial_mhsa, stream, params.entry_attn, params.entry_mlp)

    adj = TemporalAdjacency(base=cfg.temporal_base(), learned=params.adj_learned)
    stream, mask = _stage("tcep", tcep_refine, stream, adj, TcepParams(params.tcep_w, cfg.corr_topk))
    stream = stream + params.temporal_pos[None, :, :]
    stream = stream + _stage("timestep_embedding", timestep_embedding, t, params)

    add_mask = _stage("temporal_mask", to_additive_mask, mask)
    for i in range(cfg.sparse_blocks):
        block = params.blocks[i]
        stream = _stage(f"block{i}_spatial", spatial_mhsa, stream, block.spatial_attn, block.spatial_mlp)
        if cfg.recompute_mask_per_block:
            mask = _stage(f"block{i}_mask", _refresh_mask, stream, cfg.corr_topk)
            add_mask = to_additive_mask(mask)
        stream = _stage(
            f"block{i}_temporal", attention_block, stream, add_mask, block.temporal_attn, block.temporal_mlp
        )

    skip = stream  # full-length stream feeding the cross-attention queries
    condensed, indices, _state = _stage(
        "mgptp", prune_frames, stream, mask, cfg.pool_threshold, cfg.knn_k, cfg.keep_frames
    )
    for i in range(cfg.sparse_blocks, cfg.blocks):
        block = params.blocks[i]
        condensed = _stage(f"block{i}_spatial", spatial_mhsa, condensed, block.spatial_attn, block.spatial_mlp)
        condensed = _stage(
            f"block{i}_temporal", attention_block, condensed, None, block.temporal_attn, block.temporal_mlp
        )

    restored = _stage("cross_mhsa", cross_mhsa, skip, condensed, params.cross)
    out = _stage("head", linear, restored, params.head_w, params.head_b)

    if diagnostics is not None:
        diagnostics["retained_indices"] = indices
        diagnostics["temporal_mask"] = mask
    return out


def dense_reference_forward(
    noisy_pose: np.ndarray,
    keypoints_2d: np.ndarray,
    t: int,
    cfg: DenoiserConfig,
    params: DenoiserParams,
) -> np.ndarray:
    """Reference pipeline built from the same blocks with full masks and no
    pruning; used as the oracle for degenerate-setting equivalence."""
    stream = pose_embed(noisy_pose, keypoints_2d, params.embed_w, params.embed_b)
    stream = spatial_gcn(stream, cfg.joint_graph(), params.gcn_w)
    stream = stream + params.spatial_pos[:, None, :]
    stream = spatial_mhsa(stream, params.entry_attn, params.entry_mlp)

    adj = TemporalAdjacency(base=cfg.temporal_base(), learned=params.adj_learned)
    full_mask = np.ones((cfg.joints, cfg.frames, cfg.frames))
    stream, _ = tcep_refine(stream, adj, TcepParams(params.tcep_w, cfg.frames - 1 if cfg.frames > 1 else 1))
    stream = stream + params.temporal_pos[None, :, :]
    stream = stream + timestep_embedding(t, params)

    add_mask = to_additive_mask(full_mask)
    for i in range(cfg.sparse_blocks):
        block = params.blocks[i]
        stream = spatial_mhsa(stream, block.spatial_attn, block.spatial_mlp)
        stream = attention_block(stream, add_mask, block.temporal_attn, block.temporal_mlp)

    skip = stream
    for i in range(cfg.sparse_blocks, cfg.blocks):
        block = params.blocks[i]
        stream = spatial_mhsa(stream, block.spatial_attn, block.spatial_mlp)
        stream = attention_block(stream, None, block.temporal_attn, block.temporal_mlp)

    restored = cross_mhsa(skip, stream, params.cross)
    return linear(restored, params.head_w, params.head_b)


def _named_tensors(params: DenoiserParams) -> dict[str, np.ndarray]:
    out = {
        "embed.w": params.embed_w,
        "embed.b": params.embed_b,
        "gcn.w": params.gcn_w,
        "pos.spatial": params.spatial_pos,
        "pos.temporal": params.temporal_pos,
        "tcep.w": params.tcep_w,
        "tcep.adj_learned": params.adj_learned,
        "time.w1": params.time_w1,
        "time.b1": params.time_b1,
        "time.w2": params.time_w2,
        "time.b2": params.time_b2,
        "head.w": params.head_w,
        "head.b": params.head_b,
    }
    def add_attn(prefix: str, a: AttnWeights):
        out[f"{prefix}.wq"] = a.wq
        out[f"{prefix}.wk"] = a.wk
        out[f"{prefix}.wv"] = a.wv
        out[f"{prefix}.wo"] = a.wo
        out[f"{prefix}.ln_scale"] = a.ln_scale
        out[f"{prefix}.ln_shift"] = a.ln_shift

    def add_mlp(prefix: str, m: MlpWeights):
        out[f"{prefix}.w1"] = m.w1
        out[f"{prefix}.b1"] = m.b1
        out[f"{prefix}.w2"] = m.w2
        out[f"{prefix}.b2"] = m.b2
        out[f"{prefix}.ln_scale"] = m.ln_scale
        out[f"{prefix}.ln_shift"] = m.ln_shift

    add_attn("entry.attn", params.entry_attn)
    add_mlp("entry.mlp", params.entry_mlp)
    for i, blk in enumerate(params.blocks):
        add_attn(f"block{i}.spatial.attn", blk.spatial_attn)
        add_mlp(f"block{i}.spatial.mlp", blk.spatial_mlp)
        add_attn(f"block{i}.temporal.attn", blk.temporal_attn)
        add_mlp(f"block{i}.temporal.mlp", blk.temporal_mlp)
    out["cross.wq"] = params.cross.wq
    out["cross.wk"] = params.cross.wk
    out["cross.wv"] = params.cross.wv
    out["cross.wo"] = params.cross.wo
    out["cross.ln_q_scale"] = params.cross.ln_q_scale
    out["cross.ln_q_shift"] = params.cross.ln_q_shift
    out["cross.ln_kv_scale"] = params.cross.ln_kv_scale
    out["cross.ln_kv_shift"] = params.cross.ln_kv_shift
    return out


def save_denoiser_params(path, params: DenoiserParams) -> None:
    """Write all parameter tensors to a checkpoint container."""
    htp_io.save_checkpoint(path, _named_tensors(params))


def load_denoiser_params(path, cfg: DenoiserConfig) -> DenoiserParams:
    """Load a checkpoint and validate every tensor shape against the config."""
    loaded = htp_io.load_checkpoint(path)
    template = init_params(cfg, seed=0)
    expected = _named_tensors(template)
    missing = sorted(set(expected) - set(loaded))
    extra = sorted(set(loaded) - set(expected))
    if missing or extra:
        raise htp_io.FormatError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
    for name, arr in expected.items():
        if loaded[name].shape != arr.shape:
            raise htp_io.FormatError(
                f"checkpoint tensor {name}: shape {loaded[name].shape}, config expects {arr.shape}"
            )
        arr[...] = loaded[name]
    return template
