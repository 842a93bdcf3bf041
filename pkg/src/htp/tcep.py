"""Temporal correlation mask construction and token refinement.

Per joint, frames are scored by scaled dot-product similarity, each frame
keeps its top-k most correlated neighbors, and the directed selection is
symmetrized (logical OR) with self-loops restored. The resulting binary
mask gates a softmax-normalized similarity that is fused with a shared
temporal adjacency to refine the tokens in place of dense temporal mixing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import NEG_INF, ShapeError, gelu, softmax_rows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TcepParams:
    """Shared refinement projection (D x D) and per-row neighbor budget."""

    weight: np.ndarray
    top_k: int


@dataclass(frozen=True)
class TemporalAdjacency:
    """Base temporal graph, learnable overlay, and their symmetric fusion."""

    base: np.ndarray
    learned: np.ndarray
    fused: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "fused", fuse_adjacency(self.base, self.learned))


def chain_adjacency(n: int) -> np.ndarray:
    """Temporal chain graph: self-loops plus +-1 frame neighbors."""
    adj = np.eye(n)
    idx = np.arange(n - 1)
    adj[idx, idx + 1] = 1.0
    adj[idx + 1, idx] = 1.0
    return adj


def fuse_adjacency(base: np.ndarray, learned: np.ndarray) -> np.ndarray:
    """Symmetrize the sum of the base graph and the learned overlay."""
    base = np.asarray(base, dtype=np.float64)
    learned = np.asarray(learned, dtype=np.float64)
    if base.shape != learned.shape or base.ndim != 2 or base.shape[0] != base.shape[1]:
        raise ShapeError(f"fuse_adjacency: shapes {base.shape} and {learned.shape} must be equal square")
    combined = base + learned
    return (combined + combined.T) / 2.0


def frame_similarity(tokens: np.ndarray) -> np.ndarray:
    """Scaled frame-by-frame similarity of one joint's (F, D) token sequence."""
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2:
        raise ShapeError(f"frame_similarity: expected (F, D), got {tokens.shape}")
    gram = tokens @ tokens.T / np.sqrt(tokens.shape[1])
    # enforce exact symmetry regardless of the BLAS kernel used
    return (gram + gram.T) / 2.0


def select_topk_mask(scores: np.ndarray, top_k: int) -> np.ndarray:
    """Binary frame mask: self-loops plus OR-symmetrized per-row top-k selection.

    The diagonal is suppressed during selection; ties break toward the lower
    frame index (stable sort). top_k >= F clamps to F - 1 with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise ShapeError(f"select_topk_mask: expected square matrix, got {scores.shape}")
    frames = scores.shape[0]
    if frames < 2:
        return np.ones((frames, frames))
    if top_k < 1:
        raise ValueError(f"select_topk_mask: top_k must be >= 1, got {top_k}")
    k = min(top_k, frames - 1)
    if k != top_k:
        log.warning("select_topk_mask: clamping top_k=%d to %d for %d frames", top_k, k, frames)

    offdiag = scores.copy()
    np.fill_diagonal(offdiag, NEG_INF)
    order = np.argsort(-offdiag, axis=1, kind="stable")  # ties: lower index first
    directed = np.zeros((frames, frames), dtype=bool)
    rows = np.repeat(np.arange(frames), k)
    directed[rows, order[:, :k].ravel()] = True

    mask = np.logical_or(directed, directed.T).astype(np.float64)
    np.fill_diagonal(mask, 1.0)
    return mask


def mask_similarity(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep scores on the mask support, set everything else to -inf."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if scores.shape != mask.shape:
        raise ShapeError(f"mask_similarity: shapes {scores.shape} and {mask.shape} differ")
    return np.where(mask == 1.0, scores, NEG_INF)


def tcep_refine(
    tokens: np.ndarray, adj: TemporalAdjacency, params: TcepParams
) -> tuple[np.ndarray, np.ndarray]:
    """Refine (J, F, D) tokens and emit the per-joint binary temporal mask.

    For each joint: gate the softmax of the masked similarity with the fused
    adjacency, mix frames through it, project with the shared weight, and add
    the GELU of the update back onto the input tokens.
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 3:
        raise ShapeError(f"tcep_refine: expected (J, F, D) tokens, got {tokens.shape}")
    joints, frames, dim = tokens.shape
    if adj.fused.shape != (frames, frames):
        raise ShapeError(f"tcep_refine: adjacency {adj.fused.shape} does not match {frames} frames")
    if params.weight.shape != (dim, dim):
        raise ShapeError(f"tcep_refine: weight {params.weight.shape} does not match feature dim {dim}")

    refined = np.empty_like(tokens)
    mask = np.empty((joints, frames, frames))
    for j in range(joints):
        sim = frame_similarity(tokens[j])
        mask[j] = select_topk_mask(sim, params.top_k)
        gated = adj.fused * softmax_rows(mask_similarity(sim, mask[j]))
        refined[j] = tokens[j] + gelu((gated @ tokens[j]) @ params.weight)
    return refined, mask
