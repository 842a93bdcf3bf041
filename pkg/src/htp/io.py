"""File formats: HTP1 binary tensors, pose CSVs, and zipped parameter checkpoints.

HTP1 layout: magic bytes ``HTP1``, u32 little-endian rank, rank u64
little-endian dims, then the float64 little-endian payload in row-major
order.
"""

from __future__ import annotations

import csv
import json
import struct
import zipfile
from pathlib import Path

import numpy as np

MAGIC = b"HTP1"


class FormatError(ValueError):
    """Raised for malformed HTP1 / CSV / checkpoint content."""


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<Q", d))
        fh.write(arr.astype("<f8").tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    return _decode_tensor(raw, str(path))


def _decode_tensor(raw: bytes, name: str) -> np.ndarray:
    if raw[:4] != MAGIC:
        raise FormatError(f"{name}: bad magic, expected {MAGIC!r}")
    (rank,) = struct.unpack_from("<I", raw, 4)
    off = 8
    dims = []
    for _ in range(rank):
        (d,) = struct.unpack_from("<Q", raw, off)
        dims.append(int(d))
        off += 8
    count = int(np.prod(dims)) if dims else 1
    payload = raw[off:]
    if len(payload) != count * 8:
        raise FormatError(f"{name}: payload is {len(payload)} bytes, expected {count * 8}")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def _encode_tensor(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    head = MAGIC + struct.pack("<I", arr.ndim)
    head += b"".join(struct.pack("<Q", d) for d in arr.shape)
    return head + arr.astype("<f8").tobytes()


def write_pose_csv(path: str | Path, pose: np.ndarray) -> None:
    """Write a (J, F, 3) or (J, F, 2) pose tensor as a dense frame,joint CSV.

    Values are written with repr so float64 round-trips exactly.
    """
    pose = np.asarray(pose, dtype=np.float64)
    if pose.ndim != 3 or pose.shape[2] not in (2, 3):
        raise FormatError(f"pose tensor must be (J, F, 2|3), got {pose.shape}")
    joints, frames, width = pose.shape
    header = ["frame", "joint", "u", "v"] if width == 2 else ["frame", "joint", "x", "y", "z"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for f in range(frames):
            for j in range(joints):
                writer.writerow([f, j] + [repr(float(v)) for v in pose[j, f]])


def read_pose_csv(path: str | Path) -> np.ndarray:
    """Read a pose CSV back into a (J, F, C) tensor; validates density."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if header[:2] != ["frame", "joint"] or len(header) not in (4, 5):
        raise FormatError(f"{path}: unexpected header {header}")
    width = len(header) - 2
    body = rows[1:]
    if not body:
        raise FormatError(f"{path}: no data rows")
    frames = max(int(r[0]) for r in body) + 1
    joints = max(int(r[1]) for r in body) + 1
    if len(body) != frames * joints:
        raise FormatError(f"{path}: {len(body)} rows, expected dense {joints}x{frames}")
    out = np.full((joints, frames, width), np.nan)
    for r in body:
        f, j = int(r[0]), int(r[1])
        out[j, f] = [float(v) for v in r[2 : 2 + width]]
    if np.isnan(out).any():
        raise FormatError(f"{path}: missing (frame, joint) entries")
    if not np.isfinite(out).all():
        raise FormatError(f"{path}: non-finite coordinates")
    return out


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Save named tensors as HTP1 entries in a zip container with a JSON manifest."""
    entries = {}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for i, (name, arr) in enumerate(tensors.items()):
            entry = f"tensors/{i:04d}.htp1"
            entries[name] = entry
            zf.writestr(entry, _encode_tensor(arr))
        manifest = {"format": "HTP1", "tensors": entries}
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    with zipfile.ZipFile(path, "r") as zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise FormatError(f"{path}: missing manifest.json") from None
        if manifest.get("format") != "HTP1":
            raise FormatError(f"{path}: unknown checkpoint format {manifest.get('format')!r}")
        out = {}
        for name, entry in manifest["tensors"].items():
            out[name] = _decode_tensor(zf.read(entry), f"{path}:{entry}")
    return out
