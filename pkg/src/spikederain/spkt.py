"""SPKT tensor dumps and the checkpoint container.

SPKT layout (little-endian): ``b"SPKT"``, u32 rank, ``rank`` x u32 extents,
then ``prod(extents)`` float64 values in row-major order.

A checkpoint is a zip archive holding ``manifest.json`` plus one
``tensors/<name>.spkt`` entry per named tensor.
"""

from __future__ import annotations

import io
import json
import struct
import zipfile
from pathlib import Path

import numpy as np

MAGIC = b"SPKT"
MANIFEST = "manifest.json"
CHECKPOINT_FORMAT = "spikederain-checkpoint"


class SpktError(ValueError):
    pass


def dumps(array) -> bytes:
    a = np.array(array, dtype="<f8", order="C")  # keeps 0-d shapes
    header = MAGIC + struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape)
    return header + a.tobytes()


def loads(blob: bytes) -> np.ndarray:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise SpktError("not an SPKT blob (bad magic)")
    (rank,) = struct.unpack_from("<I", blob, 4)
    head = 8 + 4 * rank
    if len(blob) < head:
        raise SpktError(f"truncated header: rank {rank} needs {head} bytes, have {len(blob)}")
    shape = struct.unpack_from(f"<{rank}I", blob, 8)
    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) != head + 8 * count:
        raise SpktError(f"payload size {len(blob) - head} != {8 * count} bytes for shape {shape}")
    return np.frombuffer(blob, dtype="<f8", offset=head, count=count).reshape(shape).astype(np.float64)


def save_tensor(path, array) -> None:
    Path(path).write_bytes(dumps(array))


def load_tensor(path) -> np.ndarray:
    return loads(Path(path).read_bytes())


def save_checkpoint(path, state: dict[str, np.ndarray], manifest: dict | None = None) -> None:
    manifest = dict(manifest or {})
    manifest["format"] = CHECKPOINT_FORMAT
    manifest["tensors"] = [{"name": k, "shape": list(np.shape(v))} for k, v in state.items()]
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(MANIFEST, json.dumps(manifest, indent=2, sort_keys=True))
        for name, value in state.items():
            zf.writestr(f"tensors/{name}.spkt", dumps(value))
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read(MANIFEST))
            if manifest.get("format") != CHECKPOINT_FORMAT:
                raise SpktError(f"{path}: unknown checkpoint format {manifest.get('format')!r}")
            state = {e["name"]: loads(zf.read(f"tensors/{e['name']}.spkt")) for e in manifest["tensors"]}
    except (zipfile.BadZipFile, KeyError) as exc:
        raise SpktError(f"{path}: malformed checkpoint ({exc})") from exc
    return manifest, state
