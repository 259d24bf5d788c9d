"""On-disk artifacts: descriptor, saliency, and model stores plus CSVs.

All binary formats are little-endian with short ASCII magics. The
descriptor store keeps a full header (count + per-image metadata)
followed by the concatenated float32 payloads; the saliency store is a
sequence of self-describing blocks read until EOF; the model file holds
the grid shape and the float64 weight vector.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from .features import PatchGrid
from .salmatch import PHI_DIM, RankModel
from .saliency import SaliencyMap

DESCRIPTOR_MAGIC = b"RZSAL1\x00"
SALIENCY_MAGIC = b"RZSALM1"
MODEL_MAGIC = b"RZW1"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    camera: str
    identity: str


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated file while reading {what}")
    return buf


def _read_u32(fh: BinaryIO, what: str) -> int:
    return struct.unpack("<I", _read_exact(fh, 4, what))[0]


def _write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<I", value))


def _write_str(fh: BinaryIO, text: str) -> None:
    data = text.encode("utf-8")
    _write_u32(fh, len(data))
    fh.write(data)


def _read_str(fh: BinaryIO, what: str) -> str:
    n = _read_u32(fh, what)
    return _read_exact(fh, n, what).decode("utf-8")


def write_descriptor_store(path, grids: Sequence[PatchGrid]) -> None:
    with open(path, "wb") as fh:
        fh.write(DESCRIPTOR_MAGIC)
        _write_u32(fh, len(grids))
        for g in grids:
            _write_u32(fh, g.rows)
            _write_u32(fh, g.cols)
            _write_u32(fh, g.descriptors.shape[2])
            _write_str(fh, g.camera)
            _write_str(fh, g.identity or "")
        for g in grids:
            fh.write(np.ascontiguousarray(g.descriptors, dtype="<f4").tobytes())


def read_descriptor_store(path) -> list[PatchGrid]:
    with open(path, "rb") as fh:
        if _read_exact(fh, len(DESCRIPTOR_MAGIC), "magic") != DESCRIPTOR_MAGIC:
            raise ValueError("not a descriptor store")
        count = _read_u32(fh, "image count")
        headers = []
        for _ in range(count):
            rows = _read_u32(fh, "rows")
            cols = _read_u32(fh, "cols")
            dim = _read_u32(fh, "dim")
            camera = _read_str(fh, "camera")
            identity = _read_str(fh, "identity")
            headers.append((rows, cols, dim, camera, identity))
        grids = []
        for rows, cols, dim, camera, identity in headers:
            n = rows * cols * dim
            buf = _read_exact(fh, 4 * n, "descriptors")
            desc = np.frombuffer(buf, dtype="<f4", count=n).reshape(rows, cols, dim)
            grids.append(
                PatchGrid(
                    rows=rows,
                    cols=cols,
                    descriptors=desc.astype(np.float32),
                    camera=camera,
                    identity=identity or None,
                )
            )
    return grids


def write_saliency_store(path, maps: Sequence[SaliencyMap]) -> None:
    with open(path, "wb") as fh:
        fh.write(SALIENCY_MAGIC)
        for m in maps:
            _write_u32(fh, m.rows)
            _write_u32(fh, m.cols)
            fh.write(np.ascontiguousarray(m.scores, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(m.probs, dtype="<f4").tobytes())


def read_saliency_store(path) -> list[SaliencyMap]:
    maps = []
    with open(path, "rb") as fh:
        if _read_exact(fh, len(SALIENCY_MAGIC), "magic") != SALIENCY_MAGIC:
            raise ValueError("not a saliency store")
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise ValueError("truncated saliency block header")
            rows = struct.unpack("<I", head)[0]
            cols = _read_u32(fh, "cols")
            n = rows * cols
            scores = np.frombuffer(
                _read_exact(fh, 4 * n, "scores"), dtype="<f4", count=n
            )
            probs = np.frombuffer(
                _read_exact(fh, 4 * n, "probs"), dtype="<f4", count=n
            )
            maps.append(
                SaliencyMap(
                    rows=rows,
                    cols=cols,
                    scores=scores.astype(np.float64).reshape(rows, cols),
                    probs=probs.astype(np.float64).reshape(rows, cols),
                )
            )
    return maps


def write_model(path, model: RankModel) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        _write_u32(fh, model.rows)
        _write_u32(fh, model.cols)
        fh.write(np.ascontiguousarray(model.w, dtype="<f8").tobytes())


def read_model(path) -> RankModel:
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MODEL_MAGIC), "magic") != MODEL_MAGIC:
            raise ValueError("not a model file")
        rows = _read_u32(fh, "rows")
        cols = _read_u32(fh, "cols")
        n = PHI_DIM * rows * cols
        buf = _read_exact(fh, 8 * n, "weights")
        w = np.frombuffer(buf, dtype="<f8", count=n).astype(np.float64)
    return RankModel(rows=rows, cols=cols, w=w)


def write_score_matrix(path, matrix: np.ndarray) -> None:
    """probe,gallery,value rows; ids are store-positional indices."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe", "gallery", "value"])
        for u in range(matrix.shape[0]):
            for v in range(matrix.shape[1]):
                writer.writerow([u, v, repr(float(matrix[u, v]))])


def read_score_matrix(path) -> np.ndarray:
    entries = {}
    max_u = max_v = -1
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["probe", "gallery", "value"]:
            raise ValueError("not a score matrix CSV")
        for row in reader:
            u, v, value = int(row[0]), int(row[1]), float(row[2])
            entries[(u, v)] = value
            max_u, max_v = max(max_u, u), max(max_v, v)
    if max_u < 0:
        raise ValueError("empty score matrix")
    matrix = np.full((max_u + 1, max_v + 1), np.nan)
    for (u, v), value in entries.items():
        matrix[u, v] = value
    if np.any(np.isnan(matrix)):
        raise ValueError("score matrix has missing entries")
    return matrix


def read_manifest(path) -> list[ManifestEntry]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "camera", "identity"]:
            raise ValueError("manifest must start with path,camera,identity")
        for row in reader:
            if len(row) != 3:
                raise ValueError(f"malformed manifest row: {row!r}")
            if row[1] not in ("A", "B"):
                raise ValueError(f"camera must be A or B, got {row[1]!r}")
            out.append(ManifestEntry(path=row[0], camera=row[1], identity=row[2]))
    return out


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "camera", "identity"])
        for e in entries:
            writer.writerow([e.path, e.camera, e.identity])


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit P5 heat image, min-max scaled; constant input maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = np.round(255.0 * (values - lo) / (hi - lo))
    else:
        scaled = np.zeros_like(values)
    data = scaled.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
