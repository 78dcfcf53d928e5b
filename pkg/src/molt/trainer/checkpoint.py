"""Self-describing binary container for trained models.

Layout (little-endian)::

    b"MLTC1"  u32 n_sections
    per section:
        u32 name_len | name (utf-8) | u8 dtype | u32 rank | u64 dims[rank]
        | payload | u32 crc32(name_len .. payload)

dtype tags: 1 float64, 2 int64, 3 utf-8 bytes (rank 1). Reserved section
names start with ``__``: ``__arch__`` (JSON kind + config), ``__scaler__``
(float64 [mu, sigma]) and ``__provenance__`` (JSON).
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MLTC1"
F64, I64, UTF8 = 1, 2, 3
_DTYPES = {F64: np.dtype("<f8"), I64: np.dtype("<i8")}


class CheckpointError(ValueError):
    pass


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ModelCheckpoint:
    kind: str
    config: dict
    tensors: dict = field(default_factory=dict)
    scaler: tuple | None = None
    provenance: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        sections = [("__arch__", UTF8, _dumps({"kind": self.kind, "config": self.config}).encode())]
        if self.scaler is not None:
            sections.append(("__scaler__", F64, np.asarray(self.scaler, dtype=np.float64)))
        sections.append(("__provenance__", UTF8, _dumps(self.provenance).encode()))
        for name, value in self.tensors.items():
            if name.startswith("__"):
                raise CheckpointError(f"tensor name {name!r} is reserved")
            arr = np.asarray(value)
            tag = I64 if np.issubdtype(arr.dtype, np.integer) else F64
            sections.append((name, tag, arr))
        out = [MAGIC, struct.pack("<I", len(sections))]
        for name, tag, value in sections:
            out.append(_pack_section(name, tag, value))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModelCheckpoint":
        if blob[: len(MAGIC)] != MAGIC:
            raise CheckpointError("bad magic: not an MLTC1 checkpoint")
        pos = len(MAGIC)
        (count,) = _unpack("<I", blob, pos)
        pos += 4
        arch = scaler = prov = None
        tensors = {}
        for _ in range(count):
            name, tag, value, pos = _read_section(blob, pos)
            if name == "__arch__":
                arch = json.loads(value)
            elif name == "__scaler__":
                scaler = tuple(float(v) for v in value)
            elif name == "__provenance__":
                prov = json.loads(value)
            else:
                tensors[name] = value
        if pos != len(blob):
            raise CheckpointError(f"{len(blob) - pos} trailing bytes after last section")
        if arch is None:
            raise CheckpointError("missing __arch__ section")
        return cls(arch["kind"], arch["config"], tensors, scaler, prov or {})

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ModelCheckpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _unpack(fmt, blob, pos):
    size = struct.calcsize(fmt)
    if pos + size > len(blob):
        raise CheckpointError("truncated checkpoint")
    return struct.unpack_from(fmt, blob, pos)


def _pack_section(name, tag, value):
    raw_name = name.encode("utf-8")
    if tag == UTF8:
        payload, dims = bytes(value), (len(value),)
    else:
        arr = np.ascontiguousarray(value, dtype=_DTYPES[tag])
        payload, dims = arr.tobytes(), arr.shape
    body = b"".join([
        struct.pack("<I", len(raw_name)), raw_name,
        struct.pack("<BI", tag, len(dims)),
        struct.pack(f"<{len(dims)}Q", *dims),
        payload,
    ])
    return body + struct.pack("<I", zlib.crc32(body))


def _read_section(blob, start):
    pos = start
    (name_len,) = _unpack("<I", blob, pos)
    pos += 4
    if pos + name_len > len(blob):
        raise CheckpointError("truncated checkpoint")
    raw_name = blob[pos:pos + name_len]
    pos += name_len
    tag, rank = _unpack("<BI", blob, pos)
    pos += 5
    if tag not in (F64, I64, UTF8):
        raise CheckpointError(f"unknown dtype tag {tag}")
    dims = _unpack(f"<{rank}Q", blob, pos)
    pos += 8 * rank
    n_bytes = int(np.prod(dims, dtype=np.int64)) * (1 if tag == UTF8 else 8)
    if pos + n_bytes + 4 > len(blob):
        raise CheckpointError("truncated checkpoint")
    payload = blob[pos:pos + n_bytes]
    pos += n_bytes
    (crc,) = _unpack("<I", blob, pos)
    if zlib.crc32(blob[start:pos]) != crc:
        try:
            label = raw_name.decode("utf-8")
        except UnicodeDecodeError:
            label = repr(raw_name)
        raise CheckpointError(f"checksum mismatch in section {label!r}")
    pos += 4
    name = raw_name.decode("utf-8")
    if tag == UTF8:
        value = payload.decode("utf-8")
    else:
        value = np.frombuffer(payload, dtype=_DTYPES[tag]).reshape(dims).copy()
    return name, tag, value, pos


def save_checkpoint(ckpt: ModelCheckpoint, path):
    ckpt.save(path)


def load_checkpoint(path, expected_kind=None, expected_config=None) -> ModelCheckpoint:
    ckpt = ModelCheckpoint.load(path)
    if expected_kind is not None and ckpt.kind != expected_kind:
        raise CheckpointError(f"architecture mismatch: checkpoint is {ckpt.kind!r}, expected {expected_kind!r}")
    if expected_config is not None and _dumps(ckpt.config) != _dumps(expected_config):
        raise CheckpointError(
            f"architecture mismatch: checkpoint config {_dumps(ckpt.config)} != {_dumps(expected_config)}"
        )
    return ckpt
