"""Versioned little-endian binary checkpoints.

Layout: magic b"LTCM", u32 format version, 32-byte config fingerprint,
then the encoder parameters (f64 arrays in a fixed order), the memory
(f64 keys, u32 values, u32 ages), the PCG64 rng state, and a u64 batch
counter. Loading requires the matching Config (shapes come from it; the
fingerprint must agree). Saves round-trip bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .config import Config, config_hash
from .encoder import LstmParams
from .memory import SparseMemory

MAGIC = b"LTCM"
FORMAT_VERSION = 1

# Empty slots hold -1 in memory; on disk values are u32.
_EMPTY_U32 = 0xFFFFFFFF


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    """Complete training state: everything needed to resume or evaluate."""

    config: Config
    params: LstmParams
    memory: SparseMemory
    rng: np.random.Generator
    batch_counter: int = 0


def _pack_rng(rng: np.random.Generator) -> bytes:
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise CheckpointError("only PCG64 generators are supported")
    inner = st["state"]
    return (inner["state"].to_bytes(16, "little")
            + inner["inc"].to_bytes(16, "little")
            + struct.pack("<BI", int(st["has_uint32"]), int(st["uinteger"])))


def _unpack_rng(buf: bytes) -> np.random.Generator:
    state = int.from_bytes(buf[:16], "little")
    inc = int.from_bytes(buf[16:32], "little")
    has_uint32, uinteger = struct.unpack("<BI", buf[32:37])
    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": state, "inc": inc},
        "has_uint32": has_uint32,
        "uinteger": uinteger,
    }
    return rng


_RNG_BYTES = 37


def save_checkpoint(ckpt: Checkpoint, path):
    params = ckpt.params
    mem = ckpt.memory
    values_u32 = np.where(mem.values < 0, _EMPTY_U32, mem.values).astype("<u4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(config_hash(ckpt.config))
        for arr in params.arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(mem.keys, dtype="<f8").tobytes())
        fh.write(values_u32.tobytes())
        fh.write(mem.ages.astype("<u4").tobytes())
        fh.write(_pack_rng(ckpt.rng))
        fh.write(struct.pack("<Q", ckpt.batch_counter))


def load_checkpoint(path, config: Config) -> Checkpoint:
    """Read a checkpoint; the supplied config must match the stored fingerprint."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    stored_hash = data[8:40]
    if stored_hash != config_hash(config):
        raise CheckpointError("config does not match the checkpoint fingerprint")

    off = 40
    h, d, v = config.hidden_dim, config.input_dim, config.vocab_size
    shapes = [(h, d + h)] * 4 + [(h,)] * 4 + [(v, d)]
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        arrays.append(arr.astype(np.float64))
        off += count * 8
    params = LstmParams(*arrays)
    params.validate()

    m, kd = config.mem_size, config.key_dim
    keys = np.frombuffer(data, dtype="<f8", count=m * kd, offset=off).reshape(m, kd)
    keys = keys.astype(np.float64)
    off += m * kd * 8
    values_u32 = np.frombuffer(data, dtype="<u4", count=m, offset=off)
    off += m * 4
    ages = np.frombuffer(data, dtype="<u4", count=m, offset=off)
    off += m * 4
    values = values_u32.astype(np.int64)
    values[values_u32 == _EMPTY_U32] = -1
    memory = SparseMemory(keys, values, ages.astype(np.int64), config.k_sparse)

    rng = _unpack_rng(data[off:off + _RNG_BYTES])
    off += _RNG_BYTES
    (batch_counter,) = struct.unpack_from("<Q", data, off)
    off += 8
    if off != len(data):
        raise CheckpointError("trailing bytes in checkpoint file")
    return Checkpoint(config=config, params=params, memory=memory,
                      rng=rng, batch_counter=batch_counter)
