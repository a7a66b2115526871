"""Binary checkpoint format.

Layout (little-endian)::

    b"STRL" | u32 version | u32 tensor count
    per tensor, sorted by name:
        u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | u8 dtype tag | payload
    u32 CRC-32 of every preceding byte

Dtype tags: 0 float32 (parameters, statistics, moments), 1 uint8 (the config
text), 2 int64 (the optimizer step). The config text leaves out machine-local
paths; a loaded model gets the defaults of the reading machine.
"""

import struct
import zlib
from pathlib import Path

import numpy as np

from strl.config import Config
from strl.models.state import build_model
from strl.utils.errors import CheckpointError, ConfigError
from strl.utils.logger import setup_logger

logger = setup_logger(__name__)

MAGIC = b"STRL"
VERSION = 1

_HEADER = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_RANK = struct.Struct("<B")
_DIM = struct.Struct("<I")
_TAG = struct.Struct("<B")
_CRC = struct.Struct("<I")

DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<i8")}
_TAGS = {dtype: tag for tag, dtype in DTYPES.items()}

CONFIG_KEY = "config"
STEP_KEY = "optim.step"


def _state_tensors(state):
    """Flatten a ModelState into name -> array."""
    tensors = {
        CONFIG_KEY: np.frombuffer(state.config.to_text(portable=True).encode("utf-8"), dtype=np.uint8),
        STEP_KEY: np.asarray(state.optimizer.step, dtype="<i8"),
    }
    for name, tensor in state.store.params.items():
        tensors[f"param.{name}"] = tensor.data.astype("<f4")
    for name, stats in state.store.bn_stats.items():
        tensors[f"bn.{name}.mean"] = stats.mean.astype("<f4")
        tensors[f"bn.{name}.var"] = stats.var.astype("<f4")
    for name, moment in state.optimizer.m.items():
        tensors[f"optim.m.{name}"] = moment.astype("<f4")
    for name, moment in state.optimizer.v.items():
        tensors[f"optim.v.{name}"] = moment.astype("<f4")
    return tensors


def encode_state(state):
    """Serialize a ModelState to checkpoint bytes."""
    tensors = _state_tensors(state)
    parts = [_HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name in sorted(tensors):
        array = tensors[name]
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_RANK.pack(array.ndim))
        parts.extend(_DIM.pack(dim) for dim in array.shape)
        parts.append(_TAG.pack(_TAGS[array.dtype]))
        parts.append(np.ascontiguousarray(array).tobytes())

    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def checkpoint_save(state, path):
    """
    Write a checkpoint.

    Args:
        state: ModelState
        path: Destination file (parent directories are created)

    Returns:
        Path: The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_state(state)
    with open(path, "wb") as f:
        f.write(data)
    logger.info(f"Checkpoint written to {path} ({len(data)} bytes, step {state.optimizer.step})")
    return path


def decode_tensors(data, source="checkpoint"):
    """
    Parse checkpoint bytes into name -> array after verifying the checksum.

    Raises:
        CheckpointError: Bad checksum, magic, version or truncated records
    """
    if len(data) < _HEADER.size + _CRC.size:
        raise CheckpointError(f"{source}: file too short ({len(data)} bytes)")

    body, (stored,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if zlib.crc32(body) != stored:
        raise CheckpointError(f"{source}: checksum mismatch (corrupt or truncated file)")

    magic, version, count = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported version {version} (expected {VERSION})")

    offset = _HEADER.size
    tensors = {}
    try:
        for _ in range(count):
            (name_len,) = _NAME_LEN.unpack_from(body, offset)
            offset += _NAME_LEN.size
            name = body[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = _RANK.unpack_from(body, offset)
            offset += _RANK.size
            shape = tuple(_DIM.unpack_from(body, offset + i * _DIM.size)[0] for i in range(rank))
            offset += rank * _DIM.size
            (tag,) = _TAG.unpack_from(body, offset)
            offset += _TAG.size

            if tag not in DTYPES:
                raise CheckpointError(f"{source}: tensor {name!r} has unknown dtype tag {tag}")
            dtype = DTYPES[tag]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if offset + nbytes > len(body):
                raise CheckpointError(f"{source}: tensor {name!r} runs past the end of the file")
            tensors[name] = np.frombuffer(body, dtype=dtype, count=nbytes // dtype.itemsize,
                                          offset=offset).reshape(shape).copy()
            offset += nbytes
    except (struct.error, UnicodeDecodeError) as e:
        raise CheckpointError(f"{source}: malformed tensor record ({e})") from None

    if offset != len(body):
        raise CheckpointError(f"{source}: {len(body) - offset} trailing bytes after {count} tensors")
    return tensors


def _assign(target, values, name, source):
    if target.shape != values.shape:
        raise CheckpointError(f"{source}: {name} has shape {values.shape}, model expects {target.shape}")
    target[...] = values


def checkpoint_load(path):
    """
    Read a checkpoint written by checkpoint_save.

    Args:
        path: Checkpoint file

    Returns:
        ModelState: Config, parameters, BN statistics and optimizer state

    Raises:
        CheckpointError: Corrupt file or tensors that do not fit the stored config
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: cannot read checkpoint ({e})") from None

    tensors = decode_tensors(data, source=str(path))
    if CONFIG_KEY not in tensors or STEP_KEY not in tensors:
        raise CheckpointError(f"{path}: missing config or optimizer step")

    try:
        config = Config.from_text(tensors.pop(CONFIG_KEY).tobytes().decode("utf-8"))
    except (ConfigError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: stored config is invalid ({e})") from None

    state = build_model(config)
    state.optimizer.step = int(tensors.pop(STEP_KEY))

    for name, tensor in state.store.params.items():
        key = f"param.{name}"
        if key not in tensors:
            raise CheckpointError(f"{path}: missing parameter {name!r}")
        _assign(tensor.data, tensors.pop(key), name, path)
    for name, stats in state.store.bn_stats.items():
        for field_name in ("mean", "var"):
            key = f"bn.{name}.{field_name}"
            if key not in tensors:
                raise CheckpointError(f"{path}: missing batch-norm statistic {key!r}")
            _assign(getattr(stats, field_name), tensors.pop(key), key, path)

    for key in sorted(k for k in tensors if k.startswith(("optim.m.", "optim.v."))):
        moments = state.optimizer.m if key.startswith("optim.m.") else state.optimizer.v
        name = key[len("optim.m."):]
        if name not in state.store.params:
            raise CheckpointError(f"{path}: optimizer moment for unknown parameter {name!r}")
        values = tensors.pop(key)
        if values.shape != state.store[name].shape:
            raise CheckpointError(f"{path}: {key} has shape {values.shape}, expected {state.store[name].shape}")
        moments[name] = values

    if tensors:
        raise CheckpointError(f"{path}: unexpected tensors {sorted(tensors)[:5]}")

    logger.info(f"Loaded checkpoint {path} (step {state.optimizer.step})")
    return state
