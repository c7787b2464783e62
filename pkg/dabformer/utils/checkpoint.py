"""
Checkpoint Files

Binary layout (all integers little-endian):

    magic   4 bytes  b"DABF"
    version u32
    hash    32 bytes SHA-256 of the model configuration
    config  u32 length + UTF-8 JSON of the model configuration
    count   u32 number of tensors
    tensor  u32 name length + UTF-8 name, u32 rank, rank x u64 dims,
            little-endian float64 payload

Optimiser moments and training counters are stored as extra tensors under
``optim.`` and ``train.`` names.
"""

import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

import numpy as np
from pydantic import ValidationError

from dabformer.core.tensor import Tensor
from dabformer.schemas.model_schema import ModelConfig
from dabformer.utils.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, MESSAGES
from dabformer.utils.exceptions import CheckpointError

logger = logging.getLogger(__name__)

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = np.dtype("<f8")


@dataclass
class Checkpoint:
    config: Dict
    config_hash: bytes
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)

    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.config)

    def params(self) -> "OrderedDict[str, np.ndarray]":
        """Model parameters and buffers (no optimiser or training state)"""
        return OrderedDict((k, v) for k, v in self.tensors.items() if not k.startswith(("optim.", "train.")))

    def extras(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(("optim.", "train."))}


def encode_checkpoint(config: ModelConfig, tensors: Mapping[str, Union[np.ndarray, Tensor]]) -> bytes:
    config_json = json.dumps(config.model_dump(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_VERSION), config.config_hash()]
    parts += [_U32.pack(len(config_json)), config_json, _U32.pack(len(tensors))]
    for name, value in tensors.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        encoded = name.encode("utf-8")
        parts += [_U32.pack(len(encoded)), encoded, _U32.pack(data.ndim)]
        parts += [_U64.pack(d) for d in data.shape]
        parts.append(np.ascontiguousarray(data, dtype=_F64).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.payload):
            raise CheckpointError(MESSAGES["TRUNCATED"], details=f"need {n} bytes at offset {self.offset}")
        chunk = self.payload[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]


def decode_checkpoint(payload: bytes) -> Checkpoint:
    reader = _Reader(payload)
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(MESSAGES["BAD_MAGIC"])
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config_hash = reader.take(32)
    try:
        config = json.loads(reader.take(reader.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError("checkpoint configuration is not valid JSON") from e
    if not isinstance(config, dict):
        raise CheckpointError("checkpoint configuration is not a JSON object")
    try:
        stored = ModelConfig(**config)
    except ValidationError as e:
        raise CheckpointError("checkpoint configuration is invalid", details=str(e)) from e
    if stored.config_hash() != config_hash:
        raise CheckpointError(MESSAGES["CORRUPT_CONFIG"])
    tensors = OrderedDict()
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        shape = tuple(reader.u64() for _ in range(reader.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(reader.take(8 * count), dtype=_F64).reshape(shape).astype(np.float64)
    if reader.offset != len(payload):
        raise CheckpointError("trailing bytes after tensor table", details=f"{len(payload) - reader.offset} bytes")
    return Checkpoint(config, config_hash, tensors)


def save_checkpoint(path: Union[str, Path], config: ModelConfig, tensors: Mapping[str, Union[np.ndarray, Tensor]]) -> Path:
    """Write a checkpoint; the file is replaced atomically"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(config, tensors))
    tmp.replace(path)
    logger.info(f"Saved checkpoint with {len(tensors)} tensors to {path}")
    return path


def load_checkpoint(path: Union[str, Path], expected: Optional[ModelConfig] = None) -> Checkpoint:
    """
    Read a checkpoint.

    Args:
        path: Checkpoint file
        expected: When given, the stored configuration hash must match it

    Raises:
        CheckpointError: Bad magic, version, truncation or configuration mismatch
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    checkpoint = decode_checkpoint(path.read_bytes())
    if expected is not None and checkpoint.config_hash != expected.config_hash():
        raise CheckpointError(MESSAGES["HASH_MISMATCH"], details=str(path))
    logger.info(f"Loaded checkpoint {path} ({len(checkpoint.tensors)} tensors)")
    return checkpoint
