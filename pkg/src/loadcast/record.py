"""Versioned model record and its canonical binary serialization.

The on-disk format is fixed and documented byte-by-byte in
docs/registry_format.md. Two checksums protect it: one over the whole body
(file integrity) and one over the payload alone. The payload excludes the
version and creation time, so two training runs with identical inputs and
seed produce bit-identical payloads.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import IntegrityError, ValidationError
from .lstm import GATE_FIELDS, HEAD_FIELDS, LstmParameters, RegressorHead, TrainConfig
from .series import PointId
from .windows import FEATURE_MODES, FeatureScaler, SplitSpec

MAGIC = b"LCMR"
FORMAT_VERSION = 1


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class ModelRecord:
    """Everything needed to reproduce and serve one trained model."""

    point: PointId
    version: int
    created_at: int
    train_config: TrainConfig
    split: SplitSpec
    scaler: FeatureScaler
    params: LstmParameters
    head: RegressorHead
    metrics: dict
    feature_mode: str

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ValidationError(f"unknown feature mode {self.feature_mode!r}")

    def _arrays(self) -> list[np.ndarray]:
        return self.params.arrays() + self.head.arrays()

    def _header(self) -> dict:
        return {
            "dims": {
                "inputDim": self.params.input_dim,
                "hiddenDim": self.params.hidden_dim,
                "horizon": self.head.horizon,
            },
            "featureMode": self.feature_mode,
            "metrics": self.metrics,
            "point": self.point.id,
            "scaler": self.scaler.to_dict(),
            "split": self.split.to_dict(),
            "trainConfig": self.train_config.to_dict(),
        }

    def payload_bytes(self) -> bytes:
        """Canonical serialization of the model substance; excludes version
        and created_at so identical training runs match byte for byte."""
        header = _canonical_json(self._header())
        parts = [struct.pack("<I", len(header)), header]
        parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in self._arrays()]
        return b"".join(parts)

    def payload_checksum(self) -> str:
        return _checksum(self.payload_bytes()).hex()

    def to_bytes(self) -> bytes:
        envelope = _canonical_json(
            {
                "createdAt": self.created_at,
                "payloadChecksum": self.payload_checksum(),
                "version": self.version,
            }
        )
        body = struct.pack("<I", len(envelope)) + envelope + self.payload_bytes()
        return MAGIC + bytes([FORMAT_VERSION]) + _checksum(body) + body

    def stamped(self, version: int, created_at: int) -> "ModelRecord":
        return replace(self, version=version, created_at=created_at)

    def headline_mse(self) -> float | None:
        v = self.metrics.get("overallMse")
        return float(v) if v is not None else None


def record_from_bytes(data: bytes, source: str = "<bytes>") -> ModelRecord:
    """Parse and verify a serialized record; raises IntegrityError on any
    corruption, ValidationError on structural nonsense that passed checksums."""
    if len(data) < 13 or data[:4] != MAGIC:
        raise IntegrityError(f"{source}: bad magic or truncated record")
    if data[4] != FORMAT_VERSION:
        raise IntegrityError(f"{source}: unsupported format version {data[4]}")
    stored_sum = data[5:13]
    body = data[13:]
    if _checksum(body) != stored_sum:
        raise IntegrityError(f"{source}: body checksum mismatch")
    try:
        (env_len,) = struct.unpack_from("<I", body, 0)
        envelope = json.loads(body[4 : 4 + env_len])
        payload = body[4 + env_len :]
        (hdr_len,) = struct.unpack_from("<I", payload, 0)
        header = json.loads(payload[4 : 4 + hdr_len])
        dims = header["dims"]
        d, H, K = dims["inputDim"], dims["hiddenDim"], dims["horizon"]
        shapes = [(H, d)] * 4 + [(H, H)] * 4 + [(H,)] * 4 + [(K, H), (K,)]
        offset = 4 + hdr_len
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
            arrays.append(arr.reshape(shape).astype(np.float64))
            offset += count * 8
        if offset != len(payload):
            raise IntegrityError(f"{source}: trailing bytes after weight arrays")
        params = LstmParameters(
            input_dim=d,
            hidden_dim=H,
            **dict(zip(GATE_FIELDS, arrays[:12])),
        )
        head = RegressorHead(**dict(zip(HEAD_FIELDS, arrays[12:])))
        record = ModelRecord(
            point=PointId(header["point"]),
            version=envelope["version"],
            created_at=envelope["createdAt"],
            train_config=TrainConfig.from_dict(header["trainConfig"]),
            split=SplitSpec.from_dict(header["split"]),
            scaler=FeatureScaler.from_dict(header["scaler"]),
            params=params,
            head=head,
            metrics=header["metrics"],
            feature_mode=header["featureMode"],
        )
    except IntegrityError:
        raise
    except (KeyError, ValueError, struct.error, json.JSONDecodeError) as e:
        raise IntegrityError(f"{source}: malformed record structure: {e}") from e
    if record.payload_checksum() != envelope["payloadChecksum"]:
        raise IntegrityError(f"{source}: payload checksum mismatch")
    return record
