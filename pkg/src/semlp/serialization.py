"""Versioned, checksummed container for models and normalization parameters.

Byte layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"SEMLPBIN"
    8       4     format version (uint32, currently 1)
    12      8     header length H (uint64)
    20      8     payload length P (uint64)
    28      H     header: UTF-8 JSON, sorted keys, no insignificant whitespace
    28+H    P     payload: float64 arrays, little-endian, C order, concatenated
    28+H+P  32    SHA-256 digest of bytes [0, 28+H+P)

The header always carries ``"kind"`` (``"model"`` or ``"norm_params"``).
Model headers add ``config``, the embedded ``norm_params`` (or null),
``norm_params_sha256`` (digest of the paired norm-params file, or null) and
``arrays``, a list of ``{"name", "shape"}`` entries in payload order. Floats
in the header are written with ``repr`` precision, so every value survives a
round trip exactly and serialization of a given object is byte-stable.
"""

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from .data import NormParams
from .errors import (
    ChecksumError,
    ModelLoadError,
    PairingError,
    TruncatedStreamError,
    VersionMismatchError,
)
from .se_mlp import SEMLPConfig, SEMLPModel

MAGIC = b"SEMLPBIN"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQQ")
_DIGEST_LEN = 32


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def pack(header, arrays=()):
    """Encode a header dict and a sequence of ``(name, array)`` pairs."""
    header = dict(header)
    header["arrays"] = [{"name": n, "shape": list(np.shape(a))} for n, a in arrays]
    head = _canonical_json(header)
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head), len(payload)) + head + payload
    return body + hashlib.sha256(body).digest()


def unpack(blob):
    """Decode a container. Returns ``(header, {name: array})``."""
    blob = bytes(blob)
    if len(blob) < _PREFIX.size + _DIGEST_LEN:
        raise TruncatedStreamError(f"stream is {len(blob)} bytes, shorter than the fixed prefix")
    magic, version, head_len, payload_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise ModelLoadError("not a semlp container (bad magic)")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"container format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    expected = _PREFIX.size + head_len + payload_len + _DIGEST_LEN
    if len(blob) < expected:
        raise TruncatedStreamError(f"stream is {len(blob)} bytes, expected {expected}")
    if len(blob) > expected:
        raise ModelLoadError(f"{len(blob) - expected} unexpected trailing bytes")
    body, digest = blob[:-_DIGEST_LEN], blob[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("checksum mismatch; the stream is corrupted")
    try:
        header = json.loads(body[_PREFIX.size:_PREFIX.size + head_len].decode())
    except ValueError as exc:
        raise ModelLoadError(f"unreadable header: {exc}") from None
    payload = body[_PREFIX.size + head_len:]
    arrays, pos = {}, 0
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + n > len(payload):
            raise ModelLoadError(f"array {entry['name']!r} runs past the payload")
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=n // 8, offset=pos)\
            .astype(np.float64).reshape(shape)
        pos += n
    if pos != len(payload):
        raise ModelLoadError("payload length does not match the array manifest")
    return header, arrays


def atomic_write_bytes(path, data):
    """Write through a temporary file in the same directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    with open(path, "rb") as fh:
        return fh.read()


# ---- normalization parameters ----------------------------------------------


def serialize_norm_params(np_):
    np_.validate()
    return pack({"kind": "norm_params", "norm_params": np_.to_dict()})


def deserialize_norm_params(blob):
    header, _ = unpack(blob)
    if header.get("kind") != "norm_params":
        raise ModelLoadError(f"expected a norm_params container, found {header.get('kind')!r}")
    return NormParams.from_dict(header["norm_params"]).validate()


def norm_params_checksum(np_):
    return hashlib.sha256(serialize_norm_params(np_)).hexdigest()


def persist_norm_params(np_, path):
    atomic_write_bytes(path, serialize_norm_params(np_))


def load_norm_params(path):
    return deserialize_norm_params(_read(path))


# ---- models -------------------------------------------------------------------


def serialize_model(m):
    for name, arr in m.state_arrays().items():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"refusing to serialize non-finite parameter {name}")
    norm = m.norm_params
    header = {
        "kind": "model",
        "config": m.config.to_dict(),
        "norm_params": norm.to_dict() if norm is not None else None,
        "norm_params_sha256": norm_params_checksum(norm) if norm is not None else None,
    }
    return pack(header, list(m.state_arrays().items()))


def deserialize_model(blob):
    header, arrays = unpack(blob)
    if header.get("kind") != "model":
        raise ModelLoadError(f"expected a model container, found {header.get('kind')!r}")
    cfg = SEMLPConfig.from_dict(header["config"])
    norm = header.get("norm_params")
    model = SEMLPModel(cfg, rng=None, norm_params=NormParams.from_dict(norm) if norm else None)
    try:
        model.load_snapshot(arrays)
    except ValueError as exc:
        raise ModelLoadError(f"array layout does not match the stored config: {exc}") from None
    model.norm_params_sha256 = header.get("norm_params_sha256")
    return model


def save_model(m, path):
    atomic_write_bytes(path, serialize_model(m))


def load_model(path, norm_path=None):
    """Load a model; when ``norm_path`` is given, check that it is the paired file."""
    model = deserialize_model(_read(path))
    if norm_path is not None:
        blob = _read(norm_path)
        norm = deserialize_norm_params(blob)
        digest = hashlib.sha256(blob).hexdigest()
        if model.norm_params_sha256 != digest:
            raise PairingError(
                f"{norm_path} (sha256 {digest[:12]}) is not the norm-params file paired with {path}"
            )
        model.norm_params = norm
    return model
