"""Binary model container: magic 'PNC1', JSON header, float32 payload.

Layout: 4-byte magic, little-endian u32 header length, UTF-8 JSON header,
then every tensor's data as little-endian IEEE-754 float32 in header
order. The header JSON is serialized canonically (sorted keys, no
whitespace) so save -> load -> save is byte-identical.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

MAGIC = b"PNC1"
SCHEMA_VERSION = 1


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise DataError(f"header value of type {type(value).__name__} is not JSON-safe")


@dataclass(frozen=True)
class ModelContainer:
    """A named model family, its JSON-safe metadata, and named f32 tensors."""

    module: str
    header: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.module:
            raise DataError("container module name must be nonempty")
        object.__setattr__(self, "header", _json_safe(self.header))
        clean = {}
        for name, value in self.tensors.items():
            if not name:
                raise DataError("tensor names must be nonempty")
            arr = np.ascontiguousarray(np.asarray(value, dtype="<f4"))
            if not np.all(np.isfinite(arr)):
                raise DataError(f"tensor {name!r} contains non-finite values")
            clean[str(name)] = arr
        object.__setattr__(self, "tensors", clean)

    def tensor(self, name):
        if name not in self.tensors:
            raise DataError(f"container has no tensor {name!r}")
        return self.tensors[name]


def container_bytes(container: ModelContainer) -> bytes:
    header = {
        "schema": SCHEMA_VERSION,
        "module": container.module,
        "meta": container.header,
        "tensors": [
            {"name": name, "shape": list(arr.shape)}
            for name, arr in container.tensors.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    parts += [arr.tobytes() for arr in container.tensors.values()]
    return b"".join(parts)


def save_container(container: ModelContainer, path):
    with open(path, "wb") as fh:
        fh.write(container_bytes(container))


def parse_container(data: bytes) -> ModelContainer:
    if data[:4] != MAGIC:
        raise DataError(f"bad container magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 8:
        raise DataError("container truncated before header length")
    (header_len,) = struct.unpack("<I", data[4:8])
    blob = data[8:8 + header_len]
    if len(blob) != header_len:
        raise DataError("container truncated inside header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"container header is not valid JSON: {exc}") from exc
    if header.get("schema") != SCHEMA_VERSION:
        raise DataError(f"unsupported container schema {header.get('schema')!r}")
    declared = header.get("tensors", [])
    payload = data[8 + header_len:]
    expect = sum(int(np.prod(t["shape"], dtype=np.int64)) for t in declared) * 4
    if len(payload) != expect:
        raise DataError(f"payload is {len(payload)} bytes, header declares {expect}")
    tensors = {}
    offset = 0
    for entry in declared:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        offset += count * 4
    return ModelContainer(module=header["module"], header=header.get("meta", {}),
                          tensors=tensors)


def load_container(path) -> ModelContainer:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read container {path}: {exc}") from exc
    return parse_container(data)
