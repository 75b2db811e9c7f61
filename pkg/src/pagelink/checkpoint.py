"""Binary checkpoint container.

Layout::

    b"PAGELINK-CKPT\\n"
    one UTF-8 JSON header line: format version, section tag, schema hash,
        caller fields, and the ordered list of (name, shape) arrays
    the arrays, row-major little-endian float64, in header order
"""
from __future__ import annotations

import json

import numpy as np

from .exceptions import ParseError, SchemaError

MAGIC = b"PAGELINK-CKPT\n"
FORMAT_VERSION = 1


def write(path, section: str, schema_hash: str, fields: dict, arrays: dict):
    header = {"format_version": FORMAT_VERSION, "section": section, "schema_hash": schema_hash,
              "fields": fields,
              "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()]}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read(path, expect_schema: str | None = None):
    """Return ``(section, schema_hash, fields, arrays)``."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ParseError(f"{path}: not a checkpoint file")
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported format version {header.get('format_version')}")
        if expect_schema is not None and header["schema_hash"] != expect_schema:
            raise SchemaError(f"checkpoint schema {header['schema_hash']} does not match "
                              f"graph schema {expect_schema}")
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ParseError(f"{path}: truncated array {spec['name']!r}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    return header["section"], header["schema_hash"], header["fields"], arrays
