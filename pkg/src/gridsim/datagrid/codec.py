"""Versioned, length-prefixed binary record format for grid values.

Every encoded record starts with a two byte header (magic ``G`` and the
format version) followed by one tagged value.  Domain types register a
record codec by name; their fields are written as a nested mapping so any
member, in any process, can decode them without sharing Python pickles.
"""

import dataclasses
import struct

MAGIC = b"G"
VERSION = 1

_NONE = b"N"
_TRUE = b"T"
_FALSE = b"F"
_INT = b"i"
_FLOAT = b"d"
_STR = b"s"
_BYTES = b"b"
_LIST = b"l"
_TUPLE = b"t"
_DICT = b"m"
_RECORD = b"r"

_U32 = struct.Struct(">I")
_F64 = struct.Struct(">d")

_records_by_name = {}
_records_by_type = {}


class CodecError(ValueError):
    """Raised for malformed records or unsupported values."""


def register_record(cls=None, *, name=None):
    """Register a dataclass so instances round-trip through the codec.

    Usable as ``@register_record`` or ``@register_record(name="vm")``.
    """

    def wrap(klass):
        if not dataclasses.is_dataclass(klass):
            raise TypeError(f"{klass!r} is not a dataclass")
        tag = name or klass.__name__
        existing = _records_by_name.get(tag)
        if existing is not None and existing is not klass:
            raise CodecError(f"record name {tag!r} already registered")
        _records_by_name[tag] = klass
        _records_by_type[klass] = tag
        return klass

    if cls is None:
        return wrap
    return wrap(cls)


def encode(value) -> bytes:
    out = bytearray(MAGIC)
    out.append(VERSION)
    _write(out, value)
    return bytes(out)


def decode(data: bytes):
    if len(data) < 2 or data[:1] != MAGIC:
        raise CodecError("not a grid record")
    if data[1] != VERSION:
        raise CodecError(f"unsupported record version {data[1]}")
    value, pos = _read(memoryview(data), 2)
    if pos != len(data):
        raise CodecError("trailing bytes after record")
    return value


def _write_len(out, n):
    out += _U32.pack(n)


def _write(out, value):
    # bool before int: bool is an int subclass
    if value is None:
        out += _NONE
    elif value is True:
        out += _TRUE
    elif value is False:
        out += _FALSE
    elif isinstance(value, int):
        width = max(1, (value.bit_length() + 8) // 8)
        out += _INT
        out.append(width)
        out += value.to_bytes(width, "big", signed=True)
    elif isinstance(value, float):
        out += _FLOAT
        out += _F64.pack(value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += _STR
        _write_len(out, len(raw))
        out += raw
    elif isinstance(value, (bytes, bytearray, memoryview)):
        raw = bytes(value)
        out += _BYTES
        _write_len(out, len(raw))
        out += raw
    elif type(value) in _records_by_type:
        out += _RECORD
        _write(out, _records_by_type[type(value)])
        fields = {f.name: getattr(value, f.name) for f in dataclasses.fields(value)}
        _write(out, fields)
    elif isinstance(value, tuple):
        out += _TUPLE
        _write_len(out, len(value))
        for item in value:
            _write(out, item)
    elif isinstance(value, (list, frozenset, set)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        out += _LIST
        _write_len(out, len(items))
        for item in items:
            _write(out, item)
    elif isinstance(value, dict):
        out += _DICT
        _write_len(out, len(value))
        for k, v in value.items():
            _write(out, k)
            _write(out, v)
    else:
        raise CodecError(f"cannot encode value of type {type(value).__name__}")


def _read_len(buf, pos):
    if pos + 4 > len(buf):
        raise CodecError("truncated length")
    return _U32.unpack_from(buf, pos)[0], pos + 4


def _read(buf, pos):
    if pos >= len(buf):
        raise CodecError("truncated record")
    tag = bytes(buf[pos:pos + 1])
    pos += 1
    if tag == _NONE:
        return None, pos
    if tag == _TRUE:
        return True, pos
    if tag == _FALSE:
        return False, pos
    if tag == _INT:
        width = buf[pos]
        pos += 1
        if pos + width > len(buf):
            raise CodecError("truncated integer")
        return int.from_bytes(buf[pos:pos + width], "big", signed=True), pos + width
    if tag == _FLOAT:
        if pos + 8 > len(buf):
            raise CodecError("truncated float")
        return _F64.unpack_from(buf, pos)[0], pos + 8
    if tag in (_STR, _BYTES):
        n, pos = _read_len(buf, pos)
        if pos + n > len(buf):
            raise CodecError("truncated string")
        raw = bytes(buf[pos:pos + n])
        return (raw.decode("utf-8") if tag == _STR else raw), pos + n
    if tag in (_LIST, _TUPLE):
        n, pos = _read_len(buf, pos)
        items = []
        for _ in range(n):
            item, pos = _read(buf, pos)
            items.append(item)
        return (tuple(items) if tag == _TUPLE else items), pos
    if tag == _DICT:
        n, pos = _read_len(buf, pos)
        result = {}
        for _ in range(n):
            k, pos = _read(buf, pos)
            v, pos = _read(buf, pos)
            result[k] = v
        return result, pos
    if tag == _RECORD:
        name, pos = _read(buf, pos)
        fields, pos = _read(buf, pos)
        cls = _records_by_name.get(name)
        if cls is None:
            raise CodecError(f"unknown record type {name!r}")
        return cls(**fields), pos
    raise CodecError(f"unknown tag {tag!r}")
