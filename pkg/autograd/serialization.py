import struct

import numpy as np

from utils.errors import FormatError

# Tensor record layout (all integers little-endian u32):
#   b"MAVT" | version | tensor count |
#   per tensor: name length | UTF-8 name | rank | dims... | float64 payload (LE)

MAGIC = b"MAVT"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")


def encode_record(tensors) -> bytes:
    """Serialize an ordered mapping name -> array into one record."""
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(tensors))]
    for name, value in tensors.items():
        array = np.asarray(value, dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.extend(_U32.pack(dim) for dim in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(chunks)


def _read_u32(buffer, offset):
    if offset + 4 > len(buffer):
        raise FormatError("record truncated")
    return _U32.unpack_from(buffer, offset)[0], offset + 4


def decode_record(buffer, offset=0):
    """Parse one record starting at `offset`.

    :return: (dict name -> float64 array, offset just past the record)
    """
    if buffer[offset : offset + 4] != MAGIC:
        raise FormatError("bad magic bytes, expected b'MAVT'")
    version, offset = _read_u32(buffer, offset + 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported record version {version}")
    count, offset = _read_u32(buffer, offset)

    tensors = {}
    for _ in range(count):
        length, offset = _read_u32(buffer, offset)
        if offset + length > len(buffer):
            raise FormatError("tensor name truncated")
        try:
            name = bytes(buffer[offset : offset + length]).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"tensor name is not valid UTF-8: {e}") from e
        offset += length
        rank, offset = _read_u32(buffer, offset)
        shape = []
        for _ in range(rank):
            dim, offset = _read_u32(buffer, offset)
            shape.append(dim)
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(buffer):
            raise FormatError(f"payload of '{name}' truncated")
        payload = np.frombuffer(buffer, dtype="<f8", count=nbytes // 8, offset=offset)
        tensors[name] = payload.astype(np.float64).reshape(shape)
        offset += nbytes
    return tensors, offset


def save_record(path, tensors):
    with open(path, "wb") as handle:
        handle.write(encode_record(tensors))


def load_record(path):
    with open(path, "rb") as handle:
        buffer = handle.read()
    tensors, _ = decode_record(buffer)
    return tensors
