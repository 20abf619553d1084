"""Binary bundles: a JSON header followed by little-endian array blobs.

Layout::

    magic (4 bytes) | version (uint32 LE) | header length (uint64 LE)
    | header JSON (utf-8, sorted keys) | blob 0 | blob 1 | ...

The header lists every blob as ``{name, dtype, shape, offset, nbytes}`` with
offsets relative to the first blob. Only ``<f8`` and ``<i8`` are written.
"""
import json
import struct

import numpy as np

from egpmda.utils.errors import CheckpointError

_PREFIX = struct.Struct('<4sIQ')
_DTYPES = {'f8': '<f8', 'i8': '<i8'}


def _as_le(array):
    array = np.asarray(array)
    kind = 'f8' if array.dtype.kind == 'f' else 'i8'
    return kind, np.ascontiguousarray(array, dtype=_DTYPES[kind])


def write_bundle(path, magic, version, header, arrays):
    """Write header + named arrays; arrays is an ordered mapping"""
    directory = []
    blobs = []
    offset = 0
    for name, array in arrays.items():
        kind, le = _as_le(array)
        raw = le.tobytes()
        directory.append({
            'name': name,
            'dtype': kind,
            'shape': list(le.shape),
            'offset': offset,
            'nbytes': len(raw)
        })
        blobs.append(raw)
        offset += len(raw)

    full_header = dict(header)
    full_header['arrays'] = directory
    encoded = json.dumps(full_header, sort_keys=True, separators=(',', ':')).encode('utf-8')

    with open(path, 'wb') as fh:
        fh.write(_PREFIX.pack(magic, version, len(encoded)))
        fh.write(encoded)
        for raw in blobs:
            fh.write(raw)


def read_bundle(path, magic, version):
    """Return (header, arrays) for a bundle written by write_bundle"""
    with open(path, 'rb') as fh:
        payload = fh.read()

    if len(payload) < _PREFIX.size:
        raise CheckpointError(f'{path}: truncated bundle', code='BAD_BUNDLE')
    found_magic, found_version, header_len = _PREFIX.unpack_from(payload, 0)
    if found_magic != magic:
        raise CheckpointError(f'{path}: expected a {magic.decode()} bundle, found {found_magic!r}',
                              code='BAD_BUNDLE')
    if found_version != version:
        raise CheckpointError(f'{path}: unsupported bundle version {found_version}',
                              code='BAD_BUNDLE_VERSION')

    start = _PREFIX.size
    header = json.loads(payload[start:start + header_len].decode('utf-8'))
    base = start + header_len

    arrays = {}
    for entry in header.pop('arrays'):
        begin = base + entry['offset']
        raw = payload[begin:begin + entry['nbytes']]
        if len(raw) != entry['nbytes']:
            raise CheckpointError(f"{path}: blob {entry['name']} is truncated", code='BAD_BUNDLE')
        array = np.frombuffer(raw, dtype=_DTYPES[entry['dtype']]).reshape(entry['shape'])
        # native dtype, writable copy
        arrays[entry['name']] = array.astype(np.float64 if entry['dtype'] == 'f8' else np.int64)
    return header, arrays
