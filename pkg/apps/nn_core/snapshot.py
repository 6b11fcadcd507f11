"""
Parameter snapshots: magic, layer count and layer sizes as little-endian
uint32, then the flat vector as little-endian float64.
"""
import struct
from pathlib import Path

import numpy as np

from .exceptions import LayoutError
from .layout import ParamLayout, ParamVector

SNAPSHOT_MAGIC = b'DSNP'


def save_snapshot(params: ParamVector, path) -> Path:
    sizes = params.layout.layer_sizes
    header = SNAPSHOT_MAGIC + struct.pack(f'<{1 + len(sizes)}I', len(sizes), *sizes)
    path = Path(path)
    path.write_bytes(header + params.data.astype('<f8').tobytes())
    return path


def load_snapshot(path) -> ParamVector:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise LayoutError(f"{path}: not a parameter snapshot")
    (n_layers,) = struct.unpack('<I', raw[4:8])
    offset = 8 + 4 * n_layers
    sizes = struct.unpack(f'<{n_layers}I', raw[8:offset])
    layout = ParamLayout(sizes)
    expected = offset + 8 * layout.total
    if len(raw) != expected:
        raise LayoutError(f"{path}: expected {expected} bytes, found {len(raw)}")
    return ParamVector(layout, np.frombuffer(raw, dtype='<f8', offset=offset).astype(np.float64))
