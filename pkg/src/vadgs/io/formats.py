"""Readers and writers for PLY, PFM, PGM, PPM and raw index rasters.

PLY files are binary little-endian; PFM stores little-endian float32 with a
negative scale and rows bottom-up; missing depth is +inf. Index rasters are
an int32 (width, height) header followed by int32 rows, -1 for missing.
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import FormatError
from ..splatting import GaussianSet
from ..voxels import PointCloud

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
}
_PLY_NAMES = {"i1": "char", "u1": "uchar", "<i4": "int", "<f4": "float", "<f8": "double"}

_GAUSSIAN_FIELDS = [
    ("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
    ("scale_0", "<f8"), ("scale_1", "<f8"), ("scale_2", "<f8"),
    ("rot_0", "<f8"), ("rot_1", "<f8"), ("rot_2", "<f8"), ("rot_3", "<f8"),
    ("opacity", "<f8"), ("red", "<f8"), ("green", "<f8"), ("blue", "<f8"),
]


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def write_ply(path, fields: List[Tuple[str, str]], columns: Dict[str, np.ndarray]) -> None:
    path = Path(path)
    n = len(next(iter(columns.values()))) if columns else 0
    dtype = np.dtype(fields)
    records = np.zeros(n, dtype=dtype)
    for name, _ in fields:
        records[name] = columns[name]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property {_PLY_NAMES[kind]} {name}"
               for name, kind in fields]
    header.append("end_header")
    _ensure_parent(path)
    with open(path, "wb") as handle:
        handle.write(("\n".join(header) + "\n").encode("ascii"))
        handle.write(records.tobytes())


def read_ply(path) -> np.ndarray:
    """Vertex records of a binary little-endian PLY as a structured array"""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    marker = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or marker < 0:
        raise FormatError(f"{path} is not a PLY file")
    lines = data[:marker].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in lines:
        raise FormatError(f"{path}: only binary little-endian PLY is supported")
    count, fields, in_vertex = 0, [], False
    for line in lines:
        parts = line.split()
        if parts[:1] == ["element"]:
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
            elif int(parts[2]) > 0:
                raise FormatError(f"{path}: unsupported element '{parts[1]}'")
        elif parts[:1] == ["property"] and in_vertex:
            if parts[1] == "list" or parts[1] not in _PLY_TYPES:
                raise FormatError(f"{path}: unsupported property '{line}'")
            fields.append((parts[2], _PLY_TYPES[parts[1]]))
    dtype = np.dtype(fields)
    body = data[marker + len(b"end_header\n"):]
    if len(body) != count * dtype.itemsize:
        raise FormatError(f"{path}: expected {count} vertices of {dtype.itemsize} bytes, got {len(body)} bytes")
    return np.frombuffer(body, dtype=dtype, count=count)


def write_points_ply(path, cloud: PointCloud) -> None:
    fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("source_kind", "u1")]
    write_ply(path, fields, {"x": cloud.positions[:, 0], "y": cloud.positions[:, 1], "z": cloud.positions[:, 2],
                             "source_kind": cloud.kinds})


def read_points_ply(path, source_views: List[List[int]]) -> PointCloud:
    records = read_ply(path)
    for name in ("x", "y", "z", "source_kind"):
        if name not in records.dtype.names:
            raise FormatError(f"{path}: missing property '{name}'")
    if len(source_views) != len(records):
        raise FormatError(f"{path}: {len(records)} points but provenance for {len(source_views)}")
    positions = np.stack([records["x"], records["y"], records["z"]], axis=1).astype(np.float64)
    return PointCloud(positions, records["source_kind"].astype(np.uint8),
                      tuple(frozenset(int(v) for v in views) for views in source_views))


def write_gaussians_ply(path, gaussians: GaussianSet, with_instances: Optional[bool] = None) -> None:
    if with_instances is None:
        with_instances = bool(np.any(gaussians.instances != -1))
    columns = {
        "x": gaussians.means[:, 0], "y": gaussians.means[:, 1], "z": gaussians.means[:, 2],
        "opacity": gaussians.opacities,
        "red": gaussians.colors[:, 0], "green": gaussians.colors[:, 1], "blue": gaussians.colors[:, 2],
    }
    for axis in range(3):
        columns[f"scale_{axis}"] = gaussians.scales[:, axis]
    for axis in range(4):
        columns[f"rot_{axis}"] = gaussians.rotations[:, axis]
    fields = list(_GAUSSIAN_FIELDS)
    if with_instances:
        fields.append(("instance", "<i4"))
        columns["instance"] = gaussians.instances
    write_ply(path, fields, columns)


def read_gaussians_ply(path) -> GaussianSet:
    records = read_ply(path)
    names = records.dtype.names or ()
    missing = [name for name, _ in _GAUSSIAN_FIELDS if name not in names]
    if missing:
        raise FormatError(f"{path}: missing properties {missing}")

    def stack(*keys):
        return np.stack([records[k].astype(np.float64) for k in keys], axis=1)

    n = len(records)
    instances = records["instance"].astype(np.int64) if "instance" in names else np.full(n, -1, dtype=np.int64)
    return GaussianSet(
        means=stack("x", "y", "z").reshape(n, 3),
        scales=stack("scale_0", "scale_1", "scale_2").reshape(n, 3),
        rotations=stack("rot_0", "rot_1", "rot_2", "rot_3").reshape(n, 4),
        opacities=records["opacity"].astype(np.float64),
        colors=stack("red", "green", "blue").reshape(n, 3),
        instances=instances,
    )


def write_pfm(path, array: np.ndarray) -> None:
    array = np.asarray(array, dtype="<f4")
    if array.ndim == 3 and array.shape[2] == 3:
        kind = b"PF"
    elif array.ndim == 2:
        kind = b"Pf"
    else:
        raise FormatError(f"PFM holds (H, W) or (H, W, 3) arrays, got {array.shape}")
    height, width = array.shape[:2]
    path = Path(path)
    _ensure_parent(path)
    with open(path, "wb") as handle:
        handle.write(kind + b"\n" + f"{width} {height}\n".encode("ascii") + b"-1.0\n")
        handle.write(np.ascontiguousarray(array[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"PF", b"Pf"):
        raise FormatError(f"{path} is not a PFM file")
    channels = 3 if parts[0] == b"PF" else 1
    try:
        width, height = (int(x) for x in parts[1].split())
        scale = float(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PFM header") from exc
    dtype = "<f4" if scale < 0 else ">f4"
    expected = width * height * channels * 4
    if len(parts[3]) != expected:
        raise FormatError(f"{path}: expected {expected} bytes of samples, got {len(parts[3])}")
    array = np.frombuffer(parts[3], dtype=dtype).reshape((height, width, channels) if channels == 3 else (height, width))
    return array[::-1].astype(np.float32)


def _read_netpbm(path, magic: bytes) -> Tuple[np.ndarray, int, int, int]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    tokens, offset = [], 0
    while len(tokens) < 4:
        while offset < len(data) and data[offset:offset + 1].isspace():
            offset += 1
        if data[offset:offset + 1] == b"#":
            offset = data.index(b"\n", offset)
            continue
        end = offset
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == offset:
            raise FormatError(f"{path}: truncated header")
        tokens.append(data[offset:end])
        offset = end
    if tokens[0] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} image, found {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    return np.frombuffer(data, dtype=np.uint8, offset=offset + 1), width, height, maxval


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit (bool or uint8) or 16-bit (uint16) grayscale"""
    image = np.asarray(image)
    if image.dtype == bool:
        image = image.astype(np.uint8) * 255
    if image.dtype == np.uint16:
        maxval, payload = 65535, image.astype(">u2")
    elif image.dtype == np.uint8:
        maxval, payload = 255, image
    else:
        raise FormatError(f"PGM stores uint8 or uint16 rasters, got {image.dtype}")
    path = Path(path)
    _ensure_parent(path)
    height, width = image.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        handle.write(np.ascontiguousarray(payload).tobytes())


def read_pgm(path) -> np.ndarray:
    raw, width, height, maxval = _read_netpbm(path, b"P5")
    if maxval > 255:
        return np.frombuffer(raw.tobytes(), dtype=">u2", count=width * height).reshape(height, width).astype(np.uint16)
    return raw[:width * height].reshape(height, width).copy()


def write_ppm(path, image: np.ndarray) -> None:
    """RGB image; floats in [0, 1] are rounded to 8 bits"""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"PPM stores (H, W, 3) images, got {image.shape}")
    path = Path(path)
    _ensure_parent(path)
    height, width = image.shape[:2]
    with open(path, "wb") as handle:
        handle.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        handle.write(np.ascontiguousarray(image).tobytes())


def read_ppm(path) -> np.ndarray:
    raw, width, height, maxval = _read_netpbm(path, b"P6")
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM is supported")
    if len(raw) < width * height * 3:
        raise FormatError(f"{path}: truncated pixel data")
    return raw[:width * height * 3].reshape(height, width, 3).copy()


def to_float_image(image: np.ndarray) -> np.ndarray:
    return np.asarray(image, dtype=np.float64) / 255.0


def write_index(path, index: np.ndarray) -> None:
    index = np.asarray(index, dtype="<i4")
    path = Path(path)
    _ensure_parent(path)
    height, width = index.shape
    with open(path, "wb") as handle:
        handle.write(np.array([width, height], dtype="<i4").tobytes())
        handle.write(np.ascontiguousarray(index).tobytes())


def read_index(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(data) < 8:
        raise FormatError(f"{path}: missing index header")
    width, height = np.frombuffer(data[:8], dtype="<i4")
    if len(data) != 8 + 4 * int(width) * int(height):
        raise FormatError(f"{path}: size does not match {width}x{height}")
    return np.frombuffer(data[8:], dtype="<i4").reshape(int(height), int(width)).astype(np.int64)
