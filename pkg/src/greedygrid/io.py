"""Point cloud files (PLY, XYZ text) and JSON result documents."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import PointCloudFormatError
from .geometry import RigidTransform, as_points

PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}  # fmt: skip

XYZ_SUFFIXES = {".xyz", ".txt", ".pts", ".csv"}


def read_point_cloud(path, unit_scale: float = 1.0) -> np.ndarray:
    """Read an ``(N, 3)`` cloud from PLY (ascii or binary little-endian) or XYZ text.

    Only vertex x/y/z are kept; other properties and elements are skipped.
    Coordinates are multiplied by ``unit_scale``.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic[:3] == b"ply":
        pts = _read_ply(path)
    elif path.suffix.lower() in XYZ_SUFFIXES:
        pts = _read_xyz(path)
    else:
        raise PointCloudFormatError(f"unrecognized point cloud format: {path}")
    pts = pts * unit_scale if unit_scale != 1.0 else pts
    return as_points(pts)


def _read_xyz(path: Path) -> np.ndarray:
    try:
        data = np.loadtxt(path, dtype=np.float64, ndmin=2, delimiter=None if path.suffix != ".csv" else ",")
    except ValueError as exc:
        raise PointCloudFormatError(f"malformed XYZ file {path}: {exc}") from None
    if data.shape[1] < 3:
        raise PointCloudFormatError(f"XYZ file {path} needs at least 3 columns, found {data.shape[1]}")
    return np.ascontiguousarray(data[:, :3])


def _parse_ply_header(raw: bytes):
    end = raw.find(b"end_header")
    if end < 0:
        raise PointCloudFormatError("PLY header has no end_header line", offset=len(raw))
    nl = raw.find(b"\n", end)
    if nl < 0:
        raise PointCloudFormatError("PLY header is not terminated by a newline", offset=end)
    body_offset = nl + 1
    lines = raw[:end].decode("ascii", errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PointCloudFormatError("missing 'ply' magic line", offset=0)

    fmt = None
    elements = []  # [name, count, [(prop, dtype) | (prop, (count_dtype, item_dtype))]]
    pos = 0
    for line in lines:
        tokens = line.split()
        line_offset = pos
        pos += len(line) + 1
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise PointCloudFormatError("malformed format line", offset=line_offset)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise PointCloudFormatError(f"malformed element line {line!r}", offset=line_offset)
            elements.append([tokens[1], int(tokens[2]), []])
        elif tokens[0] == "property":
            if not elements:
                raise PointCloudFormatError("property before any element", offset=line_offset)
            if len(tokens) == 5 and tokens[1] == "list":
                if tokens[2] not in PLY_TYPES or tokens[3] not in PLY_TYPES:
                    raise PointCloudFormatError(f"unknown list type in {line!r}", offset=line_offset)
                elements[-1][2].append((tokens[4], (PLY_TYPES[tokens[2]], PLY_TYPES[tokens[3]])))
            elif len(tokens) == 3 and tokens[1] in PLY_TYPES:
                elements[-1][2].append((tokens[2], PLY_TYPES[tokens[1]]))
            else:
                raise PointCloudFormatError(f"malformed property line {line!r}", offset=line_offset)
        else:
            raise PointCloudFormatError(f"unexpected header line {line!r}", offset=line_offset)
    if fmt is None:
        raise PointCloudFormatError("PLY header has no format line", offset=0)
    return fmt, elements, body_offset


def _read_ply(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    fmt, elements, offset = _parse_ply_header(raw)
    if fmt == "binary_big_endian":
        raise PointCloudFormatError("big-endian binary PLY is not supported")
    if fmt not in ("ascii", "binary_little_endian"):
        raise PointCloudFormatError(f"unknown PLY format {fmt!r}")
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise PointCloudFormatError("PLY file has no vertex element")
    vertex = elements[names.index("vertex")]
    props = [p for p, _ in vertex[2]]
    for axis in "xyz":
        if axis not in props:
            raise PointCloudFormatError(f"vertex element lacks property {axis!r}")
    if any(isinstance(t, tuple) for _, t in vertex[2]):
        raise PointCloudFormatError("list properties on vertices are not supported")
    if fmt == "ascii":
        return _read_ply_ascii(raw, offset, elements, names.index("vertex"))
    return _read_ply_binary(raw, offset, elements, names.index("vertex"))


def _read_ply_ascii(raw, offset, elements, vidx) -> np.ndarray:
    text = raw[offset:].decode("ascii", errors="replace").splitlines()
    text = [ln for ln in text if ln.strip()]
    start = sum(e[1] for e in elements[:vidx])
    name, count, props = elements[vidx]
    rows = text[start : start + count]
    if len(rows) < count:
        raise PointCloudFormatError(
            f"truncated PLY payload: expected {count} vertices, found {len(rows)}", offset=len(raw)
        )
    cols = [p for p, _ in props]
    ix = [cols.index(a) for a in "xyz"]
    try:
        data = np.array([[float(tok) for tok in r.split()] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise PointCloudFormatError(f"malformed ascii vertex data: {exc}") from None
    if data.ndim != 2 or data.shape[1] < len(cols):
        raise PointCloudFormatError("ascii vertex rows have too few values")
    return np.ascontiguousarray(data[:, ix])


def _read_ply_binary(raw, offset, elements, vidx) -> np.ndarray:
    pos = offset
    for name, count, props in elements[:vidx]:
        pos = _skip_binary_element(raw, pos, count, props)
    name, count, props = elements[vidx]
    dtype = np.dtype([(p, "<" + t) for p, t in props])
    need = dtype.itemsize * count
    if pos + need > len(raw):
        have = (len(raw) - pos) // dtype.itemsize
        raise PointCloudFormatError(
            f"truncated PLY payload: expected {count} vertices, found {have}", offset=len(raw)
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return np.column_stack([data[a].astype(np.float64) for a in "xyz"])


def _skip_binary_element(raw, pos, count, props) -> int:
    if not any(isinstance(t, tuple) for _, t in props):
        size = sum(np.dtype(t).itemsize for _, t in props) * count
        if pos + size > len(raw):
            raise PointCloudFormatError("truncated PLY payload", offset=len(raw))
        return pos + size
    for _ in range(count):
        for _, t in props:
            if isinstance(t, tuple):
                ct, it = np.dtype("<" + t[0]), np.dtype("<" + t[1])
                if pos + ct.itemsize > len(raw):
                    raise PointCloudFormatError("truncated PLY payload", offset=pos)
                n = int(np.frombuffer(raw, ct, 1, pos)[0])
                pos += ct.itemsize + n * it.itemsize
            else:
                pos += np.dtype(t).itemsize
    if pos > len(raw):
        raise PointCloudFormatError("truncated PLY payload", offset=len(raw))
    return pos


def write_point_cloud(path, points, binary: bool = True, dtype: str = "double") -> None:
    """Write a cloud as PLY. ``dtype`` is ``"double"`` (lossless) or ``"float"``."""
    pts = as_points(points, allow_empty=True)
    np_t = {"double": "<f8", "float": "<f4"}[dtype]
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        f"ply\nformat {fmt} 1.0\nelement vertex {len(pts)}\n"
        f"property {dtype} x\nproperty {dtype} y\nproperty {dtype} z\nend_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(np.ascontiguousarray(pts, dtype=np_t).tobytes())
        else:
            for p in pts.astype(np_t):
                fh.write((" ".join(repr(float(v)) for v in p) + "\n").encode("ascii"))


def matrix_to_list(T: RigidTransform | None):
    return None if T is None else [float(v) for v in T.as_matrix().reshape(-1)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def result_to_dict(result, config: dict | None = None) -> dict:
    diag = dict(result.diagnostics)
    timings = diag.pop("timings", {})
    return {
        "coarse": matrix_to_list(result.coarse),
        "refined": matrix_to_list(result.refined),
        "peak": {
            "rotation_index": result.peak.rotation_index,
            "cell": list(result.peak.cell),
            "score": result.peak.score,
        },
        "timings": _jsonable(timings),
        "diagnostics": _jsonable(diag),
        "config": _jsonable(config or {}),
    }


def write_result(result, path, config: dict | None = None) -> None:
    doc = result_to_dict(result, config)
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write result to {path}: {exc.strerror}") from exc


def read_result(path) -> dict:
    """Load a result JSON; ``coarse`` and ``refined`` become transforms (or ``None``)."""
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("coarse", "refined"):
        if doc.get(key) is not None:
            doc[key] = RigidTransform.from_matrix(doc[key])
    return doc


def write_json(path, doc) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)
