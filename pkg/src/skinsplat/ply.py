"""Minimal PLY reader/writer for point clouds.

Supports ascii and binary_little_endian files with scalar vertex properties,
which covers COLMAP exports and 3DGS-style attribute clouds. List properties
(face data) are skipped on read.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def read_ply(path: str | Path) -> dict[str, np.ndarray]:
    """Read the vertex element into a dict of per-property float64 arrays."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise ValueError(f"{path}: not a PLY file")
        fmt = None
        elements: list[tuple[str, int, list[tuple[str, str]]]] = []
        props: list[tuple[str, str]] = []
        while True:
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: unexpected end of header")
            tokens = line.decode("ascii").strip().split()
            if not tokens:
                continue
            if tokens[0] == "comment":
                continue
            if tokens[0] == "format":
                fmt = tokens[1]
            elif tokens[0] == "element":
                props = []
                elements.append((tokens[1], int(tokens[2]), props))
            elif tokens[0] == "property":
                if tokens[1] == "list":
                    props.append(("list", " ".join(tokens[2:])))
                else:
                    props.append((tokens[2], tokens[1]))
            elif tokens[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise ValueError(f"{path}: unsupported PLY format {fmt!r}")

        out: dict[str, np.ndarray] = {}
        for name, count, properties in elements:
            if any(p[0] == "list" for p in properties):
                _skip_list_element(f, fmt, count, properties)
                continue
            dtype = np.dtype([(pname, "<" + _DTYPES[ptype]) for pname, ptype in properties])
            if fmt == "ascii":
                rows = [f.readline().split() for _ in range(count)]
                table = np.array(
                    [tuple(row) for row in rows],
                    dtype=[(pname, "f8") for pname, _ in properties],
                )
            else:
                table = np.frombuffer(f.read(dtype.itemsize * count), dtype=dtype)
            if name == "vertex":
                for pname, _ in properties:
                    out[pname] = np.asarray(table[pname], dtype=np.float64)
        if not out:
            raise ValueError(f"{path}: no vertex element found")
        return out


def _skip_list_element(f, fmt, count, properties):
    if fmt == "ascii":
        for _ in range(count):
            f.readline()
        return
    for _ in range(count):
        for pname, ptype in properties:
            if pname == "list":
                count_type, item_type, _ = ptype.split(" ", 2)
                (n,) = np.frombuffer(
                    f.read(np.dtype(_DTYPES[count_type]).itemsize), dtype="<" + _DTYPES[count_type]
                )
                f.read(int(n) * np.dtype(_DTYPES[item_type]).itemsize)
            else:
                f.read(np.dtype(_DTYPES[ptype]).itemsize)


def read_point_cloud(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Positions (N, 3) plus RGB in [0, 1] when color properties exist."""
    data = read_ply(path)
    for key in ("x", "y", "z"):
        if key not in data:
            raise ValueError(f"{path}: vertex element lacks {key}")
    positions = np.stack([data["x"], data["y"], data["z"]], axis=1)
    colors = None
    if all(k in data for k in ("red", "green", "blue")):
        colors = np.stack([data["red"], data["green"], data["blue"]], axis=1) / 255.0
    return positions, colors


def write_ply(
    path: str | Path,
    properties: dict[str, np.ndarray],
    binary: bool = True,
    dtypes: dict[str, str] | None = None,
) -> None:
    """Write a vertex-only PLY from named per-point arrays (all length N)."""
    names = list(properties)
    n = len(properties[names[0]])
    dtypes = dtypes or {}
    kinds = {name: dtypes.get(name, "float") for name in names}

    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    for name in names:
        header.append(f"property {kinds[name]} {name}")
    header.append("end_header")

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            rec = np.zeros(n, dtype=[(name, "<" + _DTYPES[kinds[name]]) for name in names])
            for name in names:
                rec[name] = properties[name]
            f.write(rec.tobytes())
        else:
            cols = [np.asarray(properties[name]) for name in names]
            for i in range(n):
                f.write((" ".join(_fmt(col[i]) for col in cols) + "\n").encode("ascii"))


def _fmt(value) -> str:
    if np.issubdtype(np.asarray(value).dtype, np.integer):
        return str(int(value))
    return repr(float(value))
