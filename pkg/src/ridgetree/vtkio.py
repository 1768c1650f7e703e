"""Legacy-VTK structured-points reader/writer for density volumes.

Supports the simple legacy format only: DATASET STRUCTURED_POINTS with one
SCALARS array under POINT_DATA, in ASCII or binary (big-endian) encoding.
Scalars are converted to float32 on read regardless of the stored type.
"""

from __future__ import annotations

import numpy as np

from .grid import DensityField, GridGeometry

__all__ = ["VtkParseError", "read_vtk", "write_vtk"]

_VTK_DTYPES = {
    "bit": None,
    "unsigned_char": np.uint8,
    "char": np.int8,
    "unsigned_short": np.uint16,
    "short": np.int16,
    "unsigned_int": np.uint32,
    "int": np.int32,
    "unsigned_long": np.uint64,
    "long": np.int64,
    "float": np.float32,
    "double": np.float64,
}


class VtkParseError(ValueError):
    """Malformed legacy VTK input; carries the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _tokens(text: bytes, lineno: int) -> list[str]:
    return text.decode("ascii", errors="replace").split()


def read_vtk(path) -> DensityField:
    """Read a legacy structured-points file into a DensityField.

    Scalars are converted to float32; any negative values (possible in
    float/signed-int sources) are clamped to zero to satisfy the density
    invariant.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    lines = data.split(b"\n")
    pos = 0  # byte offset just past the consumed lines

    def next_line(required: str) -> tuple[list[str], int]:
        nonlocal pos, lineno
        while True:
            if lineno >= len(lines):
                raise VtkParseError(f"unexpected end of file, expected {required}", lineno)
            raw = lines[lineno]
            lineno += 1
            pos += len(raw) + 1
            toks = _tokens(raw, lineno)
            if toks:
                return toks, lineno

    lineno = 0
    header, at = next_line("version header")
    if not (header[0].startswith("#") and "vtk" in [t.lower() for t in header]):
        raise VtkParseError("missing '# vtk DataFile' header", at)
    next_line("title")
    fmt, at = next_line("ASCII or BINARY")
    encoding = fmt[0].upper()
    if encoding not in ("ASCII", "BINARY"):
        raise VtkParseError(f"unknown encoding {fmt[0]!r}", at)
    dataset, at = next_line("DATASET")
    if dataset[0].upper() != "DATASET" or len(dataset) < 2:
        raise VtkParseError("expected DATASET line", at)
    if dataset[1].upper() != "STRUCTURED_POINTS":
        raise VtkParseError(f"unsupported dataset type {dataset[1]!r}", at)

    dims = spacing = origin = None
    npoints = None
    while True:
        toks, at = next_line("POINT_DATA")
        key = toks[0].upper()
        if key == "DIMENSIONS":
            if len(toks) != 4:
                raise VtkParseError("DIMENSIONS needs three integers", at)
            dims = tuple(int(t) for t in toks[1:4])
        elif key in ("SPACING", "ASPECT_RATIO"):
            spacing = tuple(float(t) for t in toks[1:4])
        elif key == "ORIGIN":
            origin = tuple(float(t) for t in toks[1:4])
        elif key == "POINT_DATA":
            if len(toks) != 2:
                raise VtkParseError("POINT_DATA needs a count", at)
            npoints = int(toks[1])
            break
        elif key == "CELL_DATA":
            raise VtkParseError("CELL_DATA is not supported, expected POINT_DATA", at)
        else:
            raise VtkParseError(f"unexpected keyword {toks[0]!r}", at)

    if dims is None:
        raise VtkParseError("missing DIMENSIONS before POINT_DATA", at)
    if any(d < 1 for d in dims):
        raise VtkParseError(f"non-positive DIMENSIONS {dims}", at)
    spacing = spacing or (1.0, 1.0, 1.0)
    origin = origin or (0.0, 0.0, 0.0)
    nexpect = dims[0] * dims[1] * dims[2]
    if npoints != nexpect:
        raise VtkParseError(
            f"POINT_DATA count {npoints} != nx*ny*nz = {nexpect}", at
        )

    scalars, at = next_line("SCALARS")
    if scalars[0].upper() != "SCALARS" or len(scalars) < 3:
        raise VtkParseError("expected 'SCALARS name type [components]'", at)
    dtype = _VTK_DTYPES.get(scalars[2].lower())
    if dtype is None:
        raise VtkParseError(f"unsupported scalar type {scalars[2]!r}", at)
    ncomp = int(scalars[3]) if len(scalars) > 3 else 1
    if ncomp != 1:
        raise VtkParseError(f"only 1-component scalars supported, got {ncomp}", at)

    lut, at = next_line("LOOKUP_TABLE")
    if lut[0].upper() != "LOOKUP_TABLE":
        raise VtkParseError("expected LOOKUP_TABLE line", at)

    if encoding == "ASCII":
        toks = b"\n".join(lines[lineno:]).split()
        if len(toks) < npoints:
            raise VtkParseError(f"expected {npoints} scalars, found {len(toks)}", at)
        values = np.array(toks[:npoints], dtype=np.float64)
    else:
        raw = data[pos:]
        itemsize = np.dtype(dtype).itemsize
        need = npoints * itemsize
        if len(raw) < need:
            raise VtkParseError(
                f"binary payload has {len(raw)} bytes, expected {need}", at
            )
        values = np.frombuffer(raw[:need], dtype=np.dtype(dtype).newbyteorder(">"))

    field_values = np.asarray(values, dtype=np.float32)
    if field_values.min(initial=0.0) < 0:
        field_values = np.maximum(field_values, 0.0)
    return DensityField(GridGeometry(dims, spacing, origin), field_values)


def write_vtk(
    field: DensityField, path, binary: bool = True, title: str = "density volume"
) -> None:
    """Write a DensityField as legacy structured points (float32 scalars).

    Binary payloads are big-endian per the legacy convention; ASCII output
    uses 9 significant digits, enough to round-trip float32 exactly.
    """
    nx, ny, nz = field.dims
    header = [
        "# vtk DataFile Version 3.0",
        title.splitlines()[0] if title else "volume",
        "BINARY" if binary else "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        "SPACING {:.17g} {:.17g} {:.17g}".format(*field.spacing),
        "ORIGIN {:.17g} {:.17g} {:.17g}".format(*field.origin),
        f"POINT_DATA {nx * ny * nz}",
        "SCALARS density float 1",
        "LOOKUP_TABLE default",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(field.values.astype(">f4").tobytes())
            fh.write(b"\n")
        else:
            vals = [np.format_float_positional(v, precision=9, trim="-", fractional=False)
                    for v in field.values]
            for start in range(0, len(vals), 9):
                fh.write((" ".join(vals[start : start + 9]) + "\n").encode("ascii"))
