"""Plain-text field interchange format (QFLD v1).

Layout::

    # QFLD v1
    # nx = 256
    # ny = 256
    # x0 = -1.19034
    # x1 = 1.19034
    # y0 = -0.876
    # y1 = 0.876
    # eps = 0.16655
    # mode = mode1
    # lambda_re = 5.9998          (optional, together with lambda_im)
    # lambda_im = -0.007
    x,y,re,im
    -1.19034,-0.876,0,0
    ...                           (nx*ny rows, row-major: y slow, x fast)

Every float is written with 17 significant digits, which round-trips IEEE
doubles exactly.  On read, node weights and the retention mask are always
recomputed from the complex values — they are never trusted from the file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeMismatchError, VersionError
from .field_synth import ComplexField, GridSpec

FORMAT_TAG = "QFLD"
FORMAT_VERSION = 1
COLUMNS = "x,y,re,im"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field_file(fld: ComplexField, path) -> Path:
    """Serialize a field; returns the path written."""
    path = Path(path)
    g = fld.grid
    lines = [f"# {FORMAT_TAG} v{FORMAT_VERSION}"]
    lines.append(f"# nx = {g.nx}")
    lines.append(f"# ny = {g.ny}")
    for key, val in (("x0", g.x0), ("x1", g.x1), ("y0", g.y0), ("y1", g.y1)):
        lines.append(f"# {key} = {_fmt(val)}")
    if fld.eps is not None:
        lines.append(f"# eps = {_fmt(fld.eps)}")
    if fld.mode is not None:
        lines.append(f"# mode = {fld.mode}")
    if fld.lam is not None:
        lines.append(f"# lambda_re = {_fmt(fld.lam.real)}")
        lines.append(f"# lambda_im = {_fmt(fld.lam.imag)}")
    lines.append(COLUMNS)
    x, y = g.axes()
    vals = fld.values
    for iy in range(g.ny):
        ys = _fmt(y[iy])
        row = vals[iy]
        for ix in range(g.nx):
            v = row[ix]
            lines.append(f"{_fmt(x[ix])},{ys},{_fmt(v.real)},{_fmt(v.imag)}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


def _parse_header_line(text: str, lineno: int):
    body = text[1:].strip()
    if "=" not in body:
        return None, None
    key, _, value = body.partition("=")
    return key.strip(), value.strip()


def read_field_file(path) -> ComplexField:
    """Parse a QFLD file back into a field.

    Raises :class:`VersionError` for a missing/unsupported tag line,
    :class:`ShapeMismatchError` when the row count disagrees with the
    declared grid, and :class:`ParseError` (with line number) for anything
    malformed.
    """
    path = Path(path)
    header: dict[str, str] = {}
    values = None
    n_rows = 0
    expected = None
    tag_seen = False
    data_started = False

    with path.open("r", encoding="ascii") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line:
                continue
            if not tag_seen:
                parts = line.split()
                if line.startswith("#") and len(parts) == 3 \
                        and parts[1] == FORMAT_TAG:
                    if parts[2] != f"v{FORMAT_VERSION}":
                        raise VersionError(
                            f"{path}: unsupported {FORMAT_TAG} version "
                            f"{parts[2]!r} (supported: v{FORMAT_VERSION})"
                        )
                    tag_seen = True
                    continue
                raise VersionError(
                    f"{path}: first line must be '# {FORMAT_TAG} "
                    f"v{FORMAT_VERSION}', got {line!r}"
                )
            if line.startswith("#"):
                if data_started:
                    raise ParseError("header line after data began", lineno)
                key, value = _parse_header_line(line, lineno)
                if key is not None:
                    header[key] = value
                continue
            if not data_started:
                if line != COLUMNS:
                    raise ParseError(
                        f"expected column header {COLUMNS!r}, got {line!r}",
                        lineno,
                    )
                data_started = True
                try:
                    nx = int(header["nx"])
                    ny = int(header["ny"])
                except (KeyError, ValueError):
                    raise ParseError("missing or bad nx/ny header", lineno)
                expected = nx * ny
                values = np.empty(expected, dtype=np.complex128)
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 comma-separated fields, got {len(parts)}",
                    lineno,
                )
            if n_rows >= expected:
                raise ShapeMismatchError(
                    f"{path}: more than nx*ny = {expected} data rows"
                )
            try:
                re_part = float(parts[2])
                im_part = float(parts[3])
            except ValueError:
                raise ParseError(f"bad float in {line!r}", lineno)
            values[n_rows] = complex(re_part, im_part)
            n_rows += 1

    if not tag_seen:
        raise VersionError(f"{path}: empty file, no {FORMAT_TAG} tag")
    if not data_started:
        raise ShapeMismatchError(f"{path}: no data section")
    if n_rows != expected:
        raise ShapeMismatchError(
            f"{path}: {n_rows} data rows for nx*ny = {expected}"
        )

    try:
        grid = GridSpec(
            nx=int(header["nx"]), ny=int(header["ny"]),
            x0=float(header["x0"]), x1=float(header["x1"]),
            y0=float(header["y0"]), y1=float(header["y1"]),
        )
    except KeyError as exc:
        raise ParseError(f"missing grid header {exc}")
    except ValueError as exc:
        raise ParseError(f"bad grid header: {exc}")

    eps = float(header["eps"]) if "eps" in header else None
    mode = header.get("mode")
    lam = None
    if "lambda_re" in header and "lambda_im" in header:
        lam = complex(float(header["lambda_re"]), float(header["lambda_im"]))

    return ComplexField.from_values(
        grid, values.reshape(grid.ny, grid.nx), eps=eps, mode=mode, lam=lam
    )
