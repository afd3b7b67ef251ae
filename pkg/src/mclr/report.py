"""CSV input/output and the SVG power chart."""

import csv
import io
import re

import numpy as np

from . import __version__
from .statistics import IVData

SVG_WIDTH, SVG_HEIGHT = 800, 600
_COLUMN = re.compile(r"^(y|y2_(\d+)|z_(\d+)|w_(\d+))$")


class InputError(ValueError):
    """Malformed input file; the message names the offending line."""


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [(i + 1, row) for i, row in enumerate(csv.reader(fh))]
    except OSError as exc:
        raise InputError(f"{path}: cannot read file ({exc.strerror}).") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: file is not valid UTF-8.") from exc
    return [(i, row) for i, row in lines if row and not row[0].lstrip().startswith("#")]


def _to_float(value, path, line, col):
    try:
        x = float(value)
    except ValueError:
        raise InputError(f"{path}:{line}: column {col!r} is not a number: {value!r}.") from None
    if not np.isfinite(x):
        raise InputError(f"{path}:{line}: column {col!r} is not finite: {value!r}.")
    return x


def read_iv_csv(path):
    """
    Read a sample with columns ``y``, ``y2_1..y2_l``, ``z_1..z_k`` and optional ``w_1..w_p``.

    Column order is free; indices within each block must run from 1 without gaps.
    """
    rows = _read_rows(path)
    if not rows:
        raise InputError(f"{path}: file has no header row.")
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    blocks = {"y": [], "y2": {}, "z": {}, "w": {}}
    for j, name in enumerate(header):
        m = _COLUMN.match(name)
        if m is None:
            raise InputError(f"{path}:{header_line}: unknown column {name!r}.")
        if name == "y":
            blocks["y"].append(j)
            continue
        prefix, idx = name.rsplit("_", 1)
        if int(idx) in blocks[prefix]:
            raise InputError(f"{path}:{header_line}: duplicate column {name!r}.")
        blocks[prefix][int(idx)] = j
    if len(blocks["y"]) != 1:
        raise InputError(f"{path}:{header_line}: exactly one 'y' column is required.")
    order = {}
    for prefix in ("y2", "z", "w"):
        idx = sorted(blocks[prefix])
        if idx != list(range(1, len(idx) + 1)):
            raise InputError(f"{path}:{header_line}: {prefix}_ columns must be numbered 1..m without gaps.")
        order[prefix] = [blocks[prefix][i] for i in idx]
    if not order["y2"]:
        raise InputError(f"{path}:{header_line}: at least one y2_ column is required.")
    if not order["z"]:
        raise InputError(f"{path}:{header_line}: at least one z_ column is required.")
    values = np.empty((len(rows) - 1, len(header)))
    for r, (line, row) in enumerate(rows[1:]):
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}.")
        for j, v in enumerate(row):
            values[r, j] = _to_float(v.strip(), path, line, header[j])
    return IVData(
        y1=values[:, blocks["y"][0]],
        Y2=values[:, order["y2"]],
        Z=values[:, order["z"]],
        W=values[:, order["w"]] if order["w"] else None,
    )


def read_matrix_csv(path):
    """Headerless numeric matrix, one row per line."""
    rows = _read_rows(path)
    if not rows:
        raise InputError(f"{path}: empty matrix file.")
    width = len(rows[0][1])
    out = []
    for line, row in rows:
        if len(row) != width:
            raise InputError(f"{path}:{line}: expected {width} fields, found {len(row)}.")
        out.append([_to_float(v.strip(), path, line, j + 1) for j, v in enumerate(row)])
    return np.array(out)


def fmt(x):
    """Stable text form of a float used in every output file."""
    return format(float(x), ".10g")


def provenance(command, **fields):
    lines = [f"# mclr {__version__}", f"# command: {command}"]
    lines += [f"# {key}: {value}" for key, value in fields.items()]
    return "\n".join(lines) + "\n"


def csv_text(header_comment, columns, rows):
    buf = io.StringIO()
    buf.write(header_comment)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def power_svg(curve, path, title=None):
    """Static 800x600 line chart of rejection rate against delta."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # the SVG backend works in points (72 per inch); size the canvas so that
    # one point is one pixel of the 800x600 chart
    with matplotlib.rc_context({"svg.hashsalt": "mclr", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(SVG_WIDTH / 72.0, SVG_HEIGHT / 72.0), dpi=72)
        for name, rates in curve.rates.items():
            ax.plot(curve.delta_grid, rates, marker="o", markersize=3, label=name.upper())
        ax.axhline(0.05, color="grey", linewidth=0.8, linestyle=":")
        ax.set_xlabel("Δ")
        ax.set_ylabel("rejection rate")
        ax.set_ylim(0.0, 1.0)
        if title:
            ax.set_title(title)
        ax.legend(loc="lower right")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    text = buf.getvalue().replace(
        f'width="{SVG_WIDTH}pt" height="{SVG_HEIGHT}pt"', f'width="{SVG_WIDTH}" height="{SVG_HEIGHT}"', 1
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
