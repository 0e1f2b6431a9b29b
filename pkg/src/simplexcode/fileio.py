"""File formats for the command-line tools.

Data CSV: no header, one data point per row, comma-separated floats written
with round-trip precision.  Labels CSV: one integer per row.  Codes: sparse
``row,col,value`` triplets under a single ``m,n,nnz`` header line.  Configs:
flat ``key = value`` text.
"""

import json
import math
import os

import numpy as np

__all__ = [
    "write_data_csv",
    "read_data_csv",
    "write_labels_csv",
    "read_labels_csv",
    "write_codes_csv",
    "read_codes_csv",
    "write_loss_history",
    "write_metrics",
    "read_metrics",
    "serialize_config",
    "parse_config",
    "write_config",
    "read_config",
    "write_timing_svg",
]


def write_data_csv(path, Y):
    """Write points (columns of Y) one per row; floats keep full precision."""
    Y = np.asarray(Y, dtype=np.float64)
    with open(path, "w") as fh:
        for i in range(Y.shape[1]):
            fh.write(",".join(repr(float(v)) for v in Y[:, i]))
            fh.write("\n")


def read_data_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64).T


def write_labels_csv(path, labels):
    with open(path, "w") as fh:
        for v in np.asarray(labels).ravel():
            fh.write(f"{int(v)}\n")


def read_labels_csv(path):
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(int(line))
    return np.asarray(out, dtype=np.int64)


def write_codes_csv(path, X):
    """Sparse triplet format with a single header line holding m,n,nnz."""
    X = np.asarray(X, dtype=np.float64)
    rows, cols = np.nonzero(X)
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]},{X.shape[1]},{rows.size}\n")
        for r, c in zip(rows, cols):
            fh.write(f"{int(r)},{int(c)},{float(X[r, c])!r}\n")


def read_codes_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            m, n, nnz = (int(v) for v in header.split(","))
        except ValueError as exc:
            raise ValueError(f"{path}: malformed codes header {header!r}") from exc
        X = np.zeros((m, n))
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r, c, v = line.split(",")
            X[int(r), int(c)] = float(v)
            count += 1
    if count != nnz:
        raise ValueError(f"{path}: header promised {nnz} entries, found {count}")
    return X


def write_loss_history(path, history):
    with open(path, "w") as fh:
        for v in history:
            fh.write(f"{float(v)!r}\n")


def write_metrics(path, metrics):
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_metrics(path):
    with open(path) as fh:
        return json.load(fh)


def serialize_config(config):
    """Flat ``key = value`` text; values are ints, floats, bools, or strings."""
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif value is None:
            text = "none"
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_config(text):
    """Inverse of serialize_config: parse(serialize(c)) == c for supported value types."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if value == "true":
            out[key] = True
        elif value == "false":
            out[key] = False
        elif value == "none":
            out[key] = None
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


def write_config(path, config):
    with open(path, "w") as fh:
        fh.write(serialize_config(config))


def read_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _svg_polyline(xs, ys, x_range, y_range, width, height, pad):
    x_lo, x_hi = x_range
    y_lo, y_hi = y_range
    span_x = (x_hi - x_lo) or 1.0
    span_y = (y_hi - y_lo) or 1.0
    pts = []
    for x, y in zip(xs, ys):
        px = pad + (x - x_lo) / span_x * (width - 2 * pad)
        py = height - pad - (y - y_lo) / span_y * (height - 2 * pad)
        pts.append(f"{px:.2f},{py:.2f}")
    return " ".join(pts)


def write_timing_svg(path, ns, series, loglog=False, title="timing"):
    """Minimal line plot of timing curves; presentation only, no numeric contract.

    ``series`` maps a label to a list of seconds aligned with ``ns``.
    """
    width, height, pad = 640, 420, 50
    xs = [math.log10(n) for n in ns] if loglog else list(map(float, ns))
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    all_ys = []
    for vals in series.values():
        all_ys.extend(math.log10(max(v, 1e-12)) if loglog else float(v) for v in vals)
    x_range = (min(xs), max(xs))
    y_range = (min(all_ys), max(all_ys)) if all_ys else (0.0, 1.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for i, (label, vals) in enumerate(series.items()):
        ys = [math.log10(max(v, 1e-12)) if loglog else float(v) for v in vals]
        pts = _svg_polyline(xs, ys, x_range, y_range, width, height, pad)
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{width - pad}" y="{pad + 18 * i}" text-anchor="end" '
            f'fill="{color}" font-size="13">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def default_output_root():
    return os.environ.get("SIMPLEXCODE_OUT", ".")
