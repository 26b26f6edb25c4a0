"""Report emission: deterministic JSON/CSV, SVG charts, atomic output sets, run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import shutil
import sys
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np
import scipy


def manifest_name(command: str, mode: str | None = None) -> str:
    return f"run_manifest_{command}{'_' + mode if mode else ''}.json"


def _clean(obj):
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def json_bytes(obj) -> bytes:
    """Sorted keys, fixed indentation, non-finite floats as null."""
    return (json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def csv_bytes(columns: Sequence[str], rows: Iterable[Mapping]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue().encode()


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    from . import __version__
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "sozgnn": __version__}


class OutputSet:
    """Collects named outputs in memory and writes them only on ``commit``.

    Each file goes to a temp name first and is renamed into place, so a failed
    command leaves no partially written report behind.
    """

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.files: dict[str, bytes] = {}

    def add(self, name: str, data: bytes | str) -> None:
        self.files[name] = data.encode() if isinstance(data, str) else data

    def commit(self) -> dict[str, str]:
        self.directory.mkdir(parents=True, exist_ok=True)
        staged = []
        try:
            for name, data in self.files.items():
                tmp = self.directory / f".{name}.tmp-{os.getpid()}"
                tmp.write_bytes(data)
                staged.append((tmp, self.directory / name))
            for tmp, final in staged:
                os.replace(tmp, final)
        finally:
            for tmp, _ in staged:
                if tmp.exists():
                    tmp.unlink()
        return {name: hashlib.sha256(data).hexdigest() for name, data in self.files.items()}


def replace_dir(staging: Path, final: Path) -> None:
    """Move a fully written staging directory into place."""
    final = Path(final)
    if final.exists():
        trash = final.with_name(f".{final.name}.old-{os.getpid()}")
        os.replace(final, trash)
        os.replace(staging, final)
        shutil.rmtree(trash, ignore_errors=True)
    else:
        final.parent.mkdir(parents=True, exist_ok=True)
        os.replace(staging, final)


def staging_dir(final: str | os.PathLike) -> Path:
    final = Path(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = final.with_name(f".{final.name}.partial-{os.getpid()}")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    return tmp


def run_manifest(command: str, config_digest: str, config: dict, inputs: Mapping[str, str],
                 outputs: Mapping[str, str], wall_time_s: float) -> bytes:
    return json_bytes({
        "command": command,
        "config_sha256": config_digest,
        "config": config,
        "inputs": dict(inputs),
        "outputs": dict(outputs),
        "versions": versions(),
        "argv": sys.argv[1:],
        "wall_time_s": round(wall_time_s, 3),
    })


# -- SVG ------------------------------------------------------------------------

def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def svg_bar_chart(labels: Sequence[str], series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
                  title: str = "", y_label: str = "accuracy") -> str:
    """Grouped bars with std whiskers; ``series`` maps name -> (means, stds), y axis fixed to [0, 1]."""
    colors = ["#3b6ea5", "#d9822b", "#5a9e5a", "#a54b4b"]
    n, k = len(labels), len(series)
    left, right, top, bottom = 60, 20, 40, 70
    group_w = 30 * k + 30
    width = left + right + n * group_w
    height = 360
    plot_h = height - top - bottom

    def y(v):
        return top + plot_h * (1.0 - min(max(v, 0.0), 1.0))

    body = [f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
            f'<line x1="{left}" y1="{top + plot_h}" x2="{width - right}" y2="{top + plot_h}" stroke="black"/>',
            f'<text x="15" y="{top + plot_h / 2:.1f}" transform="rotate(-90 15 {top + plot_h / 2:.1f})" '
            f'text-anchor="middle">{escape(y_label)}</text>']
    for t in range(6):
        v = t / 5
        body.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
        body.append(f'<line x1="{left}" y1="{y(v):.1f}" x2="{width - right}" y2="{y(v):.1f}" stroke="#ddd"/>')
    for i, label in enumerate(labels):
        x0 = left + i * group_w + 15
        for j, (name, (means, stds)) in enumerate(series.items()):
            m, s = float(means[i]), float(stds[i])
            x = x0 + 30 * j
            body.append(f'<rect x="{x}" y="{y(m):.2f}" width="26" height="{y(0) - y(m):.2f}" '
                        f'fill="{colors[j % len(colors)]}"><title>{escape(name)} {escape(label)}: {m:.4f}</title></rect>')
            cx = x + 13
            body.append(f'<line x1="{cx}" y1="{y(m - s):.2f}" x2="{cx}" y2="{y(m + s):.2f}" stroke="black"/>')
        cx = x0 + 15 * k
        body.append(f'<text x="{cx:.1f}" y="{top + plot_h + 16}" text-anchor="middle">{escape(label)}</text>')
    for j, name in enumerate(series):
        lx = left + 10 + 120 * j
        body.append(f'<rect x="{lx}" y="{height - 24}" width="12" height="12" fill="{colors[j % len(colors)]}"/>')
        body.append(f'<text x="{lx + 16}" y="{height - 14}">{escape(name)}</text>')
    return _svg(width, height, body)


def svg_network(plv: np.ndarray, edges: np.ndarray, soz_mask: np.ndarray, nodes: Sequence[int],
                names: Sequence[str], title: str = "") -> str:
    """Circular layout of ``nodes``; only edges touching a SOZ node are drawn, width grows with PLV."""
    size, r = 420, 150
    cx = cy = size / 2
    nodes = list(nodes)
    pos = {v: (cx + r * math.cos(2 * math.pi * i / len(nodes) - math.pi / 2),
               cy + r * math.sin(2 * math.pi * i / len(nodes) - math.pi / 2)) for i, v in enumerate(nodes)}
    body = [f'<text x="{cx}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for a, b in np.asarray(edges, dtype=int).tolist():
        if a in pos and b in pos and (soz_mask[a] or soz_mask[b]):
            w = 1.0 + 6.0 * (plv[a, b] - 0.5) / 0.5
            (x1, y1), (x2, y2) = pos[a], pos[b]
            body.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="#555" '
                        f'stroke-opacity="0.7" stroke-width="{max(w, 0.5):.2f}"><title>{plv[a, b]:.3f}</title></line>')
    for v in nodes:
        x, yy = pos[v]
        fill = "#c0392b" if soz_mask[v] else "#7f8c8d"
        body.append(f'<circle cx="{x:.1f}" cy="{yy:.1f}" r="9" fill="{fill}" stroke="black"/>')
        body.append(f'<text x="{x:.1f}" y="{yy - 13:.1f}" text-anchor="middle">{escape(names[v])}</text>')
    return _svg(size, size, body)
