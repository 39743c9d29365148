"""Text formats for cocycles, paths, reparametrizations, kits and curves.

Files are line oriented and versioned.  Grammar (version 1):

    file      := "cocyclelab 1" NL block+
    block     := cocycle | path | theta | kit
    cocycle   := "cocycle n=<int>" NL row{n}
    row       := a11 a12 a21 a22            (whitespace-separated reals)
    path      := "path t=<t0>,<t1>,..." NL cocycle{len(t)}
    theta     := "theta k=<int> delta=<real>" NL ( log_r value ){k}
    kit       := "kit" NL "P l1 l2" NL "Q r" NL "T1 row" NL "T2 row"
                 [ NL "schedule l1 l2 l3 l4" ]

Blank lines and lines starting with '#' are ignored.  Curves travel as CSV
with a "u,v" header, one vertex per row, first row repeated at the end
(closed).  All numbers are written with repr-level precision so identical
runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io as _io

import numpy as np

from .cocycle import CocyclePath, LinearCocycle
from .factory import TransitionKit
from .manifold import TorusCurve
from .realization import Reparam

__all__ = [
    "FormatError",
    "dump_cocycle",
    "dump_path",
    "dump_theta",
    "dump_kit",
    "load_blocks",
    "load_cocycle",
    "load_path",
    "load_theta",
    "load_kit",
    "write_curve_csv",
    "read_curve_csv",
    "torus_svg",
]

HEADER = "cocyclelab 1"


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _cocycle_lines(c: LinearCocycle):
    out = [f"cocycle n={c.period}"]
    for m in c.mats:
        out.append(" ".join(_fmt(v) for v in m.ravel()))
    return out


def dump_cocycle(c: LinearCocycle) -> str:
    return "\n".join([HEADER] + _cocycle_lines(c)) + "\n"


def _path_lines(p: CocyclePath):
    out = [f"path t={','.join(_fmt(t) for t in p.nodes)}"]
    for k in range(len(p.nodes)):
        out.extend(_cocycle_lines(p.node_cocycle(k)))
    return out


def dump_path(p: CocyclePath) -> str:
    return "\n".join([HEADER] + _path_lines(p)) + "\n"


def dump_theta(theta: Reparam) -> str:
    out = [HEADER, f"theta k={theta.log_bp.size} delta={_fmt(theta.delta)}"]
    for lr, v in zip(theta.log_bp, theta.values):
        out.append(f"{_fmt(lr)} {_fmt(v)}")
    return "\n".join(out) + "\n"


def dump_kit(kit: TransitionKit, schedule=None) -> str:
    out = [
        HEADER,
        "kit",
        f"P {_fmt(kit.lambda1)} {_fmt(kit.lambda2)}",
        f"Q {_fmt(kit.r)}",
        "T1 " + " ".join(_fmt(v) for v in kit.T1.ravel()),
        "T2 " + " ".join(_fmt(v) for v in kit.T2.ravel()),
    ]
    if schedule is not None:
        l1, l2, l3, l4 = schedule
        out.append(f"schedule {l1} {l2} {l3} {l4}")
    return "\n".join(out) + "\n"


class _Lines:
    def __init__(self, text):
        self.rows = [l.strip() for l in text.splitlines()]
        self.rows = [l for l in self.rows if l and not l.startswith("#")]
        self.pos = 0

    def peek(self):
        return self.rows[self.pos] if self.pos < len(self.rows) else None

    def next(self):
        row = self.peek()
        if row is None:
            raise FormatError("unexpected end of file")
        self.pos += 1
        return row


def _parse_cocycle(lines: _Lines) -> LinearCocycle:
    head = lines.next()
    if not head.startswith("cocycle n="):
        raise FormatError(f"expected 'cocycle n=<int>', got {head!r}")
    try:
        n = int(head.split("=", 1)[1])
    except ValueError as e:
        raise FormatError(f"bad cocycle header {head!r}") from e
    mats = np.empty((n, 2, 2))
    for i in range(n):
        row = lines.next().split()
        if len(row) != 4:
            raise FormatError(f"cocycle row {i}: need 4 entries, got {len(row)}")
        try:
            mats[i] = np.array([float(v) for v in row]).reshape(2, 2)
        except ValueError as e:
            raise FormatError(f"cocycle row {i}: {e}") from e
    return LinearCocycle(mats)


def _parse_path(lines: _Lines) -> CocyclePath:
    head = lines.next()
    if not head.startswith("path t="):
        raise FormatError(f"expected 'path t=...', got {head!r}")
    try:
        nodes = np.array([float(v) for v in head.split("=", 1)[1].split(",")])
    except ValueError as e:
        raise FormatError(f"bad path header {head!r}") from e
    cocycles = [_parse_cocycle(lines) for _ in nodes]
    return CocyclePath.from_cocycles(nodes, cocycles)


def _parse_theta(lines: _Lines) -> Reparam:
    head = lines.next()
    if not head.startswith("theta "):
        raise FormatError(f"expected 'theta ...', got {head!r}")
    fields = dict(kv.split("=") for kv in head.split()[1:])
    k = int(fields["k"])
    delta = float(fields.get("delta", "0"))
    table = np.array([[float(v) for v in lines.next().split()] for _ in range(k)])
    return Reparam(table[:, 0], table[:, 1], delta)


def _parse_kit(lines: _Lines):
    head = lines.next()
    if head != "kit":
        raise FormatError(f"expected 'kit', got {head!r}")

    def need(tag, count):
        row = lines.next().split()
        if row[0] != tag or len(row) != count + 1:
            raise FormatError(f"expected '{tag}' with {count} entries")
        return [float(v) for v in row[1:]]

    l1, l2 = need("P", 2)
    (r,) = need("Q", 1)
    t1 = np.array(need("T1", 4)).reshape(2, 2)
    t2 = np.array(need("T2", 4)).reshape(2, 2)
    kit = TransitionKit(l1, l2, r, t1, t2)
    schedule = None
    nxt = lines.peek()
    if nxt is not None and nxt.startswith("schedule"):
        row = lines.next().split()
        if len(row) != 5:
            raise FormatError("schedule needs 4 integers")
        schedule = tuple(int(v) for v in row[1:])
    return kit, schedule


_PARSERS = {"cocycle": _parse_cocycle, "path": _parse_path,
            "theta": _parse_theta, "kit": _parse_kit}


def load_blocks(text: str):
    """Parse a versioned file into a list of (kind, value) blocks."""
    lines = _Lines(text)
    head = lines.next()
    if head != HEADER:
        raise FormatError(f"unsupported format header {head!r}")
    out = []
    while lines.peek() is not None:
        kind = lines.peek().split()[0].split("=")[0]
        if kind not in _PARSERS:
            raise FormatError(f"unknown block {lines.peek()!r}")
        out.append((kind, _PARSERS[kind](lines)))
    return out


def _load_one(text, kind):
    for k, v in load_blocks(text):
        if k == kind:
            return v
    raise FormatError(f"no {kind} block in file")


def load_cocycle(text: str) -> LinearCocycle:
    return _load_one(text, "cocycle")


def load_path(text: str) -> CocyclePath:
    return _load_one(text, "path")


def load_theta(text: str) -> Reparam:
    return _load_one(text, "theta")


def load_kit(text: str):
    return _load_one(text, "kit")


# ---------------------------------------------------------------------------
# curves: CSV and SVG


def write_curve_csv(curve: TorusCurve) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v"])
    for u, v in curve.uv:
        w.writerow([_fmt(u), _fmt(v)])
    return buf.getvalue()


def read_curve_csv(text: str) -> TorusCurve:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["u", "v"]:
        raise FormatError("curve CSV must start with a 'u,v' header")
    try:
        uv = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as e:
        raise FormatError(f"bad curve CSV row: {e}") from e
    return TorusCurve(uv, tol=1e-6)


_SVG_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def torus_svg(named_curves, size: int = 480) -> str:
    """Flat-torus picture of labeled curves (wrapped copies drawn as needed)."""
    s = size
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" '
        f'viewBox="0 0 {s} {s}">',
        f'<rect x="0" y="0" width="{s}" height="{s}" fill="white" stroke="black"/>',
    ]
    for k in range(1, 4):
        g = s * k / 4
        parts.append(f'<line x1="{g:.1f}" y1="0" x2="{g:.1f}" y2="{s}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<line x1="0" y1="{g:.1f}" x2="{s}" y2="{g:.1f}" '
                     'stroke="#dddddd" stroke-width="1"/>')
    for idx, (label, curve) in enumerate(named_curves):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        uv = curve.uv
        base = np.floor(np.min(uv, axis=0))
        for su in range(int(base[0]) - 1, int(np.max(uv[:, 0])) + 2):
            for sv in range(int(np.floor(np.min(uv[:, 1]))) - 1,
                            int(np.max(uv[:, 1])) + 2):
                pts = uv - np.array([su, sv])
                if np.all((pts[:, 0] < 0) | (pts[:, 0] > 1)) or np.all(
                        (pts[:, 1] < 0) | (pts[:, 1] > 1)):
                    continue
                d = " ".join(f"{x * s:.2f},{(1 - y) * s:.2f}" for x, y in pts)
                parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" '
                             'stroke-width="1.5"/>')
        parts.append(f'<text x="6" y="{14 + 14 * idx}" font-size="12" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
