"""Strong stable manifolds and the orbit-space torus.

The strong stable manifold of a contracting cocycle is traced outward from a
seed on the strong eigenline of the linear plateau at the origin by repeated
application of the inverse return map; backward iteration is transversally
self-correcting for the most-contracted direction, so chord-resampled
vertices converge onto the manifold.  Points of the punctured basin project
to the quotient torus through the chart anchored at the certified homothetic
fundamental annulus, where the return map is an exact log-radius translation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import return_product
from .geometry import TWO_PI, TorusChart, lp_from_xy, resample_polyline
from .linalg2 import eig2, opnorm
from .realization import _CocycleMapsBase

__all__ = [
    "TorusPoint",
    "TorusCurve",
    "WssTrace",
    "eval_fiber_inverse",
    "trace_wss",
    "project_to_torus",
    "project_curve",
    "curve_hausdorff",
    "meridians_from_trace",
    "parallel_curve",
    "crossing_count",
]

DEFAULT_SPACING = 1e-3          # max vertex spacing, relative to local radius
PROJECT_ITER_CAP = 10 ** 6      # return-map applications per projected point


@dataclass(frozen=True)
class TorusPoint:
    u: float
    v: float

    def reduced(self) -> "TorusPoint":
        return TorusPoint(self.u % 1.0, self.v % 1.0)


class TorusCurve:
    """Closed polyline on the flat torus, stored unwrapped.

    ``uv`` rows are consecutive vertices in R^2 lifting the curve; the final
    vertex differs from the first by the integer homology class
    (wraps_u, wraps_v).
    """

    def __init__(self, uv, tol=1e-7):
        uv = np.ascontiguousarray(np.asarray(uv, float))
        if uv.ndim != 2 or uv.shape[1] != 2 or uv.shape[0] < 3:
            raise ValueError("curve needs at least 3 uv rows")
        w = uv[-1] - uv[0]
        if np.max(np.abs(w - np.round(w))) > tol:
            raise ValueError("curve is not closed after mod-1 unwrapping")
        self.uv = uv
        self.homology = (int(np.round(w[0])), int(np.round(w[1])))

    @classmethod
    def from_points(cls, uv_raw, tol=1e-7):
        """Unwrap a sequence of mod-1 vertices by nearest-image continuation."""
        uv_raw = np.asarray(uv_raw, float)
        d = np.diff(uv_raw, axis=0)
        d -= np.round(d)
        uv = np.concatenate([uv_raw[:1], uv_raw[:1] + np.cumsum(d, axis=0)])
        return cls(uv, tol)

    def reduced(self):
        return np.mod(self.uv, 1.0)

    def resampled(self, max_spacing):
        return TorusCurve(resample_polyline(self.uv, max_spacing))

    def translated(self, du, dv):
        return TorusCurve(self.uv + np.array([du, dv]))

    def is_simple(self, samples=512) -> bool:
        """Brute segment-intersection scan on the flat torus."""
        uv = _decimate(self.resampled(max(polyline_span(self.uv) / samples, 1e-9)).uv,
                       samples + 1)
        return _self_intersections(uv) == 0


def polyline_span(uv):
    d = np.diff(uv, axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _segments_cross(p, q, a, b):
    """Proper crossing test for segment batches p->q against one segment a->b."""
    def orient(o, s, t):
        return (s[..., 0] - o[..., 0]) * (t[..., 1] - o[..., 1]) - (
            s[..., 1] - o[..., 1]) * (t[..., 0] - o[..., 0])

    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, np.broadcast_to(a, p.shape))
    d4 = orient(p, q, np.broadcast_to(b, p.shape))
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def _self_intersections(uv):
    n = uv.shape[0] - 1
    count = 0
    for i in range(n):
        a, b = uv[i], uv[i + 1]
        js = np.arange(i + 2, n)
        if i == 0:
            js = js[js != n - 1]
        if js.size == 0:
            continue
        p, q = uv[js], uv[js + 1]
        for su in (-1.0, 0.0, 1.0):
            for sv in (-1.0, 0.0, 1.0):
                s = np.array([su, sv])
                count += int(np.sum(_segments_cross(p + s, q + s, a, b)))
    return count


def parallel_curve(u: float, samples: int = 256) -> TorusCurve:
    vs = np.linspace(0.0, 1.0, samples + 1)
    return TorusCurve(np.column_stack([np.full(samples + 1, u), vs]))


def crossing_count(curve: TorusCurve, u_const: float) -> int:
    """Transversal crossings of the curve with the round parallel {u = c}."""
    s = curve.uv[:, 0] - u_const
    crossings = 0
    for d0, d1 in zip(s[:-1], s[1:]):
        lo, hi = min(d0, d1), max(d0, d1)
        crossings += int(np.floor(hi)) - int(np.floor(lo)) if hi != lo else 0
    return crossings


# ---------------------------------------------------------------------------
# fiber inverse and the strong stable manifold


def eval_fiber_inverse(cocycle: _CocycleMapsBase, i: int, y):
    """Solve f_i(x) = y (plane points); y = 0 maps to 0."""
    y = np.asarray(y, float)
    if y.ndim == 1 and np.all(y == 0.0):
        return np.zeros(2)
    return cocycle.fiber_inverse(i, y)


@dataclass
class WssTrace:
    """Strong-stable-manifold polyline per branch, as fundamental segments.

    ``branches[b]`` lists consecutive log-polar segments, innermost first;
    consecutive segments share an endpoint orbit, so their concatenation is
    the manifold piece from the seed to the trace extent.
    """

    branches: list
    seed_log_radius: float
    iterations: int
    spacing: float
    strong_eigenvalue: float

    def branch_polyline(self, b: int) -> np.ndarray:
        segs = self.branches[b]
        out = [segs[0]]
        for s in segs[1:]:
            out.append(s[1:])
        return np.concatenate(out, axis=0)


def trace_wss(cocycle: _CocycleMapsBase, seed_log_radius: float | None = None,
              extent: tuple[float, float] | None = None,
              spacing: float = DEFAULT_SPACING, max_returns: int = 200_000,
              keep_outside: bool = False) -> WssTrace:
    """Trace both branches of W^ss(0) outward through the extent annulus.

    ``extent`` is a (log_lo, log_hi) annulus; segments that do not meet it
    are kept coarsely unless ``keep_outside``.  The seed is a fundamental
    segment of the strong eigenline inside the linear plateau at the origin.
    """
    plateau_log, coc0 = cocycle.origin_data()
    m0 = return_product(coc0)
    l_big, l_small, kind = eig2(m0)
    if kind != "real-distinct":
        raise ValueError("origin return map has no unique strong eigendirection")
    if not (0.0 < l_small < abs(l_big) and abs(l_big) < 1.0):
        if l_small <= 0:
            raise ValueError("negative strong eigenvalue: branch tracing unsupported")
        raise ValueError("origin return map is not contracting")

    from .factory import _eigvec

    v_s = _eigvec(m0, l_small)
    step = -np.log(l_small)              # log-radius depth of one return

    if extent is None:
        chart = cocycle.chart()
        extent = (chart.anchor_log_r - chart.depth, chart.anchor_log_r)
    lo, hi = extent
    if seed_log_radius is None:
        if plateau_log is not None:
            seed_log_radius = plateau_log - 0.2 - step
        else:
            seed_log_radius = lo - 2.0 * step
    if plateau_log is not None and seed_log_radius > plateau_log - step:
        raise ValueError("seed segment does not fit inside the linear plateau")

    phi0 = float(np.arctan2(v_s[1], v_s[0]))
    branches = []
    iterations = 0
    for phi in (phi0, phi0 + np.pi):
        seed = np.stack([
            np.linspace(seed_log_radius - step, seed_log_radius, 33),
            np.full(33, phi),
        ], axis=-1)
        segs = [seed]
        cur = seed
        n_ret = 0
        while np.min(cur[:, 0]) <= hi:
            cur = cocycle.return_inv_lp(cur)
            coarse = np.max(cur[:, 0]) < lo - 0.5 and not keep_outside
            cur = resample_polyline(cur, spacing * (8.0 if coarse else 1.0))
            segs.append(cur)
            n_ret += 1
            if n_ret > max_returns:
                raise ArithmeticError("trace did not reach the extent annulus")
        branches.append(segs)
        iterations = max(iterations, n_ret)
    return WssTrace(branches, float(seed_log_radius), iterations, spacing,
                    float(l_small))


# ---------------------------------------------------------------------------
# projection to the orbit torus


def _project_lp(cocycle: _CocycleMapsBase, lp, max_iter=PROJECT_ITER_CAP):
    """First-hit torus coordinates of log-polar points (vectorized).

    Iterates the return map forward (or backward) until the log-radius lies
    in (anchor - depth, anchor]; raises if any orbit skips the annulus for
    max_iter returns.
    """
    chart = cocycle.chart()
    hi = chart.anchor_log_r
    lo = hi - chart.depth
    lp = np.atleast_2d(np.asarray(lp, float)).copy()
    settled = (lp[:, 0] > lo) & (lp[:, 0] <= hi)
    for _ in range(max_iter):
        if np.all(settled):
            break
        above = ~settled & (lp[:, 0] > hi)
        below = ~settled & (lp[:, 0] <= lo)
        if np.any(above):
            lp[above] = cocycle.return_lp(lp[above])
        if np.any(below):
            lp[below] = cocycle.return_inv_lp(lp[below])
        settled = (lp[:, 0] > lo) & (lp[:, 0] <= hi)
    if not np.all(settled):
        raise ArithmeticError(
            "orbit failed to enter the fundamental annulus within the iteration cap"
        )
    u = (hi - lp[:, 0]) / chart.depth
    v = lp[:, 1] / TWO_PI
    return np.stack([u % 1.0, v % 1.0], axis=-1)


def project_to_torus(cocycle: _CocycleMapsBase, p, max_iter=PROJECT_ITER_CAP) -> TorusPoint:
    """First-hit projection of a plane point of the punctured basin."""
    p = np.asarray(p, float)
    if p.ndim == 1 and np.all(p == 0.0):
        raise ValueError("the origin does not project to the orbit torus")
    lp = lp_from_xy(np.atleast_2d(p))
    uv = _project_lp(cocycle, lp, max_iter)
    return TorusPoint(float(uv[0, 0]), float(uv[0, 1]))


def project_curve(cocycle: _CocycleMapsBase, points, logpolar: bool = False,
                  max_iter=PROJECT_ITER_CAP) -> TorusCurve:
    """Project a closed plane polyline, unwrapping vertices consistently."""
    pts = np.asarray(points, float)
    lp = pts if logpolar else lp_from_xy(pts)
    uv = _project_lp(cocycle, lp, max_iter)
    return TorusCurve.from_points(uv)


def meridians_from_trace(trace: WssTrace, cocycle: _CocycleMapsBase,
                         slack: float = 0.25) -> list[TorusCurve]:
    """Meridians as first-hit projections of one fundamental trace segment.

    Picks, per branch, the outermost segment topping out at the chart anchor;
    its endpoints differ by one return, so the projection closes up with
    u-homology 1.  Vertices straddling the fundamental annulus are settled by
    the actual return dynamics, which keeps the projection exact for the
    quotient even when the segment wiggles past the annulus edges.
    """
    chart = cocycle.chart()
    hi = chart.anchor_log_r
    out = []
    for segs in trace.branches:
        pick = None
        for s in segs:
            if np.max(s[:, 0]) <= hi + slack * chart.depth:
                pick = s
        if pick is None:
            raise ValueError("no fundamental trace segment below the chart anchor")
        uv = _project_lp(cocycle, pick, max_iter=64)
        curve = TorusCurve.from_points(uv, tol=1e-6)
        if abs(curve.homology[0]) != 1:
            raise ArithmeticError("projected trace segment is not a meridian")
        if curve.homology[0] < 0:
            curve = TorusCurve(curve.uv[::-1], tol=1e-6)
        out.append(curve)
    return out


# ---------------------------------------------------------------------------
# flat-torus Hausdorff distance


def _point_segments_dist(pts, a, b):
    """Min distances pts (N,2) x segments a->b (M,2): result (N, M)."""
    ab = b - a
    denom = np.einsum("md,md->m", ab, ab)
    denom = np.where(denom == 0, 1.0, denom)
    ap = pts[:, None, :] - a[None]
    t = np.clip(np.einsum("nmd,md->nm", ap, ab) / denom, 0.0, 1.0)
    d = ap - t[..., None] * ab[None]
    return np.hypot(d[..., 0], d[..., 1])


_SHIFTS = np.array([(su, sv) for su in (-1.0, 0.0, 1.0) for sv in (-1.0, 0.0, 1.0)])


def _directed_hausdorff(pts, segs_uv):
    """sup over pts of inf distance to the segment collection with wrapping."""
    a0 = np.mod(segs_uv[:-1], 1.0)
    b0 = a0 + (segs_uv[1:] - segs_uv[:-1])
    a = (a0[:, None, :] + _SHIFTS[None]).reshape(-1, 2)
    b = (b0[:, None, :] + _SHIFTS[None]).reshape(-1, 2)
    best = np.full(pts.shape[0], np.inf)
    block = 4096
    for k in range(0, a.shape[0], block):
        best = np.minimum(best, _point_segments_dist(pts, a[k:k + block], b[k:k + block]).min(axis=1))
    return float(np.max(best))


def _decimate(uv, max_pts):
    n = uv.shape[0]
    if n <= max_pts:
        return uv
    idx = np.unique(np.round(np.linspace(0, n - 1, max_pts)).astype(int))
    return uv[idx]


def curve_hausdorff(a: TorusCurve, b: TorusCurve, resolution: int = 1024) -> float:
    """Symmetric Hausdorff distance in the flat torus metric.

    Both polylines are brought to about ``resolution`` vertices (inserting on
    sparse stretches, deterministically decimating dense ones), so the result
    carries a discretization error of the order of the chord sag at that
    spacing.
    """
    ar = _decimate(a.resampled(max(polyline_span(a.uv) / resolution, 1e-12)).uv, resolution + 1)
    br = _decimate(b.resampled(max(polyline_span(b.uv) / resolution, 1e-12)).uv, resolution + 1)
    pa = np.mod(ar[:-1], 1.0)
    pb = np.mod(br[:-1], 1.0)
    return max(_directed_hausdorff(pa, br), _directed_hausdorff(pb, ar))
