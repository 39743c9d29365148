"""Log-polar plane geometry and the orbit-torus chart.

Retarded cocycles push dynamics to radii like lambda^m with m in the
hundreds, far below the floating-point range, so every internal point is
carried as a log-polar pair (rho, phi) = (ln r, angle) with phi unwrapped
along curves.  Linear maps, radial cocycle maps and annulus flows all act
stably on this representation at any depth; the log-polar chart is conformal
(Jacobian e^rho R(phi)), which keeps Euclidean derivative computations exact
up to moderate ratio factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = ["TWO_PI", "lp_from_xy", "lp_to_xy", "apply_mat_lp", "apply_inv_lp",
           "TorusChart", "resample_polyline", "polyline_lengths"]


def lp_from_xy(xy):
    """(N, 2) plane points -> (N, 2) log-polar (rho, phi). Origin is rejected."""
    xy = np.asarray(xy, float)
    r = np.hypot(xy[..., 0], xy[..., 1])
    if np.any(r == 0):
        raise ValueError("origin has no log-polar representation")
    return np.stack([np.log(r), np.arctan2(xy[..., 1], xy[..., 0])], axis=-1)


def lp_to_xy(lp):
    """(N, 2) log-polar -> plane points. Overflows for |rho| beyond float range."""
    lp = np.asarray(lp, float)
    r = np.exp(lp[..., 0])
    return np.stack([r * np.cos(lp[..., 1]), r * np.sin(lp[..., 1])], axis=-1)


def _unit(phi):
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def apply_mat_lp(mats, lp):
    """Apply 2x2 matrices to log-polar points: depth enters only as a shift.

    ``mats`` is (2, 2) or (N, 2, 2); ``lp`` is (N, 2).  The angle increment
    is wrapped to (-pi, pi], which keeps phi continuous along dense polylines.
    """
    lp = np.asarray(lp, float)
    u = _unit(lp[..., 1])
    w = np.einsum("...ij,...j->...i", mats, u)
    nw = np.hypot(w[..., 0], w[..., 1])
    dphi = np.arctan2(w[..., 1], w[..., 0]) - lp[..., 1]
    dphi = (dphi + np.pi) % TWO_PI - np.pi
    return np.stack([lp[..., 0] + np.log(nw), lp[..., 1] + dphi], axis=-1)


def apply_inv_lp(mats, lp):
    """Apply matrix inverses without forming them at extreme scales."""
    from .linalg2 import inv2

    return apply_mat_lp(inv2(np.asarray(mats, float)), lp)


@dataclass(frozen=True)
class TorusChart:
    """Coordinates on the orbit torus anchored to a round fundamental annulus.

    A point at log-radius rho in the annulus [lambda * r_hat, r_hat) has
    u = (ln r_hat - rho) / ln(1/lambda) in [0, 1) and v = phi / 2pi mod 1.
    The return map acts as u -> u + 1 inside the homothetic region, so (u, v)
    descends to the quotient torus.
    """

    anchor_log_r: float     # ln r_hat
    lam: float              # homothety rate, 0 < lam < 1

    def __post_init__(self):
        if not (0.0 < self.lam < 1.0):
            raise ValueError("homothety rate must lie in (0, 1)")

    @property
    def depth(self) -> float:
        """Log-height of one fundamental annulus, ln(1/lambda)."""
        return -np.log(self.lam)

    def uv_from_lp(self, lp, reduce=True):
        """(u, v) coordinates of log-polar points; reduce mod 1 unless asked not to."""
        lp = np.asarray(lp, float)
        u = (self.anchor_log_r - lp[..., 0]) / self.depth
        v = lp[..., 1] / TWO_PI
        uv = np.stack([u, v], axis=-1)
        return np.mod(uv, 1.0) if reduce else uv

    def lp_from_uv(self, uv, sheet=0):
        """Log-polar representative on the given fundamental-annulus sheet."""
        uv = np.asarray(uv, float)
        rho = self.anchor_log_r - self.depth * (uv[..., 0] + sheet)
        return np.stack([rho, TWO_PI * uv[..., 1]], axis=-1)


def polyline_lengths(pts):
    """Chord lengths of a polyline, rows are points."""
    d = np.diff(np.asarray(pts, float), axis=0)
    return np.sqrt(np.sum(d * d, axis=-1))


def resample_polyline(pts, max_spacing):
    """Insert chord-interpolated points so every segment is <= max_spacing.

    Keeps all original vertices (no smoothing), so repeated resampling is
    stable.
    """
    pts = np.asarray(pts, float)
    if len(pts) < 2:
        return pts.copy()
    seg = polyline_lengths(pts)
    counts = np.maximum(1, np.ceil(seg / max_spacing).astype(int))
    if np.all(counts == 1):
        return pts.copy()
    pieces = []
    for i, c in enumerate(counts):
        frac = np.linspace(0.0, 1.0, c + 1)[:-1, None]
        pieces.append(pts[i] + frac * (pts[i + 1] - pts[i]))
    pieces.append(pts[-1:])
    return np.concatenate(pieces, axis=0)
