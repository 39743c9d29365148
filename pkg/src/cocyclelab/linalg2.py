"""Closed-form 2x2 linear algebra kernels.

Everything here is vectorized over leading axes: a "matrix" argument is an
ndarray of shape (..., 2, 2) and the result broadcasts accordingly.  All
quantities (operator norm, singular values, eigenvalues, polar factors) are
computed in closed form, never through an iterative LAPACK path, so they are
cheap on huge batches and bit-reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mat2",
    "rotation",
    "opnorm",
    "sigma_min",
    "det2",
    "tr2",
    "inv2",
    "matmul_chain",
    "eig2",
    "polar2",
    "sym_sqrt_factors",
]


def mat2(a11, a12, a21, a22):
    """Build a 2x2 matrix (or a batch) from entries."""
    return np.stack(
        [np.stack([np.asarray(a11, float), np.asarray(a12, float)], axis=-1),
         np.stack([np.asarray(a21, float), np.asarray(a22, float)], axis=-1)],
        axis=-2,
    )


def rotation(theta):
    """Rotation matrix R(theta), batched over theta."""
    c, s = np.cos(theta), np.sin(theta)
    return mat2(c, -s, s, c)


def _sv_parts(m):
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    e = 0.5 * (a * a + b * b + c * c + d * d)
    f = np.hypot(0.5 * (a * a + b * b - c * c - d * d), a * c + b * d)
    return e, f


def opnorm(m):
    """Largest singular value of a 2x2 matrix, closed form."""
    e, f = _sv_parts(m)
    return np.sqrt(e + f)


def sigma_min(m):
    """Smallest singular value, closed form (clamped at 0)."""
    e, f = _sv_parts(m)
    return np.sqrt(np.maximum(e - f, 0.0))


def det2(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def tr2(m):
    return m[..., 0, 0] + m[..., 1, 1]


def inv2(m):
    """Inverse of a 2x2 matrix (batch)."""
    d = det2(m)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / d[..., None, None]


def matmul_chain(mats):
    """Ordered product mats[k-1] @ ... @ mats[0] of an (k, 2, 2) stack."""
    mats = np.asarray(mats, float)
    out = np.eye(2)
    for m in mats:
        out = m @ out
    return out


def eig2(m, double_tol=None):
    """Eigenvalues of a 2x2 matrix as roots of x^2 - tr x + det.

    Returns ``(lam1, lam2, kind)`` where kind is one of ``"real-distinct"``,
    ``"real-double"``, ``"complex"``.  For real spectra the pair is sorted by
    modulus, largest first; for complex spectra the conjugate pair is
    returned.  Scalar input only (batch callers use the trace/det formulas
    directly).
    """
    m = np.asarray(m, float)
    t, d = float(tr2(m)), float(det2(m))
    disc = t * t - 4.0 * d
    scale = t * t + 4.0 * abs(d)
    if double_tol is None:
        double_tol = 64.0 * np.finfo(float).eps * max(scale, 1e-300)
    if disc > double_tol:
        s = np.sqrt(disc)
        r1, r2 = 0.5 * (t + s), 0.5 * (t - s)
        if abs(r2) > abs(r1):
            r1, r2 = r2, r1
        return r1, r2, "real-distinct"
    if disc < -double_tol:
        s = np.sqrt(-disc)
        return complex(0.5 * t, 0.5 * s), complex(0.5 * t, -0.5 * s), "complex"
    return 0.5 * t, 0.5 * t, "real-double"


def sym_sqrt_factors(m):
    """Eigen-factorization V, (s1, s2) of the symmetric part sqrt(M^T M).

    M must be invertible.  Returns an orthogonal V and singular values so
    that sqrt(M^T M) = V diag(s) V^T.
    """
    m = np.asarray(m, float)
    g = m.T @ m
    # symmetric 2x2 eigendecomposition, closed form
    a, b, c = g[0, 0], g[0, 1], g[1, 1]
    half = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    e1, e2 = half + rad, half - rad
    if abs(b) > 1e-300 * max(abs(a), abs(c), 1.0):
        v1 = np.array([e1 - c, b])
    else:
        v1 = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
    v1 = v1 / np.hypot(*v1)
    v2 = np.array([-v1[1], v1[0]])
    v = np.column_stack([v1, v2])
    return v, np.sqrt(np.maximum([e1, e2], 0.0))


def polar2(m):
    """Polar decomposition M = R(angle) @ S with S symmetric positive.

    Only defined for det(M) > 0.  Returns ``(angle, V, s)`` with
    S = V diag(s) V^T.
    """
    m = np.asarray(m, float)
    if det2(m) <= 0:
        raise ValueError("polar2 requires det > 0")
    v, s = sym_sqrt_factors(m)
    sym = v @ np.diag(s) @ v.T
    r = m @ inv2(sym)
    angle = np.arctan2(r[1, 0], r[0, 0])
    return float(angle), v, s
