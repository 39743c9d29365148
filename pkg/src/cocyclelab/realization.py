"""Radial realization of cocycle paths as diffeomorphism cocycles.

The fiber maps are f_i(x) = A_{i, theta(|x|)} x where theta traverses a
cocycle path at controlled speed in log-radius: the parameter advances
proportionally to arc length per unit of ln r, so the one-step derivative
deviation ||Df_i(x) - A_{i, theta(|x|)}|| is bounded by the traversal speed
everywhere.  Everything evaluates stably on log-polar points; the analytic
Jacobian is

    Df_i(x) = A + slope(ln r) * (dA/dt @ u) (x) u^T,   u = x/|x|,

with slope = d theta / d ln r taken one-sided from below at table breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import CocyclePath, LinearCocycle
from .geometry import apply_mat_lp, lp_from_xy, lp_to_xy, TorusChart
from .linalg2 import inv2, opnorm, tr2

__all__ = [
    "Reparam",
    "build_reparam",
    "RadialCocycle",
    "LinearCocycleMaps",
    "GridSpec",
    "RealizationCertificate",
    "certify_realization",
    "eval_fiber_map",
    "eval_fiber_derivative",
    "jacobian_fd_check",
]

MIN_RADIAL_BREAKPOINTS = 256


def _fiber_interp(path: CocyclePath, i: int, t):
    """Interpolated matrices of one fiber at parameters t: (N, 2, 2)."""
    t = np.asarray(t, float)
    if len(path.nodes) == 1:
        return np.broadcast_to(path.mats[0, i], t.shape + (2, 2)).copy()
    j = np.clip(np.searchsorted(path.nodes, t, side="right") - 1, 0, len(path.nodes) - 2)
    t0, t1 = path.nodes[j], path.nodes[j + 1]
    frac = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    a, b = path.mats[j, i], path.mats[j + 1, i]
    return a + frac[..., None, None] * (b - a)


def _fiber_dinterp(path: CocyclePath, i: int, t):
    """One-sided-below derivative of one fiber's interpolation: (N, 2, 2)."""
    t = np.asarray(t, float)
    if len(path.nodes) == 1:
        return np.zeros(t.shape + (2, 2))
    j = np.clip(np.searchsorted(path.nodes, t, side="left") - 1, 0, len(path.nodes) - 2)
    dt = (path.nodes[j + 1] - path.nodes[j])[..., None, None]
    return (path.mats[j + 1, i] - path.mats[j, i]) / dt


def _gather_interp(path: CocyclePath, fibers, t):
    """Per-point fiber interpolation: mats (N, 2, 2) plus the same for dA/dt."""
    t = np.asarray(t, float)
    fibers = np.asarray(fibers, int)
    if len(path.nodes) == 1:
        return path.mats[0, fibers], np.zeros(t.shape + (2, 2))
    j = np.clip(np.searchsorted(path.nodes, t, side="right") - 1, 0, len(path.nodes) - 2)
    t0, t1 = path.nodes[j], path.nodes[j + 1]
    frac = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    a = path.mats[j, fibers]
    b = path.mats[j + 1, fibers]
    jd = np.clip(np.searchsorted(path.nodes, t, side="left") - 1, 0, len(path.nodes) - 2)
    da = (path.mats[jd + 1, fibers] - path.mats[jd, fibers]) / (
        path.nodes[jd + 1] - path.nodes[jd])[..., None, None]
    return a + frac[..., None, None] * (b - a), da


@dataclass(frozen=True)
class Reparam:
    """Monotone piecewise-linear map from log-radius to path parameter.

    Constant below ``log_bp[0]`` (inner plateau) and above ``log_bp[-1]``
    (outer plateau).  ``delta`` is the certified bound on the traversal
    speed: arc-length advance per unit log-radius never exceeds it.
    Breakpoints are stored in log-radius only; the inner plateau may sit far
    below the floating-point radius range.
    """

    log_bp: np.ndarray
    values: np.ndarray
    delta: float
    shrunk: bool = False

    def __post_init__(self):
        bp = np.ascontiguousarray(np.asarray(self.log_bp, float))
        vals = np.ascontiguousarray(np.asarray(self.values, float))
        if bp.ndim != 1 or bp.shape != vals.shape or bp.size < 2:
            raise ValueError("breakpoint and value tables must match, size >= 2")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("log-radius breakpoints must be strictly increasing")
        d = np.diff(vals)
        if np.any(d < 0) and np.any(d > 0):
            raise ValueError("reparametrization must be monotone")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "log_bp", bp)
        object.__setattr__(self, "values", vals)

    @property
    def inner_log(self) -> float:
        return float(self.log_bp[0])

    @property
    def outer_log(self) -> float:
        return float(self.log_bp[-1])

    @property
    def inner_radius(self) -> float:
        return float(np.exp(self.inner_log))

    @property
    def outer_radius(self) -> float:
        return float(np.exp(self.outer_log))

    def value(self, log_r):
        return np.interp(np.asarray(log_r, float), self.log_bp, self.values)

    def slope(self, log_r):
        """d value / d log-radius, one-sided from below at breakpoints."""
        rho = np.asarray(log_r, float)
        j = np.clip(np.searchsorted(self.log_bp, rho, side="left") - 1,
                    0, self.log_bp.size - 2)
        s = (self.values[j + 1] - self.values[j]) / (self.log_bp[j + 1] - self.log_bp[j])
        return np.where((rho <= self.log_bp[0]) | (rho > self.log_bp[-1]), 0.0, s)


def _refine_table(log_bp, vals, min_points=MIN_RADIAL_BREAKPOINTS):
    """Subdivide PL segments uniformly until the table has min_points rows."""
    while log_bp.size < min_points:
        mid_b = 0.5 * (log_bp[:-1] + log_bp[1:])
        mid_v = 0.5 * (vals[:-1] + vals[1:])
        log_bp = np.insert(log_bp, np.arange(1, log_bp.size), mid_b)
        vals = np.insert(vals, np.arange(1, vals.size), mid_v)
    return log_bp, vals


def _arc_spaced_table(nodes, seg_arcs, rho_lo, rho_hi):
    """Breakpoints spanning [rho_lo, rho_hi] with width proportional to arc.

    Zero-length segments get a small positive width floor, which only makes
    the traversal slower there.
    """
    total = float(np.sum(seg_arcs))
    floor = max(total, 1.0) * 1e-9
    w = np.maximum(np.asarray(seg_arcs, float), floor)
    cum = np.concatenate([[0.0], np.cumsum(w)])
    log_bp = rho_lo + (rho_hi - rho_lo) * cum / cum[-1]
    return log_bp, np.asarray(nodes, float)


def build_reparam(path: CocyclePath, delta: float, inner_radius: float,
                  outer_radius: float) -> Reparam:
    """Constant-arc-speed traversal of ``path`` in log-radius.

    The inner plateau maps to the start of the path and the outer plateau to
    its end; in between the arc-length position is affine in ln r, so the
    composed family moves at speed V/t with V = L / ln(outer/inner) <= delta.
    If the requested annulus is too shallow the inner radius is shrunk
    automatically (``shrunk`` flag set).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not (0.0 < inner_radius < outer_radius):
        raise ValueError("need 0 < inner_radius < outer_radius")
    if len(path.nodes) == 1:
        seg, arc = None, 0.0
    else:
        seg = np.max(opnorm(path.mats[1:] - path.mats[:-1]), axis=1)
        arc = float(np.sum(seg))
    if arc == 0.0:
        # degenerate path: a single plateau, any radii accepted
        log_bp = np.array([np.log(inner_radius), np.log(outer_radius)])
        vals = np.array([path.t_hi, path.t_hi])
        bp, vv = _refine_table(log_bp, vals)
        return Reparam(bp, vv, float(delta))
    rho_out = np.log(outer_radius)
    rho_in = np.log(inner_radius)
    shrunk = False
    if arc > 0 and rho_out - rho_in < arc / delta:
        rho_in = rho_out - (arc / delta) * (1.0 + 1e-9)
        shrunk = True
    log_bp, vals = _arc_spaced_table(path.nodes, seg, rho_in, rho_out)
    log_bp, vals = _refine_table(log_bp, vals)
    return Reparam(log_bp, vals, float(delta), shrunk)


class _CocycleMapsBase:
    """Shared return-map plumbing for diffeomorphism cocycles on log-polar points."""

    @property
    def period(self) -> int:
        raise NotImplementedError

    def fiber_lp(self, i, lp):
        raise NotImplementedError

    def fiber_inv_lp(self, i, lp):
        raise NotImplementedError

    def fiber_jac_lp(self, i, lp):
        """Euclidean Jacobians Df_i at log-polar points, shape (N, 2, 2)."""
        raise NotImplementedError

    def origin_data(self):
        """(plateau log-radius or None if globally linear, LinearCocycle there)."""
        raise NotImplementedError

    def chart(self) -> TorusChart:
        raise NotImplementedError

    def fast_return_shift(self, rho_lo: float, rho_hi: float):
        """Exact log-radius translation of the return map on [rho_lo, rho_hi].

        Providers with a homothetic band where whole period orbits stay
        linear return ln(lambda) here; the return map is then x -> lambda x
        and both return directions collapse to translations.
        """
        return None

    def return_lp(self, lp, i0: int = 0):
        lp = np.atleast_2d(np.asarray(lp, float))
        if i0 == 0 and lp.size:
            s = self.fast_return_shift(float(np.min(lp[:, 0])), float(np.max(lp[:, 0])))
            if s is not None:
                out = lp.copy()
                out[:, 0] += s
                return out
        for i in range(self.period):
            lp = self.fiber_lp((i0 + i) % self.period, lp)
        return lp

    def return_inv_lp(self, lp, i0: int = 0):
        lp = np.atleast_2d(np.asarray(lp, float))
        if i0 == 0 and lp.size:
            lo, hi = float(np.min(lp[:, 0])), float(np.max(lp[:, 0]))
            s = self.fast_return_shift(lo, hi)
            if s is not None:
                probe = self.fast_return_shift(lo - s, hi - s)
                if probe is not None:
                    out = lp.copy()
                    out[:, 0] -= s
                    return out
        for i in reversed(range(self.period)):
            lp = self.fiber_inv_lp((i0 + i) % self.period, lp)
        return lp

    # plane-point wrappers -------------------------------------------------

    def fiber_map(self, i, x):
        x = np.asarray(x, float)
        single = x.ndim == 1
        lp = lp_from_xy(np.atleast_2d(x))
        out = lp_to_xy(self.fiber_lp(i, lp))
        return out[0] if single else out

    def fiber_inverse(self, i, y):
        y = np.asarray(y, float)
        single = y.ndim == 1
        lp = lp_from_xy(np.atleast_2d(y))
        out = lp_to_xy(self.fiber_inv_lp(i, lp))
        return out[0] if single else out

    def fiber_jacobian(self, i, x):
        x = np.asarray(x, float)
        single = x.ndim == 1
        lp = lp_from_xy(np.atleast_2d(x))
        out = self.fiber_jac_lp(i, lp)
        return out[0] if single else out


class LinearCocycleMaps(_CocycleMapsBase):
    """A linear cocycle considered as a diffeomorphism cocycle."""

    def __init__(self, cocycle: LinearCocycle):
        self.cocycle = cocycle
        self._inv = inv2(cocycle.mats)

    @property
    def period(self) -> int:
        return self.cocycle.period

    def fiber_lp(self, i, lp):
        return apply_mat_lp(self.cocycle.mats[i], lp)

    def fiber_inv_lp(self, i, lp):
        return apply_mat_lp(self._inv[i], lp)

    def fiber_jac_lp(self, i, lp):
        n = np.atleast_2d(lp).shape[0]
        return np.broadcast_to(self.cocycle.mats[i], (n, 2, 2)).copy()

    def origin_data(self):
        return None, self.cocycle

    def chart(self) -> TorusChart:
        """Chart anchored at radius 1.

        Exact when the return product is a homothety; otherwise the rate is
        the strong (most contracted) eigenvalue modulus, which matches the
        return action along the strong stable manifold.
        """
        from .cocycle import return_product
        from .linalg2 import eig2

        m = return_product(self.cocycle)
        c = 0.5 * float(tr2(m))
        if opnorm(m - c * np.eye(2)) <= 1e-9 * max(1.0, opnorm(m)) and 0 < c < 1:
            return TorusChart(0.0, c)
        l1, l2, kind = eig2(m)
        lam = abs(l2) if kind != "complex" else abs(l1)
        if not (0.0 < lam < 1.0):
            raise ValueError("cocycle is not contracting")
        return TorusChart(0.0, float(lam))


class RadialCocycle(_CocycleMapsBase):
    """Diffeomorphism cocycle f_i(x) = A_{i, theta(|x|)} x.

    Coincides with the path's end cocycle outside the outer plateau and with
    its start cocycle near the origin.  ``K_bound`` bounds all interpolated
    factor norms and inverses; ``k_contract`` is a horizon with every
    k-fold window product below 1/2 (uniform contraction hypothesis).
    ``band`` is attached by the retardable construction when the path carries
    a certified homothetic plateau.
    """

    def __init__(self, path: CocyclePath, theta: Reparam, epsilon1: float,
                 uniformity: tuple[float, int] | None = None):
        self.path = path
        self.theta = theta
        self.epsilon1 = float(epsilon1)
        self.band = None  # optional RetardableSpec
        self._band_env = None
        K, k = uniformity if uniformity is not None else self._uniformity()
        self.K_bound = K
        self.k_contract = k

    def _uniformity(self, horizon: int = 4096):
        ts = []
        for a, b in zip(self.path.nodes[:-1], self.path.nodes[1:]):
            ts.append(np.linspace(a, b, 4)[:-1])
        ts.append(self.path.nodes[-1:])
        ts = np.concatenate(ts) if ts else self.path.nodes
        stacks = self.path.mats_at(ts)                     # (S, n, 2, 2)
        K = max(float(np.max(opnorm(stacks))), float(np.max(opnorm(inv2(stacks)))))
        w = stacks.copy()
        for k in range(1, horizon + 1):
            if float(np.max(opnorm(w))) < 0.5:
                return K, k
            nxt = np.roll(stacks, -k, axis=1)
            w = nxt @ w
        raise ValueError(f"path is not uniformly contracting within horizon {horizon}")

    @property
    def period(self) -> int:
        return self.path.period

    # log-polar dynamics ---------------------------------------------------

    def _mats_at_lp(self, i, lp):
        t = self.theta.value(lp[..., 0])
        return _fiber_interp(self.path, i, t)

    def fiber_lp(self, i, lp):
        lp = np.asarray(lp, float)
        return apply_mat_lp(self._mats_at_lp(i, lp), lp)

    def fiber_jac_lp(self, i, lp):
        lp = np.atleast_2d(np.asarray(lp, float))
        rho = lp[..., 0]
        t = self.theta.value(rho)
        a = _fiber_interp(self.path, i, t)
        s = self.theta.slope(rho)
        da = _fiber_dinterp(self.path, i, t)
        u = np.stack([np.cos(lp[..., 1]), np.sin(lp[..., 1])], axis=-1)
        dau = np.einsum("...ij,...j->...i", da, u)
        return a + s[..., None, None] * np.einsum("...i,...j->...ij", dau, u)

    def fiber_inv_lp(self, i, lp):
        """Solve f_i(x) = y: scalar monotone fixed-point in log-radius.

        rho -> ln|A(theta(rho))^{-1} y| is a contraction-plus-shift with
        derivative within delta of 0, so rho_{k+1} = ln|A^{-1}y| converges
        geometrically; bisection fallback guards pathological tables.
        """
        lp = np.atleast_2d(np.asarray(lp, float))
        rho_y = lp[..., 0]
        rho = rho_y.copy()
        for _ in range(64):
            t = self.theta.value(rho)
            cand = apply_mat_lp(inv2(_fiber_interp(self.path, i, t)), lp)
            new = cand[..., 0]
            if np.max(np.abs(new - rho)) < 1e-14 * np.maximum(1.0, np.max(np.abs(rho))):
                rho = new
                break
            rho = new
        else:
            return self._fiber_inv_bisect(i, lp)
        t = self.theta.value(rho)
        return apply_mat_lp(inv2(_fiber_interp(self.path, i, t)), lp)

    def _fiber_inv_bisect(self, i, lp):
        rho_y = lp[..., 0]
        pad = np.log(self.K_bound) + 1.0
        lo, hi = rho_y - pad, rho_y + pad

        def g(rho):
            t = self.theta.value(rho)
            cand = apply_mat_lp(inv2(_fiber_interp(self.path, i, t)), lp)
            return cand[..., 0] - rho

        for _ in range(4):
            bad = ~((g(lo) > 0) & (g(hi) < 0))
            if not np.any(bad):
                break
            lo = np.where(bad, lo - pad, lo)
            hi = np.where(bad, hi + pad, hi)
        else:
            if np.any(~((g(lo) > 0) & (g(hi) < 0))):
                raise ArithmeticError("fiber inverse root not bracketed: map not "
                                    "surjective on the probed range")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            pos = g(mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        rho = 0.5 * (lo + hi)
        t = self.theta.value(rho)
        return apply_mat_lp(inv2(_fiber_interp(self.path, i, t)), lp)

    def origin_data(self):
        t0 = float(self.theta.values[0])
        return self.theta.inner_log, self.path.at(t0)

    def fast_return_shift(self, rho_lo: float, rho_hi: float):
        if self.band is None:
            return None
        if self._band_env is None:
            from .cocycle import partial_products
            from .linalg2 import sigma_min

            parts = partial_products(self.band.factors)
            self._band_env = max(float(np.log(np.max(opnorm(parts)))),
                                 float(-np.log(np.min(sigma_min(parts))))) + 1e-9
        ok = (rho_lo - self._band_env > self.band.log_R1
              and rho_hi + self._band_env <= self.band.log_R3)
        return float(np.log(self.band.lam)) if ok else None

    def chart(self) -> TorusChart:
        if self.band is None:
            raise ValueError("no certified homothetic band attached to this cocycle")
        return TorusChart(self.band.log_R2, self.band.lam)


def eval_fiber_map(rc: _CocycleMapsBase, i: int, x):
    """f_i(x) on plane points (the origin maps to the origin)."""
    x = np.asarray(x, float)
    if x.ndim == 1 and np.all(x == 0.0):
        return np.zeros(2)
    return rc.fiber_map(i, x)


def eval_fiber_derivative(rc: _CocycleMapsBase, i: int, x):
    """Analytic Jacobian Df_i at a plane point; plateau matrix at the origin."""
    x = np.asarray(x, float)
    if x.ndim == 1 and np.all(x == 0.0):
        plateau_log, coc = rc.origin_data()
        return coc.mats[i].copy()
    return rc.fiber_jacobian(i, x)


@dataclass(frozen=True)
class GridSpec:
    """Log-radial x angular x fiber sampling grid for certificates."""

    radial_decades: int = 12
    per_decade: int = 16
    angles: int = 64
    orbits: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.radial_decades < 8 or self.angles < 32:
            raise ValueError("grid too coarse: need >= 8 radial decades and >= 32 angles")

    def radial_count(self) -> int:
        return self.radial_decades * self.per_decade


@dataclass(frozen=True)
class RealizationCertificate:
    passed: bool
    max_onestep: float
    max_jstep: float
    max_dfk: float
    epsilon1: float
    k: int
    witness_onestep: tuple
    witness_jstep: tuple
    grid: GridSpec

    def summary(self) -> str:
        lines = [
            f"realization certificate ({'pass' if self.passed else 'FAIL'})",
            f"  one-step max ||Df - A||      = {self.max_onestep:.6g}  (< {self.epsilon1:g})"
            f"  at (log r, angle, fiber) = {self.witness_onestep}",
            f"  j-step max (j < {self.k})        = {self.max_jstep:.6g}  (< {self.epsilon1:g})"
            f"  at (log r, angle, fiber) = {self.witness_jstep}",
            f"  contraction max ||DF^k||     = {self.max_dfk:.6g}  (< 1)",
            f"  grid: {self.grid.radial_decades} decades x {self.grid.per_decade}/decade"
            f" x {self.grid.angles} angles, {self.grid.orbits} orbits, seed {self.grid.seed}",
        ]
        return "\n".join(lines)


def _grid_rhos(rc: RadialCocycle, grid: GridSpec):
    pad = np.log(10.0)
    lo, hi = rc.theta.inner_log - pad, rc.theta.outer_log + pad
    return np.linspace(lo, hi, grid.radial_count())


def certify_realization(rc: RadialCocycle, grid: GridSpec | None = None) -> RealizationCertificate:
    """Grid certificate for the radial realization.

    (a) one-step derivative deviation below epsilon1 on the full grid;
    (b) j-step deviation against the frozen matrix product along sampled
    orbits for j < k; (c) contraction ||DF^k|| < 1 along the same orbits.
    """
    grid = grid or GridSpec()
    rhos = _grid_rhos(rc, grid)
    angs = np.linspace(0.0, 2 * np.pi, grid.angles, endpoint=False)
    rr, aa = np.meshgrid(rhos, angs, indexing="ij")
    lp = np.stack([rr.ravel(), aa.ravel()], axis=-1)

    # (a): ||Df - A|| = |slope| * ||(dA/dt) u||, a rank-one deviation
    max_one, wit_one = -1.0, None
    slope = rc.theta.slope(lp[:, 0])
    t = rc.theta.value(lp[:, 0])
    u = np.stack([np.cos(lp[:, 1]), np.sin(lp[:, 1])], axis=-1)
    for i in range(rc.period):
        da = _fiber_dinterp(rc.path, i, t)
        dev = np.abs(slope) * np.hypot(*np.einsum("nij,nj->ni", da, u).T)
        k_ = int(np.argmax(dev))
        if dev[k_] > max_one:
            max_one, wit_one = float(dev[k_]), (float(lp[k_, 0]), float(lp[k_, 1]), i)

    # (b), (c): orbits, advanced with per-point fiber gathers
    rng = np.random.default_rng(grid.seed)
    m = grid.orbits
    lo, hi = rhos[0], rhos[-1]
    pts = np.stack([rng.uniform(lo, hi, m), rng.uniform(0, 2 * np.pi, m)], axis=-1)
    fibers = rng.integers(0, rc.period, m)
    k = rc.k_contract
    t0 = rc.theta.value(pts[:, 0])
    frozen0, _ = _gather_interp(rc.path, fibers, t0)
    jac_chain = np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
    frozen = np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
    cur = pts.copy()
    max_j, wit_j = -1.0, None
    for step in range(k):
        idx = (fibers + step) % rc.period
        t_cur = rc.theta.value(cur[:, 0])
        a, da = _gather_interp(rc.path, idx, t_cur)
        slope = rc.theta.slope(cur[:, 0])
        u = np.stack([np.cos(cur[:, 1]), np.sin(cur[:, 1])], axis=-1)
        dau = np.einsum("nij,nj->ni", da, u)
        jac = a + slope[:, None, None] * np.einsum("ni,nj->nij", dau, u)
        fro, _ = _gather_interp(rc.path, idx, t0)
        jac_chain = jac @ jac_chain
        frozen = fro @ frozen
        cur = apply_mat_lp(a, cur)
        if step < k - 1:
            dev = opnorm(jac_chain - frozen)
            k_ = int(np.argmax(dev))
            if dev[k_] > max_j:
                max_j = float(dev[k_])
                wit_j = (float(pts[k_, 0]), float(pts[k_, 1]), int(fibers[k_]))
    max_dfk = float(np.max(opnorm(jac_chain)))

    passed = max_one < rc.epsilon1 and max_j < rc.epsilon1 and max_dfk < 1.0
    return RealizationCertificate(
        passed=passed,
        max_onestep=max_one,
        max_jstep=max_j,
        max_dfk=max_dfk,
        epsilon1=rc.epsilon1,
        k=k,
        witness_onestep=wit_one,
        witness_jstep=wit_j,
        grid=grid,
    )


def jacobian_fd_check(rc: _CocycleMapsBase, pts, h: float = 1e-6) -> float:
    """Max relative deviation of the analytic Jacobian from central differences.

    Points should sit away from theta-table breakpoints; the derivative
    convention there is one-sided.
    """
    pts = np.atleast_2d(np.asarray(pts, float))
    worst = 0.0
    e = np.eye(2)
    for i in range(rc.period):
        jac = rc.fiber_jacobian(i, pts)
        cols = []
        for d in range(2):
            fp = rc.fiber_map(i, pts + h * e[d])
            fm = rc.fiber_map(i, pts - h * e[d])
            cols.append((fp - fm) / (2 * h))
        fd = np.stack([cols[0], cols[1]], axis=-1)
        num = opnorm(jac - fd)
        den = np.maximum(opnorm(jac), 1e-30)
        worst = max(worst, float(np.max(num / den)))
    return worst
