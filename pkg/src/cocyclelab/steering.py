"""Meridian steering inside the homothetic region.

A target isotopy of the meridians is encoded as the time-1 flow of a torus
vector field, fragmented into near-identity factors whose supports each miss
a round parallel, lifted one at a time into separated round fundamental
annuli deep in the homothetic region (where conjugation by the homothety
costs nothing in the C1 metric), and composed into the last fiber map.  The
meridians of the perturbed cocycle are the composed inverse factor images of
the old ones, so re-tracing the strong stable manifold reproduces the
targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, TorusChart, resample_polyline
from .linalg2 import det2, opnorm, rotation
from .manifold import TorusCurve, curve_hausdorff, meridians_from_trace, trace_wss
from .realization import _CocycleMapsBase
from .retard import RetardedCocycle, homothetic_region, retard

__all__ = [
    "TorusVectorField",
    "TorusFlowMap",
    "TorusDiffeoFactor",
    "TorusDiffeoFactorization",
    "AnnulusDiffeo",
    "SteeredCocycle",
    "SteerReport",
    "fragment",
    "lift_factor",
    "compose_perturbation",
    "steer_meridians",
    "build_transport_flow",
    "graph_of_curve",
    "make_shift_targets",
    "make_finger_targets",
    "make_twist_targets",
    "random_annulus_diffeo",
]


def _smoothstep(x):
    """C^2 step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


class TorusVectorField:
    """Vector field on the flat torus, (u, v) -> (du, dv).

    ``u_support`` is an interval (possibly the full circle) outside which the
    field vanishes; ``v_support`` likewise when the field is v-localized.
    The Jacobian falls back to central differences when not supplied.
    """

    def __init__(self, fn, jac=None, u_support=(0.0, 1.0), v_support=None):
        self._fn = fn
        self._jac = jac
        self.u_support = tuple(u_support)
        self.v_support = tuple(v_support) if v_support is not None else None

    def __call__(self, uv):
        return self._fn(np.atleast_2d(np.asarray(uv, float)))

    def jac(self, uv, h=1e-6):
        uv = np.atleast_2d(np.asarray(uv, float))
        if self._jac is not None:
            return self._jac(uv)
        cols = []
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            cols.append((self._fn(uv + e) - self._fn(uv - e)) / (2 * h))
        return np.stack([cols[0], cols[1]], axis=-1)


def _rk4(fn, x, t_total, steps):
    h = t_total / steps
    for _ in range(steps):
        k1 = fn(x)
        k2 = fn(x + 0.5 * h * k1)
        k3 = fn(x + 0.5 * h * k2)
        k4 = fn(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _rk4_var(fn, jac_fn, x, t_total, steps):
    """RK4 on the variational system; returns endpoint and Jacobian stack."""
    n = x.shape[0]
    J = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    h = t_total / steps

    def f(state):
        y, jj = state
        return fn(y), jac_fn(y) @ jj

    for _ in range(steps):
        k1x, k1j = f((x, J))
        k2x, k2j = f((x + 0.5 * h * k1x, J + 0.5 * h * k1j))
        k3x, k3j = f((x + 0.5 * h * k2x, J + 0.5 * h * k2j))
        k4x, k4j = f((x + h * k3x, J + h * k3j))
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        J = J + (h / 6.0) * (k1j + 2 * k2j + 2 * k3j + k4j)
    return x, J


class TorusFlowMap:
    """Time-t flow of a torus vector field, fixed-step RK4."""

    def __init__(self, field: TorusVectorField, time: float = 1.0, steps: int = 64):
        self.field = field
        self.time = float(time)
        self.steps = int(steps)

    def apply(self, uv):
        return _rk4(self.field, np.atleast_2d(np.asarray(uv, float)).copy(),
                    self.time, self.steps)

    def apply_inv(self, uv):
        return _rk4(lambda y: -self.field(y),
                    np.atleast_2d(np.asarray(uv, float)).copy(), self.time, self.steps)

    def apply_var(self, uv):
        return _rk4_var(self.field, self.field.jac,
                        np.atleast_2d(np.asarray(uv, float)).copy(), self.time, self.steps)

    def c1_distance_to_identity(self, grid_uv) -> float:
        """max over grid of displacement + derivative deviation (flat coords)."""
        out, J = self.apply_var(grid_uv)
        disp = np.hypot(*(out - grid_uv).T)
        dev = opnorm(J - np.eye(2))
        return float(np.max(disp + dev))


def _support_grid(u_supp, v_supp, nu=24, nv=24):
    ua, ub = u_supp
    us = np.linspace(ua, ub, nu)
    vs = np.linspace(*(v_supp if v_supp else (0.0, 1.0)), nv, endpoint=v_supp is not None)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return np.stack([uu.ravel(), vv.ravel()], axis=-1)


@dataclass
class TorusDiffeoFactor:
    """One near-identity fragmentation factor (the inverse-piece flow).

    The factor itself integrates the negated field piece over dt, so that the
    reverse-ordered composition of factor inverses reproduces the original
    flow.  Support misses the round parallel ``cut_parallel``.
    """

    piece: TorusVectorField
    dt: float
    steps: int
    u_support: tuple
    v_support: tuple | None
    cut_parallel: float
    c1_dist: float = 0.0

    def _flow(self, sign):
        return TorusFlowMap(
            TorusVectorField(lambda uv: sign * self.piece(uv),
                             jac=lambda uv: sign * self.piece.jac(uv),
                             u_support=self.u_support, v_support=self.v_support),
            self.dt, self.steps)

    def apply(self, uv):
        return self._flow(-1.0).apply(uv)

    def apply_inv(self, uv):
        return self._flow(+1.0).apply(uv)

    def certify(self, nu=24, nv=24) -> float:
        grid = _support_grid(self.u_support, self.v_support, nu, nv)
        self.c1_dist = self._flow(-1.0).c1_distance_to_identity(grid)
        return self.c1_dist


@dataclass
class TorusDiffeoFactorization:
    """Ordered factors with (factor_k^-1 o ... o factor_1^-1) ~ the flow."""

    factors: list
    mu: float

    def __len__(self):
        return len(self.factors)

    def transport(self, uv):
        """Apply the composed inverse factors (the isotopy) to torus points."""
        out = np.atleast_2d(np.asarray(uv, float)).copy()
        for f in self.factors:
            out = f.apply_inv(out)
        return out

    def transport_curve(self, curve: TorusCurve) -> TorusCurve:
        return TorusCurve(self.transport(curve.uv), tol=1e-6)

    def max_c1(self) -> float:
        return max((f.c1_dist for f in self.factors), default=0.0)


def _circle_partition(n_pieces, fade=0.12):
    """Smooth partition of unity on the u-circle from normalized C^2 bumps."""
    centers = np.arange(n_pieces) / n_pieces
    half = 0.5 / n_pieces + fade

    def raw(u, c):
        w = np.abs((u - c + 0.5) % 1.0 - 0.5)
        return 1.0 - _smoothstep((w - (half - fade)) / fade)

    def chi(j):
        def fn(u):
            tot = sum(raw(u, c) for c in centers)
            return raw(u, centers[j]) / tot
        return fn

    # supports kept unwrapped (left end may be negative); evaluation is periodic
    supports = [(centers[j] - half, centers[j] + half) for j in range(n_pieces)]
    return [chi(j) for j in range(n_pieces)], supports


def fragment(flow: TorusFlowMap, mu: float, n_pieces: int = 2,
             max_doublings: int = 8) -> TorusDiffeoFactorization:
    """Split the flow into near-identity factors missing round parallels.

    Time is cut into equal steps until every factor's C1 distance to the
    identity is below mu; each time step is split spatially by a smooth
    partition of unity in u, so every factor support is a band (a disc when
    the field is v-localized) missing a round parallel.  For v-directional
    fields both splittings are exact: the factor flows commute piecewise and
    compose to the original flow.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    X = flow.field
    chis, supports = _circle_partition(n_pieces)

    # drop pieces whose band misses the field support entirely
    def band_active(supp):
        a, b = supp
        ua, ub = X.u_support
        if ub - ua >= 1.0 - 1e-12 or b - a >= 1.0 - 1e-12:
            return True
        # compare on the circle: both intervals unwrapped with width < 1
        for s in (-1.0, 0.0, 1.0):
            if max(a + s, ua) <= min(b + s, ub):
                return True
        return False

    grid_supp = X.u_support if X.u_support[1] - X.u_support[0] < 1.0 else (0.0, 1.0)
    grid = _support_grid(grid_supp, X.v_support, 32, 32)
    mag = float(np.max(np.hypot(*X(grid).T) + opnorm(X.jac(grid))))
    if mag < 1e-14:
        return TorusDiffeoFactorization([], float(mu))

    supp_width = X.u_support[1] - X.u_support[0]
    if supp_width < 1.0 - 1e-12:
        # already small and missing a parallel: a single factor suffices
        a, b = X.u_support
        clear = (a - b) % 1.0
        single = TorusDiffeoFactor(X, flow.time, steps=max(flow.steps, 8),
                                   u_support=X.u_support, v_support=X.v_support,
                                   cut_parallel=float((b + 0.5 * clear) % 1.0))
        if single.certify() < mu:
            return TorusDiffeoFactorization([single], float(mu))

    k_t = max(1, int(np.ceil(flow.time * (mag + 1e-12) / (0.5 * mu))))

    def piece_field(chi, supp):
        def val(uv):
            return X(uv) * chi(uv[:, 0])[:, None]

        def jac(uv, h=1e-6):
            base = X.jac(uv) * chi(uv[:, 0])[:, None, None]
            dchi = (chi(uv[:, 0] + h) - chi(uv[:, 0] - h)) / (2 * h)
            base[:, :, 0] += X(uv) * dchi[:, None]
            return base

        return TorusVectorField(val, jac=jac, u_support=supp, v_support=X.v_support)

    pieces = [(piece_field(chi, supp), supp)
              for chi, supp in zip(chis, supports) if band_active(supp)]
    if not pieces:
        return TorusDiffeoFactorization([], float(mu))

    for _ in range(max_doublings):
        dt = flow.time / k_t
        protos = []
        ok = True
        for pf, supp in pieces:
            a, b = supp
            clear = (a - b) % 1.0
            cut = float((b + 0.5 * clear) % 1.0)
            f = TorusDiffeoFactor(pf, dt, steps=8, u_support=supp,
                                  v_support=X.v_support, cut_parallel=cut)
            if f.certify() >= mu:
                ok = False
                break
            protos.append(f)
        if ok:
            # one factor object per (time step, piece); autonomous pieces repeat
            factors = []
            for _step in range(k_t):
                for p in protos:
                    factors.append(TorusDiffeoFactor(
                        p.piece, p.dt, p.steps, p.u_support, p.v_support,
                        p.cut_parallel, p.c1_dist))
            return TorusDiffeoFactorization(factors, float(mu))
        k_t *= 2
    raise ArithmeticError("fragmentation failed to reach the requested factor size")


# ---------------------------------------------------------------------------
# transport flows from curve correspondences


def graph_of_curve(curve: TorusCurve, samples: int = 512):
    """Periodic v-graph v(u) of a homology-(1,0) curve on a uniform u-grid."""
    if curve.homology != (1, 0) and curve.homology != (-1, 0):
        raise ValueError(f"curve has homology {curve.homology}, need (1, 0)")
    uv = curve.uv if curve.homology == (1, 0) else curve.uv[::-1]
    backtrack = float(np.max(np.abs(np.minimum(np.diff(uv[:, 0]), 0.0))))
    if backtrack > 0.05:
        raise ValueError("curve is too far from a graph over u")
    u, v = uv[:, 0].copy(), uv[:, 1].copy()
    order = np.argsort(u, kind="stable")
    u, v = u[order], v[order]
    grid = np.linspace(0.0, 1.0, samples, endpoint=False)
    lo = u[0]
    x = lo + (grid - lo) % 1.0
    vals = np.interp(x, u, v)
    return grid, vals


def build_transport_flow(meridians, targets, pad: float = 0.02,
                         samples: int = 512) -> TorusFlowMap:
    """v-directional field whose time-1 flow carries each meridian to its target.

    Rigid-per-u displacements (shifts, twists) become exact shears; distinct
    per-curve displacements use disjoint transport corridors where the field
    is constant along each trajectory, so the transport is exact up to the
    integrator.
    """
    if len(meridians) != len(targets):
        raise ValueError("need one target per meridian")
    grid = np.linspace(0.0, 1.0, samples, endpoint=False)
    gs, ds = [], []
    for g, s in zip(meridians, targets):
        _, gv = graph_of_curve(g, samples)
        _, sv = graph_of_curve(s, samples)
        d = sv - gv
        d -= np.round(np.mean(d))
        gs.append(gv)
        ds.append(d)
    gs, ds = np.stack(gs), np.stack(ds)

    active = np.any(np.abs(ds) > 1e-12, axis=0)
    if not np.any(active):
        zero = TorusVectorField(lambda uv: np.zeros_like(uv), u_support=(0.0, 1.0))
        return TorusFlowMap(zero, 1.0)
    u_support = (0.0, 1.0)
    if not np.all(active):
        ua = grid[active]
        u_support = (float(ua.min() - 2.0 / samples), float(ua.max() + 2.0 / samples))

    def interp_row(row, u):
        return np.interp(u % 1.0, grid, row, period=1.0)

    if float(np.max(np.abs(ds[0] - ds[-1]))) <= 1e-9:
        d_common = ds[0]

        def val(uv):
            out = np.zeros_like(uv)
            out[:, 1] = interp_row(d_common, uv[:, 0])
            return out
        fld = TorusVectorField(val, u_support=u_support)
        return TorusFlowMap(fld, 1.0)

    # corridor mode: per-curve constant transport channels
    fade = min(pad, 0.02)
    centers = gs + 0.5 * ds
    halfw = 0.5 * np.abs(ds) + pad
    # corridor disjointness on the v-circle, per u sample
    for k in range(gs.shape[0]):
        for l in range(k + 1, gs.shape[0]):
            gap = np.abs((centers[k] - centers[l] + 0.5) % 1.0 - 0.5)
            if np.any(gap < halfw[k] + halfw[l] + 2 * fade):
                raise ValueError("transport corridors overlap; supply closer targets "
                                 "or rigidly matched displacements")

    def val(uv):
        u, v = uv[:, 0], uv[:, 1]
        out = np.zeros_like(uv)
        for k in range(gs.shape[0]):
            c = interp_row(centers[k], u)
            h = interp_row(halfw[k], u)
            d = interp_row(ds[k], u)
            w = np.abs((v - c + 0.5) % 1.0 - 0.5)
            out[:, 1] += d * (1.0 - _smoothstep((w - h) / fade))
        return out

    fld = TorusVectorField(val, u_support=u_support)
    return TorusFlowMap(fld, 1.0)


def make_shift_targets(meridians, dv: float):
    return [m.translated(0.0, dv) for m in meridians]


def _bump(x, center, width):
    w = np.abs(x - center)
    return 1.0 - _smoothstep((w - 0.0) / max(width, 1e-9))


def make_finger_targets(meridians, which: int = 0, center_u: float = 0.5,
                        width: float = 0.12, amplitude: float = 0.12):
    out = []
    for k, m in enumerate(meridians):
        if k != which:
            out.append(TorusCurve(m.uv.copy()))
            continue
        uv = m.uv.copy()
        w = np.abs((uv[:, 0] - center_u + 0.5) % 1.0 - 0.5)
        uv[:, 1] += amplitude * (1.0 - _smoothstep(w / width))
        out.append(TorusCurve(uv))
    return out


def make_twist_targets(meridians, u_band=(0.2, 0.8), turns: int = 1):
    """Full-excursion targets: v winds up ``turns`` times and back across the band."""
    a, b = u_band
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    out = []
    for m in meridians:
        uv = m.uv.copy()
        w = np.abs((uv[:, 0] - mid + 0.5) % 1.0 - 0.5)
        uv[:, 1] += turns * (1.0 - _smoothstep(w / half))
        out.append(TorusCurve(uv))
    return out


# ---------------------------------------------------------------------------
# planar annulus diffeomorphisms and lifting


class AnnulusDiffeo:
    """Compactly supported planar diffeomorphism in a round annulus.

    The map is the time-``time`` flow of a vector field given in log-polar
    coordinates (zero outside the support annulus), integrated by fixed-step
    RK4.  The C1 distance to the identity is the grid maximum of the
    Euclidean derivative deviation ||Dphi - Id||; the log-polar chart is
    conformal, so the deviation is computed exactly from the log-polar
    variational flow and is invariant under conjugation by homotheties.
    """

    def __init__(self, field_lp, log_r_in: float, log_r_out: float, fiber: int = 0,
                 time: float = 1.0, steps: int = 16, grid=(24, 48)):
        if not log_r_in < log_r_out:
            raise ValueError("need log_r_in < log_r_out")
        self.field_lp = field_lp
        self.log_r_in = float(log_r_in)
        self.log_r_out = float(log_r_out)
        self.fiber = int(fiber)
        self.time = float(time)
        self.steps = int(steps)
        self.grid = grid
        self._certified = None

    # -- flow plumbing ------------------------------------------------------

    def _grid_lp(self):
        nr, na = self.grid
        rhos = np.linspace(self.log_r_in, self.log_r_out, nr)
        angs = np.linspace(0, TWO_PI, na, endpoint=False)
        rr, aa = np.meshgrid(rhos, angs, indexing="ij")
        return np.stack([rr.ravel(), aa.ravel()], axis=-1)

    def field_samples(self):
        """Grid samples of the field over the support annulus."""
        g = self._grid_lp()
        return g, self.field_lp(g)

    def _fd_jac(self, lp, h=1e-6):
        cols = []
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            cols.append((self.field_lp(lp + e) - self.field_lp(lp - e)) / (2 * h))
        return np.stack([cols[0], cols[1]], axis=-1)

    def _inside(self, lp):
        return (lp[:, 0] > self.log_r_in) & (lp[:, 0] < self.log_r_out)

    def apply_lp(self, lp, sign=1.0):
        lp = np.atleast_2d(np.asarray(lp, float))
        out = lp.copy()
        sel = self._inside(lp)
        if np.any(sel):
            out[sel] = _rk4(lambda y: sign * self.field_lp(y), lp[sel].copy(),
                            self.time, self.steps)
        return out

    def apply_inv_lp(self, lp):
        return self.apply_lp(lp, sign=-1.0)

    def var_lp(self, lp, sign=1.0):
        lp = np.atleast_2d(np.asarray(lp, float))
        out = lp.copy()
        J = np.broadcast_to(np.eye(2), (lp.shape[0], 2, 2)).copy()
        sel = self._inside(lp)
        if np.any(sel):
            x, jj = _rk4_var(lambda y: sign * self.field_lp(y),
                             lambda y: sign * self._fd_jac(y),
                             lp[sel].copy(), self.time, self.steps)
            out[sel] = x
            J[sel] = jj
        return out, J

    def jac_euclid(self, lp):
        """Euclidean Jacobians: conformal conversion of the log-polar flow."""
        out, Jlp = self.var_lp(lp)
        scale = np.exp(out[:, 0] - lp[:, 0])
        return scale[:, None, None] * (rotation(out[:, 1]) @ Jlp @ rotation(-lp[:, 1]))

    # -- certificates --------------------------------------------------------

    def certify(self):
        """(C1 distance to identity, max round-trip error, min Jacobian det)."""
        g = self._grid_lp()
        jac = self.jac_euclid(g)
        c1 = float(np.max(opnorm(jac - np.eye(2))))
        back = self.apply_inv_lp(self.apply_lp(g))
        rt = float(np.max(np.abs(back - g)))
        dets = float(np.min(det2(jac)))
        self._certified = (c1, rt, dets)
        return self._certified

    @property
    def c1_distance_to_identity(self) -> float:
        if self._certified is None:
            self.certify()
        return self._certified[0]

    def conjugated_by_homothety(self, log_scale: float) -> "AnnulusDiffeo":
        """H phi H^{-1} for H = e^{log_scale} Id: a log-radius translation."""
        shift = float(log_scale)
        fld = self.field_lp

        def moved(lp):
            q = lp.copy()
            q[:, 0] -= shift
            return fld(q)

        return AnnulusDiffeo(moved, self.log_r_in + shift, self.log_r_out + shift,
                             self.fiber, self.time, self.steps, self.grid)


def random_annulus_diffeo(rng, log_r_in: float, log_r_out: float,
                          amplitude: float = 0.05, modes: int = 3,
                          fiber: int = 0) -> AnnulusDiffeo:
    """Random smooth compactly supported annulus diffeomorphism (tests, demos)."""
    mid = 0.5 * (log_r_in + log_r_out)
    half = 0.5 * (log_r_out - log_r_in)
    a = rng.normal(size=(2, modes)) * amplitude / modes
    b = rng.normal(size=(2, modes)) * amplitude / modes
    ph = rng.uniform(0, TWO_PI, size=(2, modes))

    def fld(lp):
        s = np.clip((lp[:, 0] - mid) / half, -1.0, 1.0)
        bump = (1.0 - s * s) ** 2
        out = np.zeros_like(lp)
        for c in range(2):
            acc = np.zeros(lp.shape[0])
            for k in range(modes):
                acc += a[c, k] * np.cos((k + 1) * lp[:, 1] + ph[c, k]) \
                    + b[c, k] * np.sin((k + 1) * lp[:, 1] + ph[c, k])
            out[:, c] = bump * acc
        return out

    return AnnulusDiffeo(fld, log_r_in, log_r_out, fiber=fiber)


def lift_factor(factor: TorusDiffeoFactor, chart: TorusChart,
                log_r_top: float) -> AnnulusDiffeo:
    """Lift a torus factor to the round fundamental annulus topped at log_r_top.

    The chart is affine between the annulus and the cut torus
    (u in [u*, u*+1]), so the lifted field is the exact pushforward; the lift
    projects back to the factor identically up to the integrator.  The caller
    anchors log_r_top at chart.anchor_log_r - depth * (integer + u*), which
    keeps the lift a genuine lift of the orbit projection.
    """
    depth = chart.depth
    u_star = factor.cut_parallel

    def field_lp(lp):
        u = u_star + (log_r_top - lp[:, 0]) / depth
        v = lp[:, 1] / TWO_PI
        xy = -factor.piece(np.stack([u, v % 1.0], axis=-1))  # the factor flows -piece
        # chart: rho = const - depth * u, phi = 2 pi v
        return np.stack([-depth * xy[:, 0], TWO_PI * xy[:, 1]], axis=-1)

    # the certification grid must resolve corridor fade edges in the angle
    lift = AnnulusDiffeo(field_lp, log_r_top - depth, log_r_top,
                         time=factor.dt, steps=factor.steps, grid=(16, 256))
    return lift


def lift_projection_residual(factor: TorusDiffeoFactor, lift: AnnulusDiffeo,
                             chart: TorusChart, samples: int = 256, seed: int = 0) -> float:
    """Max deviation between the factor and the torus projection of its lift."""
    rng = np.random.default_rng(seed)
    ua, ub = factor.u_support
    u = rng.uniform(ua, ub, samples)
    v = rng.uniform(0, 1, samples)
    uv = np.stack([u, v], axis=-1)
    want = factor.apply(uv)
    u_cut = factor.cut_parallel + (u - factor.cut_parallel) % 1.0  # in (u*, u*+1)
    rho = lift.log_r_out - (u_cut - factor.cut_parallel) * chart.depth
    lp = np.stack([rho, TWO_PI * v], axis=-1)
    got = lift.apply_lp(lp)
    u2 = factor.cut_parallel + (lift.log_r_out - got[:, 0]) / chart.depth
    v2 = got[:, 1] / TWO_PI
    dev = np.stack([want[:, 0] - u2, want[:, 1] - v2], axis=-1)
    dev -= np.round(dev)
    return float(np.max(np.abs(dev)))


# ---------------------------------------------------------------------------
# composing lifts into the cocycle


class _CompositeSupport:
    """Union of disjoint annulus diffeos, applied by radial lookup."""

    def __init__(self, lifts):
        self.lifts = sorted(lifts, key=lambda l: l.log_r_out)
        for a, b in zip(self.lifts[:-1], self.lifts[1:]):
            if not a.log_r_out <= b.log_r_in + 1e-12:
                raise ValueError("lift annuli overlap")

    def _locate(self, lp):
        tops = np.array([l.log_r_out for l in self.lifts])
        idx = np.searchsorted(tops, lp[:, 0], side="left")
        idx = np.clip(idx, 0, len(self.lifts) - 1)
        return idx

    def _apply(self, lp, inverse=False):
        lp = np.atleast_2d(np.asarray(lp, float))
        out = lp.copy()
        idx = self._locate(lp)
        for k, lift in enumerate(self.lifts):
            sel = (idx == k) & (lp[:, 0] > lift.log_r_in) & (lp[:, 0] < lift.log_r_out)
            if np.any(sel):
                out[sel] = (lift.apply_inv_lp if inverse else lift.apply_lp)(lp[sel])
        return out

    def apply_lp(self, lp):
        return self._apply(lp)

    def apply_inv_lp(self, lp):
        return self._apply(lp, inverse=True)

    def jac_euclid(self, lp):
        lp = np.atleast_2d(np.asarray(lp, float))
        J = np.broadcast_to(np.eye(2), (lp.shape[0], 2, 2)).copy()
        idx = self._locate(lp)
        for k, lift in enumerate(self.lifts):
            sel = (idx == k) & (lp[:, 0] > lift.log_r_in) & (lp[:, 0] < lift.log_r_out)
            if np.any(sel):
                J[sel] = lift.jac_euclid(lp[sel])
        return J


class SteeredCocycle(_CocycleMapsBase):
    """Retarded cocycle with the last fiber map post-composed by the lifts."""

    def __init__(self, base: RetardedCocycle, lifts):
        self.base = base
        self.phi = _CompositeSupport(lifts)

    @property
    def period(self):
        return self.base.period

    def fiber_lp(self, i, lp):
        out = self.base.fiber_lp(i, lp)
        if i % self.period == self.period - 1:
            out = self.phi.apply_lp(out)
        return out

    def fiber_inv_lp(self, i, lp):
        lp = np.atleast_2d(np.asarray(lp, float))
        if i % self.period == self.period - 1:
            lp = self.phi.apply_inv_lp(lp)
        return self.base.fiber_inv_lp(i, lp)

    def fiber_jac_lp(self, i, lp):
        J = self.base.fiber_jac_lp(i, lp)
        if i % self.period == self.period - 1:
            out = self.base.fiber_lp(i, np.atleast_2d(np.asarray(lp, float)))
            J = self.phi.jac_euclid(out) @ J
        return J

    def origin_data(self):
        return self.base.origin_data()

    def chart(self):
        return self.base.chart()

    def fast_return_shift(self, rho_lo: float, rho_hi: float):
        s = self.base.fast_return_shift(rho_lo, rho_hi)
        if s is None:
            return None
        # the interval and its image must clear every lift annulus
        for l in self.phi.lifts:
            for a, b in ((rho_lo, rho_hi), (rho_lo + s, rho_hi + s)):
                if a <= l.log_r_out and b >= l.log_r_in:
                    return None
        return s


def compose_perturbation(ret: RetardedCocycle, lifts) -> tuple["SteeredCocycle", dict]:
    """Post-compose the last fiber with disjoint lifts; certify the C1 size.

    Validates the separation chain inside the homothetic region, measures
    max ||D(Phi o f) - Df|| over the lift annuli, and reports the constant C
    relating it to the largest lift size.
    """
    if not lifts:
        return SteeredCocycle(ret, []), {"size": 0.0, "C": 0.0, "eta": 0.0}
    lo, hi = homothetic_region(ret)
    for l in lifts:
        if not (lo - 1e-9 <= l.log_r_in and l.log_r_out <= hi + 1e-9):
            raise ValueError("lift annulus escapes the homothetic region")
    steered = SteeredCocycle(ret, lifts)
    n = ret.period
    worst = 0.0
    for l in steered.phi.lifts:
        nr, na = 10, 96
        rhos = np.linspace(l.log_r_in, l.log_r_out, nr + 2)[1:-1]
        angs = np.linspace(0, TWO_PI, na, endpoint=False)
        rr, aa = np.meshgrid(rhos, angs, indexing="ij")
        y = np.stack([rr.ravel(), aa.ravel()], axis=-1)
        x = ret.fiber_inv_lp(n - 1, y)
        dev = opnorm(steered.fiber_jac_lp(n - 1, x) - ret.fiber_jac_lp(n - 1, x))
        worst = max(worst, float(np.max(dev)))
    eta = max(l.c1_distance_to_identity for l in lifts)
    cert = {"size": worst, "eta": eta, "C": worst / eta if eta > 0 else 0.0}
    return steered, cert


# ---------------------------------------------------------------------------
# the steering pipeline


@dataclass
class SteerReport:
    steered: SteeredCocycle
    m: int
    k_factors: int
    mu: float
    eta: float
    perturbation_size: float
    perturbation_constant: float
    epsilon0: float
    before: list
    after: list
    targets: list
    hausdorff: list

    @property
    def passed(self) -> bool:
        return max(self.hausdorff) < 1e-3 and self.perturbation_size < self.epsilon0

    def summary(self) -> str:
        return (
            f"meridian steering ({'pass' if self.passed else 'FAIL'})\n"
            f"  factors k={self.k_factors} (mu={self.mu:.4g}, eta={self.eta:.4g}), "
            f"retard m={self.m}\n"
            f"  perturbation size {self.perturbation_size:.6g} < epsilon0={self.epsilon0:g} "
            f"(C={self.perturbation_constant:.3g})\n"
            f"  meridian-to-target Hausdorff: "
            + ", ".join(f"{h:.3g}" for h in self.hausdorff)
        )


def _unique_pieces(fac: TorusDiffeoFactorization):
    """One representative factor per field piece (they repeat across time steps)."""
    seen, out = set(), []
    for f in fac.factors:
        if id(f.piece) not in seen:
            seen.add(id(f.piece))
            out.append(f)
    return out


def _validate_targets(targets, meridians):
    if len(targets) != len(meridians):
        raise ValueError("need one target per meridian")
    graphs = []
    for t in targets:
        if t.homology != (1, 0):
            raise ValueError(f"target homology {t.homology} is not (1, 0)")
        if not t.is_simple():
            raise ValueError("target curve is not simple")
        graphs.append(graph_of_curve(t)[1])
    for a in range(len(graphs)):
        for b in range(a + 1, len(graphs)):
            gap = np.abs((graphs[a] - graphs[b] + 0.5) % 1.0 - 0.5)
            if float(np.min(gap)) <= 1e-9:
                raise ValueError("target curves intersect")


def steer_meridians(ret: RetardedCocycle, targets, epsilon0: float,
                    spacing: float = 1e-3, mu0: float | None = None) -> SteerReport:
    """Steer the meridians of a retarded cocycle onto the target curves.

    Builds the transport flow from the current meridians, fragments it at a
    size found by bisection against the lift certificates, re-retards so all
    factors fit in separated fundamental annuli, composes, re-traces the
    strong stable manifold, and reports Hausdorff distances and the certified
    perturbation size.
    """
    chart = ret.chart()
    depth = chart.depth
    region = homothetic_region(ret)
    tr = trace_wss(ret, extent=(region[1] - depth, region[1]), spacing=spacing)
    before = meridians_from_trace(tr, ret)
    _validate_targets(targets, before)

    flow = build_transport_flow(before, targets)
    n1 = ret.spec.factors.mats[ret.period - 1]
    c_est = max(1.0, float(opnorm(n1)))
    eta = epsilon0 / (1.05 * c_est)
    chart_factor = max(depth, TWO_PI) / min(depth, TWO_PI) + 1.0
    mu = mu0 if mu0 is not None else eta / chart_factor

    fac = None
    for _ in range(8):
        cand = fragment(flow, mu)
        if len(cand) == 0:
            fac = cand
            break
        worst = max(
            lift_factor(f, chart, chart.anchor_log_r - 3 * depth).c1_distance_to_identity
            for f in _unique_pieces(cand)
        )
        if worst < eta:
            fac = cand
            if worst < 0.5 * eta and mu0 is None:
                mu *= min(2.0, 0.7 * eta / max(worst, 1e-12))
                continue
            break
        mu *= 0.5
    if fac is None:
        raise ArithmeticError("no factor size certified below the lift budget")

    k = len(fac)
    m_req = 3 * (k + 1) + 1
    work = ret if ret.m >= m_req else retard(ret.base, ret.spec, m_req)
    m = work.m

    # identical pieces across time steps share one lift certificate; placed
    # copies are homothety conjugates, which leave the C1 size unchanged
    proto_lift = {}
    lifts = []
    for i, f in enumerate(fac.factors, start=1):
        top = chart.anchor_log_r - depth * ((m - 3 * i) + f.cut_parallel)
        key = id(f.piece)
        if key not in proto_lift:
            p = lift_factor(f, chart, top)
            if p.c1_distance_to_identity >= eta:
                raise ArithmeticError("lift certificate exceeded the budget after placement")
            proto_lift[key] = p
        base_lift = proto_lift[key]
        lift = base_lift.conjugated_by_homothety(top - base_lift.log_r_out)
        lift._certified = base_lift._certified
        lifts.append(lift)

    steered, cert = compose_perturbation(work, lifts)
    region_m = homothetic_region(work)
    tr2 = trace_wss(steered, extent=(region_m[1] - depth, region_m[1]), spacing=spacing)
    after = meridians_from_trace(tr2, steered)
    dists = [curve_hausdorff(a, t) for a, t in zip(after, targets)]
    return SteerReport(
        steered=steered, m=m, k_factors=k, mu=mu, eta=cert["eta"],
        perturbation_size=cert["size"], perturbation_constant=cert["C"],
        epsilon0=float(epsilon0), before=before, after=after, targets=list(targets),
        hausdorff=dists,
    )
