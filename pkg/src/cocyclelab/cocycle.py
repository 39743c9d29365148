"""Linear cocycles over a periodic orbit and the flexibility verifier.

A cocycle of period n is a sequence of invertible 2x2 matrices indexed by
Z/nZ; its return product is the ordered composition over one period.  A
cocycle path is a one-parameter family on a node grid with entrywise
piecewise-linear interpolation.  ``verify_flexible`` checks the six defining
conditions of an epsilon-flexible cocycle on a dense sample grid and returns
a structured report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg2 import det2, eig2, matmul_chain, opnorm, tr2

__all__ = [
    "LinearCocycle",
    "CocyclePath",
    "FlexReport",
    "return_product",
    "cocycle_distance",
    "path_diameter",
    "verify_flexible",
    "INVERTIBILITY_RTOL",
    "HOMOTHETY_RTOL",
    "DISC_TOL",
    "EIG_ONE_TOL",
]

# scale-aware singularity guard: |det| > INVERTIBILITY_RTOL * opnorm^2
INVERTIBILITY_RTOL = 1e-12
# homothety acceptance: ||M - (tr/2) Id|| <= HOMOTHETY_RTOL * max(1, ||M||)
HOMOTHETY_RTOL = 1e-9
# relative discriminant threshold: disc > DISC_TOL * (tr^2 + 4|det|), i.e.
# eigenvalue separation above ~1e-6 of the eigenvalue scale.  An absolute
# threshold is scale-blind: long schedules make return products (and with
# them the discriminant near the homothety endpoint) arbitrarily small while
# the open condition genuinely holds.
DISC_TOL = 1e-12
# eigenvalue-one acceptance at the t=1 endpoint
EIG_ONE_TOL = 1e-8

# interior samples per node interval when checking open conditions
SAMPLES_PER_INTERVAL = 16


def _check_invertible(mats, what):
    bad = ~(np.abs(det2(mats)) > INVERTIBILITY_RTOL * opnorm(mats) ** 2)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"{what}: matrix at index {idx} is numerically singular")


@dataclass(frozen=True)
class LinearCocycle:
    """Finite sequence of invertible 2x2 matrices over Z/nZ."""

    mats: np.ndarray  # (n, 2, 2)

    def __post_init__(self):
        mats = np.ascontiguousarray(np.asarray(self.mats, float))
        if mats.ndim != 3 or mats.shape[1:] != (2, 2) or mats.shape[0] < 1:
            raise ValueError("mats must have shape (n, 2, 2) with n >= 1")
        if not np.all(np.isfinite(mats)):
            raise ValueError("cocycle entries must be finite")
        _check_invertible(mats, "LinearCocycle")
        mats.setflags(write=False)
        object.__setattr__(self, "mats", mats)

    @property
    def period(self) -> int:
        return self.mats.shape[0]

    def shifted(self, k: int) -> "LinearCocycle":
        """Cyclic re-indexing i -> i + k."""
        return LinearCocycle(np.roll(self.mats, -k, axis=0))

    def __mul__(self, scalar):
        return LinearCocycle(self.mats * float(scalar))


def return_product(c: LinearCocycle) -> np.ndarray:
    """Return product mats[n-1] @ ... @ mats[0]."""
    return matmul_chain(c.mats)


def partial_products(c: LinearCocycle) -> np.ndarray:
    """Stack of partial products P_i = mats[i-1] @ ... @ mats[0], i = 0..n.

    P_0 = Id and P_n is the return product.
    """
    out = np.empty((c.period + 1, 2, 2))
    out[0] = np.eye(2)
    for i in range(c.period):
        out[i + 1] = c.mats[i] @ out[i]
    return out


def cocycle_distance(a: LinearCocycle, b: LinearCocycle) -> float:
    """sup over unit vectors of ||A(x) - B(x)||: max fiberwise operator norm."""
    if a.period != b.period:
        raise ValueError(f"period mismatch: {a.period} != {b.period}")
    return float(np.max(opnorm(a.mats - b.mats)))


@dataclass(frozen=True)
class CocyclePath:
    """One-parameter family of cocycles on a strictly increasing node grid.

    Interpolation between nodes is entrywise piecewise-linear; every node
    cocycle must share the same period, and interpolated cocycles remain
    invertible on a refinement grid (checked at construction).
    """

    nodes: np.ndarray       # (m,) strictly increasing parameters
    mats: np.ndarray        # (m, n, 2, 2)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, float))
        mats = np.ascontiguousarray(np.asarray(self.mats, float))
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("nodes must be a 1-d grid")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if mats.shape[:1] != nodes.shape or mats.ndim != 4 or mats.shape[2:] != (2, 2):
            raise ValueError("mats must have shape (m, n, 2, 2) matching nodes")
        if not np.all(np.isfinite(mats)):
            raise ValueError("path entries must be finite")
        for frac in np.linspace(0.0, 1.0, SAMPLES_PER_INTERVAL + 1):
            interp = mats[:-1] + frac * (mats[1:] - mats[:-1]) if len(nodes) > 1 else mats
            _check_invertible(interp, "CocyclePath (refinement grid)")
        nodes.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "mats", mats)

    @classmethod
    def from_cocycles(cls, nodes, cocycles) -> "CocyclePath":
        periods = {c.period for c in cocycles}
        if len(periods) != 1:
            raise ValueError("all node cocycles must share the same period")
        return cls(np.asarray(nodes, float), np.stack([c.mats for c in cocycles]))

    @property
    def t_lo(self) -> float:
        return float(self.nodes[0])

    @property
    def t_hi(self) -> float:
        return float(self.nodes[-1])

    @property
    def period(self) -> int:
        return self.mats.shape[1]

    def mats_at(self, t) -> np.ndarray:
        """Interpolated matrix stack at parameters t, shape t.shape + (n, 2, 2)."""
        t = np.asarray(t, float)
        j = np.clip(np.searchsorted(self.nodes, t, side="right") - 1, 0, len(self.nodes) - 2) \
            if len(self.nodes) > 1 else np.zeros(t.shape, int)
        if len(self.nodes) == 1:
            return np.broadcast_to(self.mats[0], t.shape + self.mats.shape[1:]).copy()
        t0, t1 = self.nodes[j], self.nodes[j + 1]
        frac = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        return self.mats[j] + frac[..., None, None, None] * (self.mats[j + 1] - self.mats[j])

    def at(self, t: float) -> LinearCocycle:
        return LinearCocycle(self.mats_at(float(t)))

    def dmats_dt(self, t) -> np.ndarray:
        """Entrywise derivative of the interpolation, one-sided from below at nodes."""
        t = np.asarray(t, float)
        if len(self.nodes) == 1:
            return np.zeros(t.shape + self.mats.shape[1:])
        j = np.clip(np.searchsorted(self.nodes, t, side="left") - 1, 0, len(self.nodes) - 2)
        dt = (self.nodes[j + 1] - self.nodes[j])[..., None, None, None]
        return (self.mats[j + 1] - self.mats[j]) / dt

    def node_cocycle(self, k: int) -> LinearCocycle:
        return LinearCocycle(self.mats[k])

    def arc_length(self) -> float:
        """Path length in the max-fiber operator-norm metric (PL: sum over segments)."""
        if len(self.nodes) == 1:
            return 0.0
        seg = np.max(opnorm(self.mats[1:] - self.mats[:-1]), axis=1)
        return float(np.sum(seg))

    def reversed(self) -> "CocyclePath":
        lo, hi = self.t_lo, self.t_hi
        return CocyclePath(lo + hi - self.nodes[::-1], self.mats[::-1])


def path_diameter(p: CocyclePath) -> float:
    """sup over s < t of dist(A_s, A_t).

    The distance along a bilinear segment pair is convex in each parameter,
    so the supremum is attained at node pairs.
    """
    m = len(p.nodes)
    best = 0.0
    for i in range(m):
        diff = p.mats[i + 1:] - p.mats[i]
        if diff.size:
            best = max(best, float(np.max(opnorm(diff))))
    return best


@dataclass(frozen=True)
class FlexReport:
    """Outcome of the six-condition flexibility check on a sample grid."""

    epsilon: float
    diameter: float
    lambda_max: float            # max over samples of the smaller return eigenvalue
    eig_path: np.ndarray         # (S, 3): t, eig_large, eig_small of the return product
    homothety_residual: float    # at t = -1
    homothety_ratio: float
    eig_one_residual: float      # at t = +1
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def summary(self) -> str:
        lines = [f"flexibility check (epsilon={self.epsilon:g})"]
        for name, ok in self.flags.items():
            lines.append(f"  [{'pass' if ok else 'FAIL'}] {name}")
        lines.append(f"  diameter={self.diameter:.6g}  lambda_max={self.lambda_max:.6g}")
        lines.append(f"  homothety residual={self.homothety_residual:.3g} ratio={self.homothety_ratio:.6g}")
        lines.append(f"  eigenvalue-one residual={self.eig_one_residual:.3g}")
        return "\n".join(lines)


def _sample_grid(nodes, per_interval=SAMPLES_PER_INTERVAL):
    out = [nodes[:1]]
    for a, b in zip(nodes[:-1], nodes[1:]):
        out.append(np.linspace(a, b, per_interval + 2)[1:])
    return np.concatenate(out)


def verify_flexible(p: CocyclePath, epsilon: float, base: LinearCocycle | None = None) -> FlexReport:
    """Check the six flexibility conditions of a path over [-1, 1].

    Conditions: (i) path diameter < epsilon; (ii) the t=0 cocycle equals the
    designated base; (iii) the return product at t=-1 is a homothety with
    positive ratio < 1; (iv) at every sampled t in (-1, 1) the return product
    has two distinct positive eigenvalues of modulus < 1; (v) the largest
    sampled value of the smaller eigenvalue is < 1; (vi) the return product
    at t=1 has a real eigenvalue equal to 1 within tolerance.
    """
    if abs(p.t_lo + 1.0) > 1e-12 or abs(p.t_hi - 1.0) > 1e-12:
        raise ValueError(f"path domain must be [-1, 1], got [{p.t_lo}, {p.t_hi}]")
    if not np.any(np.abs(p.nodes) <= 1e-12):
        raise ValueError("path must carry a node at t = 0")

    flags = {}
    diam = path_diameter(p)
    flags["diameter < epsilon"] = diam < epsilon

    if base is None:
        base = p.at(0.0)
    flags["t=0 equals base"] = cocycle_distance(p.at(0.0), base) <= 1e-12 * max(
        1.0, float(np.max(opnorm(base.mats)))
    )

    # products on the sample grid, batched over samples
    ts = _sample_grid(p.nodes)
    stacks = p.mats_at(ts)
    prods = np.broadcast_to(np.eye(2), (ts.size, 2, 2)).copy()
    for i in range(p.period):
        prods = stacks[:, i] @ prods

    m_lo = prods[0]
    c = 0.5 * float(tr2(m_lo))
    hom_res = float(opnorm(m_lo - c * np.eye(2)))
    flags["t=-1 homothety"] = (
        hom_res <= HOMOTHETY_RTOL * max(1.0, float(opnorm(m_lo))) and 0.0 < c < 1.0
    )

    tr = tr2(prods)
    dt = det2(prods)
    disc = tr * tr - 4.0 * dt
    sq = np.sqrt(np.maximum(disc, 0.0))
    lam_big = 0.5 * (tr + sq)
    lam_small = 0.5 * (tr - sq)
    interior = (ts > -1.0 + 1e-12) & (ts < 1.0 - 1e-12)
    # real-distinct via the relative discriminant; positive via exact signs
    ok_interior = (
        (disc > DISC_TOL * (tr * tr + 4.0 * np.abs(dt)))
        & (dt > 0.0)
        & (tr > 0.0)
        & (lam_big < 1.0)
    )
    flags["interior spectra distinct positive contracting"] = bool(
        np.all(ok_interior[interior])
    )

    lam_smaller_mod = np.where(disc >= 0, np.abs(lam_small), np.sqrt(np.maximum(dt, 0.0)))
    lambda_max = float(np.max(lam_smaller_mod))
    flags["max of smaller eigenvalue < 1"] = lambda_max < 1.0

    r1, r2, kind = eig2(prods[-1])
    if kind == "complex":
        eig_one_res = float(min(abs(r1 - 1.0), abs(r2 - 1.0)))
        real_pos = False
    else:
        cand = [r for r in (r1, r2)]
        eig_one_res = float(min(abs(r - 1.0) for r in cand))
        real_pos = any(abs(r - 1.0) <= EIG_ONE_TOL and r > 0 for r in cand)
    flags["t=1 eigenvalue one"] = real_pos and eig_one_res <= EIG_ONE_TOL

    eig_path = np.column_stack([ts, lam_big, lam_small])
    return FlexReport(
        epsilon=float(epsilon),
        diameter=diam,
        lambda_max=lambda_max,
        eig_path=eig_path,
        homothety_residual=hom_res,
        homothety_ratio=c,
        eig_one_residual=eig_one_res,
        flags=flags,
    )
