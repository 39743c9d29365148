"""Retardable cocycles and the insertion of homothetic fundamental domains.

A retardable cocycle is linear on a round band [R1, R3] where the fiber maps
compose to a contracting homothety over one period, with orbit confinement
keeping partial images of the fundamental annulus inside the band.  The
m-retard replaces the inner dynamics by its conjugate under m powers of the
homothety, opening m extra linear fundamental domains.  Conjugation by a
scalar leaves derivatives untouched, so retardation preserves derivative
perturbation bounds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import CocyclePath, LinearCocycle, cocycle_distance, return_product, verify_flexible
from .geometry import TorusChart, apply_mat_lp
from .linalg2 import inv2, opnorm, sigma_min, tr2
from .realization import (
    GridSpec,
    RadialCocycle,
    Reparam,
    _arc_spaced_table,
    _CocycleMapsBase,
    _refine_table,
    certify_realization,
)

__all__ = [
    "RetardableSpec",
    "RetardedCocycle",
    "RetardVerdict",
    "check_retardable",
    "retard",
    "homothetic_region",
    "check_retard_perturbation_bound",
    "realize_witness",
    "RealizedWitness",
]


@dataclass(frozen=True)
class RetardableSpec:
    """Round-band data of a retardable cocycle, radii kept in log form.

    0 < R1 < R2 < R3; the fiber maps equal ``factors`` on the band
    {R1 <= |x| <= R3}, whose return product is lam * Id with 0 < lam < 1.
    The homothetic region is the annulus [lam R2, R2].
    """

    log_R1: float
    log_R2: float
    log_R3: float
    lam: float
    factors: LinearCocycle

    def __post_init__(self):
        if not (self.log_R1 < self.log_R2 < self.log_R3):
            raise ValueError("need R1 < R2 < R3")
        if not (0.0 < self.lam < 1.0):
            raise ValueError("homothety rate must lie in (0, 1)")

    @property
    def R1(self) -> float:
        return float(np.exp(self.log_R1))

    @property
    def R2(self) -> float:
        return float(np.exp(self.log_R2))

    @property
    def R3(self) -> float:
        return float(np.exp(self.log_R3))

    @property
    def depth(self) -> float:
        return -float(np.log(self.lam))

    def chart(self) -> TorusChart:
        return TorusChart(self.log_R2, self.lam)


@dataclass
class RetardVerdict:
    band_linear: bool
    confinement: bool
    homothetic_return: bool
    max_band_dev: float
    max_return_dev: float
    witness: tuple | None

    @property
    def passed(self) -> bool:
        return self.band_linear and self.confinement and self.homothetic_return

    def summary(self) -> str:
        bits = [
            f"retardable check ({'pass' if self.passed else 'FAIL'})",
            f"  [{'pass' if self.band_linear else 'FAIL'}] fiber maps linear on the band"
            f" (max dev {self.max_band_dev:.3g})",
            f"  [{'pass' if self.confinement else 'FAIL'}] partial orbits of the fundamental"
            " annulus stay in the band",
            f"  [{'pass' if self.homothetic_return else 'FAIL'}] return map on the annulus is"
            f" x -> lam x (max dev {self.max_return_dev:.3g})",
        ]
        if self.witness is not None:
            bits.append(f"  witness: {self.witness}")
        return "\n".join(bits)


def _band_grid(spec: RetardableSpec, radii_per_decade=16, angles=64, lo=None, hi=None):
    lo = spec.log_R1 if lo is None else lo
    hi = spec.log_R3 if hi is None else hi
    n_r = max(2, int(np.ceil((hi - lo) / np.log(10.0) * radii_per_decade)))
    rhos = np.linspace(lo, hi, n_r)
    angs = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    rr, aa = np.meshgrid(rhos, angs, indexing="ij")
    return np.stack([rr.ravel(), aa.ravel()], axis=-1)


def check_retardable(rc: _CocycleMapsBase, spec: RetardableSpec,
                     radii_per_decade: int = 16, angles: int = 64) -> RetardVerdict:
    """Verify the three band conditions on a sampled grid.

    Linearity is compared against ``spec.factors`` pointwise; confinement
    tracks partial orbits seeded on the fundamental annulus [lam R2, R2];
    the homothetic return is evaluated directly on the same annulus.
    """
    n = rc.period
    ret = return_product(spec.factors)
    lam_dev = float(opnorm(ret - spec.lam * np.eye(2)))
    witness = None

    # (1) linearity on the band
    lp = _band_grid(spec, radii_per_decade, angles)
    max_band = 0.0
    band_ok = lam_dev <= 1e-9 * max(1.0, spec.lam)
    if not band_ok:
        witness = ("return product of band factors not the stated homothety", lam_dev)
    for i in range(n):
        got = rc.fiber_lp(i, lp)
        want = apply_mat_lp(spec.factors.mats[i], lp)
        dev = np.max(np.abs(got - want))
        max_band = max(max_band, float(dev))
        if dev > 1e-9:
            band_ok = False
            k = int(np.argmax(np.max(np.abs(got - want), axis=-1)))
            witness = witness or ("band linearity", i, tuple(lp[k]))

    # (2) confinement of partial orbits from the fundamental annulus
    ann = _band_grid(spec, radii_per_decade, angles,
                     lo=spec.log_R2 - spec.depth, hi=spec.log_R2)
    conf_ok = True
    cur = ann.copy()
    for i in range(n):
        inside = (cur[:, 0] >= spec.log_R1 - 1e-9) & (cur[:, 0] <= spec.log_R3 + 1e-9)
        if not np.all(inside):
            conf_ok = False
            k = int(np.argmax(~inside))
            witness = witness or ("confinement", i, tuple(ann[k]))
            break
        cur = rc.fiber_lp(i, cur)

    # (3) homothetic return on the annulus
    out = rc.return_lp(ann.copy())
    dev_rho = np.abs(out[:, 0] - ann[:, 0] - np.log(spec.lam))
    dphi = (out[:, 1] - ann[:, 1] + np.pi) % (2 * np.pi) - np.pi
    max_ret = float(max(dev_rho.max(), np.abs(dphi).max()))
    ret_ok = max_ret <= 1e-9
    if not ret_ok:
        k = int(np.argmax(np.maximum(dev_rho, np.abs(dphi))))
        witness = witness or ("homothetic return", tuple(ann[k]))

    return RetardVerdict(band_ok, conf_ok, ret_ok, max_band, max_ret, witness)


class RetardedCocycle(_CocycleMapsBase):
    """m-retard of a retardable cocycle.

    Piecewise: equal to the base outside B(R3); the band linear maps on
    lam^m R3 < |x| < R3; the scalar conjugate A^m f_i A^{-m} inside.  The
    conjugation is evaluated lazily as a log-radius shift, exact at any m.
    """

    def __init__(self, base: _CocycleMapsBase, spec: RetardableSpec, m: int):
        if m < 0:
            raise ValueError("retard count m must be >= 0")
        self.base = base
        self.spec = spec
        self.m = int(m)
        self._shift = self.m * np.log(spec.lam)
        self._inv_factors = inv2(spec.factors.mats)
        from .cocycle import partial_products
        from .linalg2 import sigma_min as _smin

        parts = partial_products(spec.factors)
        self._env = max(float(np.log(np.max(opnorm(parts)))),
                        float(-np.log(np.min(_smin(parts))))) + 1e-9

    @property
    def period(self) -> int:
        return self.base.period

    def _regions(self, lp):
        rho = lp[..., 0]
        outer = rho > self.spec.log_R3
        inner = rho <= self.spec.log_R3 + self._shift
        band = ~outer & ~inner
        return outer, band, inner

    def fiber_lp(self, i, lp):
        lp = np.atleast_2d(np.asarray(lp, float))
        outer, band, inner = self._regions(lp)
        out = np.empty_like(lp)
        if np.any(outer):
            out[outer] = self.base.fiber_lp(i, lp[outer])
        if np.any(band):
            out[band] = apply_mat_lp(self.spec.factors.mats[i], lp[band])
        if np.any(inner):
            sub = lp[inner].copy()
            sub[:, 0] -= self._shift
            sub = self.base.fiber_lp(i, sub)
            sub[:, 0] += self._shift
            out[inner] = sub
        return out

    def fast_return_shift(self, rho_lo: float, rho_hi: float):
        """ln(lambda) when whole period orbits of [rho_lo, rho_hi] stay linear."""
        s = self.base.fast_return_shift(rho_lo, rho_hi)
        if s is not None:
            return s
        ok = (rho_lo - self._env > self.spec.log_R1 + self._shift
              and rho_hi + self._env <= self.spec.log_R3)
        return float(np.log(self.spec.lam)) if ok else None

    def fiber_inv_lp(self, i, lp):
        """Piecewise inverse: try each region's inverse, keep the consistent one.

        The linear-band candidate goes first: it is exact, cheap, and settles
        every point of the inserted fundamental domains.
        """
        lp = np.atleast_2d(np.asarray(lp, float))
        out = np.empty_like(lp)
        done = np.zeros(lp.shape[0], bool)

        cand = apply_mat_lp(self._inv_factors[i], lp)
        ok = (cand[:, 0] > self.spec.log_R3 + self._shift) & (
            cand[:, 0] <= self.spec.log_R3 + 1e-12)
        out[ok] = cand[ok]
        done |= ok

        if not np.all(done):
            cand = self.base.fiber_inv_lp(i, lp[~done])
            ok2 = cand[:, 0] > self.spec.log_R3
            sel = np.flatnonzero(~done)[ok2]
            out[sel] = cand[ok2]
            done[sel] = True

        if not np.all(done):
            sub = lp[~done].copy()
            sub[:, 0] -= self._shift
            sub = self.base.fiber_inv_lp(i, sub)
            sub[:, 0] += self._shift
            out[~done] = sub
        return out

    def fiber_jac_lp(self, i, lp):
        lp = np.atleast_2d(np.asarray(lp, float))
        outer, band, inner = self._regions(lp)
        out = np.empty(lp.shape[:1] + (2, 2))
        if np.any(outer):
            out[outer] = self.base.fiber_jac_lp(i, lp[outer])
        if np.any(band):
            out[band] = self.spec.factors.mats[i]
        if np.any(inner):
            sub = lp[inner].copy()
            sub[:, 0] -= self._shift
            out[inner] = self.base.fiber_jac_lp(i, sub)
        return out

    def origin_data(self):
        plateau_log, coc = self.base.origin_data()
        if plateau_log is None:
            return None, coc
        return plateau_log + self._shift, coc

    def chart(self) -> TorusChart:
        return self.spec.chart()


def retard(rc: _CocycleMapsBase, spec: RetardableSpec, m: int,
           verify: bool = False) -> RetardedCocycle:
    """m-retard of a retardable cocycle; the 0-retard is the base itself."""
    if verify:
        verdict = check_retardable(rc, spec)
        if not verdict.passed:
            raise ValueError("cocycle is not retardable:\n" + verdict.summary())
    return RetardedCocycle(rc, spec, m)


def homothetic_region(ret: RetardedCocycle) -> tuple[float, float]:
    """Log-radii (lo, hi) of the certified homothetic region [lam^{m+1} R2, R2]."""
    spec = ret.spec
    return (spec.log_R2 + (ret.m + 1) * np.log(spec.lam), spec.log_R2)


def check_retard_perturbation_bound(ret: RetardedCocycle, reference: LinearCocycle,
                                    epsilon: float, radii_per_decade: int = 16,
                                    angles: int = 64) -> dict:
    """Sample max ||Df_{i,m}(x) - A_i|| over all regions and compare to epsilon.

    Scalar conjugation preserves derivatives, so the retarded bound equals
    the base bound; the grid covers outer, band and conjugated-inner regions.
    """
    spec = ret.spec
    pad = np.log(10.0)
    plateau_log, _ = ret.origin_data()
    lo = (plateau_log - pad) if plateau_log is not None else spec.log_R1 + ret._shift - pad
    hi = spec.log_R3 + pad
    n_r = max(2, int(np.ceil((hi - lo) / np.log(10.0) * radii_per_decade)))
    rhos = np.linspace(lo, hi, n_r)
    angs = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    rr, aa = np.meshgrid(rhos, angs, indexing="ij")
    lp = np.stack([rr.ravel(), aa.ravel()], axis=-1)
    worst, wit = -1.0, None
    for i in range(ret.period):
        dev = opnorm(ret.fiber_jac_lp(i, lp) - reference.mats[i])
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst, wit = float(dev[k]), (float(lp[k, 0]), float(lp[k, 1]), i)
    return {"passed": worst < epsilon, "max_dev": worst, "witness": wit,
            "epsilon": float(epsilon)}


# ---------------------------------------------------------------------------
# realizing a flexibility witness as a retardable cocycle


@dataclass
class RealizedWitness:
    """Radial realization of a flexibility witness with its certified band."""

    rc: RadialCocycle
    spec: RetardableSpec
    eta: float
    delta: float
    diameter: float
    epsilon: float
    epsilon1: float
    certificate: object

    def summary(self) -> str:
        return (
            f"realized witness: period {self.rc.period}, eta={self.eta:g}, "
            f"delta={self.delta:g}, epsilon1={self.epsilon1:g}\n"
            f"  band log-radii: R1={self.spec.log_R1:.4g} R2={self.spec.log_R2:.4g} "
            f"R3={self.spec.log_R3:.4g}, lam={self.spec.lam:.6g}\n"
            f"  inner plateau log-radius: {self.rc.theta.inner_log:.4g}\n"
            + self.certificate.summary()
        )


def _traversal_path(witness: CocyclePath, eta: float):
    """Concatenate the witness legs (1-eta -> -1) then (-1 -> 0) over s in [0, 1].

    Returns the path and the traversal position s* of the homothety visit.
    """
    nodes = witness.nodes
    keep_a = nodes[nodes <= 1.0 - eta + 1e-12][::-1]          # 1-eta down to -1
    if keep_a[0] < 1.0 - eta - 1e-12:
        keep_a = np.concatenate([[1.0 - eta], keep_a])
    keep_b = nodes[(nodes > -1.0 + 1e-12) & (nodes <= 1e-12)]  # up to 0
    ts = np.concatenate([keep_a, keep_b])
    stacks = witness.mats_at(ts)
    s = np.linspace(0.0, 1.0, ts.size)
    s_star = float(s[keep_a.size - 1])
    return CocyclePath(s, stacks), s_star


def realize_witness(witness: CocyclePath, epsilon: float, epsilon1: float | None = None,
                    eta: float = 1.0 / 8.0, delta: float | None = None,
                    calibrate: bool = True) -> RealizedWitness:
    """Turn a flexibility witness path into a retardable radial cocycle.

    The radial profile runs (inward) base -> homothety -> near-eigenvalue-one
    cocycle, with a linear plateau [R1, R3] at the homothety visit.  Band
    radii are sized from the actual partial products of the homothety
    cocycle; delta is halved until the realization certificate passes.
    """
    report = verify_flexible(witness, epsilon)
    if not report.passed:
        raise ValueError("witness path fails the flexibility check:\n" + report.summary())
    diam = report.diameter
    if epsilon1 is None:
        epsilon1 = min(0.25 * epsilon, 0.45 * (epsilon - diam))
    if epsilon1 <= 0:
        raise ValueError("no derivative budget left: diameter too close to epsilon")

    trav, s_star = _traversal_path(witness, eta)
    hom = trav.at(s_star)
    lam = 0.5 * float(tr2(return_product(hom)))

    # partial-product envelope of the homothety cocycle sizes the band
    from .cocycle import partial_products

    parts = partial_products(hom)
    c_up = float(np.max(opnorm(parts)))
    c_dn = float(np.min(sigma_min(parts)))

    # arc lengths of the two legs in traversal parameter
    seg = np.max(opnorm(trav.mats[1:] - trav.mats[:-1]), axis=1)
    k_star = int(np.round(s_star * (len(trav.nodes) - 1)))
    arc_a = float(np.sum(seg[:k_star]))   # inner leg: s in [0, s*]
    arc_b = float(np.sum(seg[k_star:]))   # outer leg: s in [s*, 1]

    delta0 = delta if delta is not None else 0.5 * epsilon1
    tries = 10
    d = delta0
    last_cert = None
    uniformity = None
    for _ in range(tries):
        log_R3 = -(arc_b / d) * (1.0 + 1e-6) - 0.05
        log_R2 = log_R3 - np.log(c_up * 1.05)
        log_R1 = log_R2 + np.log(lam) + np.log(c_dn / 1.05)
        log_rin = log_R1 - (arc_a / d) * (1.0 + 1e-6) - 0.05

        bp_a, va = _arc_spaced_table(trav.nodes[: k_star + 1], seg[:k_star], log_rin, log_R1)
        bp_b, vb = _arc_spaced_table(trav.nodes[k_star:], seg[k_star:], log_R3, 0.0)
        log_bp = np.concatenate([bp_a, bp_b])
        vals = np.concatenate([va, vb])
        log_bp, vals = _refine_table(log_bp, vals)
        theta = Reparam(log_bp, vals, d)

        rc = RadialCocycle(trav, theta, epsilon1, uniformity=uniformity)
        uniformity = (rc.K_bound, rc.k_contract)
        spec = RetardableSpec(log_R1, log_R2, log_R3, lam, hom)
        rc.band = spec
        if not calibrate:
            cert = certify_realization(rc, GridSpec(orbits=200))
            return RealizedWitness(rc, spec, eta, d, diam, epsilon, epsilon1, cert)
        cert = certify_realization(rc, GridSpec(per_decade=8, angles=32, orbits=200))
        last_cert = cert
        if cert.passed:
            return RealizedWitness(rc, spec, eta, d, diam, epsilon, epsilon1, cert)
        # residuals scale like delta: jump straight past the measured excess
        excess = max(cert.max_onestep, cert.max_jstep) / epsilon1
        d /= 2.0 * max(1.0, excess)
    raise ArithmeticError(
        "realization failed to certify after delta calibration:\n" + last_cert.summary()
    )
