"""Matrix-level manufacture of flexible cocycles and their witness paths.

The ingredients: a diagonal saddle block P with weak contraction, a homothety
block Q, and two user-supplied transition matrices.  Annihilation paths
telescope the transitions away so the assembled return product is a scalar
times a diagonal power; rotation insertions on designated homothety slots
drive the return product to an exact homothety at one end of the parameter
path, while a global geometric rescale drives the weak eigenvalue to exactly
one at the other end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cocycle import CocyclePath, LinearCocycle, return_product, cocycle_distance
from .linalg2 import (
    det2,
    eig2,
    inv2,
    matmul_chain,
    opnorm,
    polar2,
    rotation,
    tr2,
)

__all__ = [
    "TransitionKit",
    "ScheduleL",
    "ScheduleInfeasible",
    "AnnihilationResult",
    "FlexAssembly",
    "homoper_path",
    "annihilation_path",
    "signed_reduction",
    "homothety_from_complex",
    "diagonalizing_index",
    "angle_distortion_check",
    "plan_schedule",
    "assemble_flex_cocycle",
    "build_flex_witness",
]

_D = np.diag([1.0, -1.0])


def homoper_path(lambda1: float, lambda2: float, t: float) -> np.ndarray:
    """M(t) = R(-t) diag(l1, l2) R(t) diag(l1, l2).

    det M = (l1 l2)^2 independent of t; tr M = (l1^2+l2^2) cos^2 t
    + 2 l1 l2 sin^2 t, strictly decreasing on [0, pi/2].  For t in [0, pi/2)
    the spectrum is a distinct positive contracting pair; at t = pi/2 the
    matrix is the homothety of ratio l1 l2.
    """
    if not (1.0 > lambda1 > lambda2 > 0.0):
        raise ValueError("need 1 > lambda1 > lambda2 > 0")
    d = np.diag([lambda1, lambda2])
    return rotation(-t) @ d @ rotation(t) @ d


class ScheduleInfeasible(ValueError):
    """Raised when no schedule meets the rescale budget; carries eps_min."""

    def __init__(self, msg, eps_min):
        super().__init__(msg)
        self.eps_min = eps_min


@dataclass(frozen=True)
class AnnihilationResult:
    """Telescoping step sequence J_k with each J_k within eps of the homothety.

    ``side="right"`` certifies T @ (J_{h-1} ... J_0) = Q^h, ``side="left"``
    certifies (J_{h-1} ... J_0) @ T = Q^h; scalar commutation makes the same
    sequence work for both, only the certified identity differs.
    """

    factors: np.ndarray       # (h, 2, 2), time order
    h: int
    q_ratio: float
    side: str
    max_step_dist: float      # max_k ||J_k - Q||
    residual: float           # telescoping residual against Q^h

    @property
    def product(self) -> np.ndarray:
        return matmul_chain(self.factors)


def _interp_to_identity(T):
    """Path I(tau) in GL+(2) from T to Id: rotation angle linear, symmetric
    eigenvalues log-linear.  Vectorized over tau."""
    angle, v, s = polar2(T)
    logs = np.log(s)

    def I(tau):
        tau = np.asarray(tau, float)
        d = np.exp((1.0 - tau)[..., None] * logs)           # (..., 2)
        sym = np.einsum("ij,...j,kj->...ik", v, d, v)
        return rotation((1.0 - tau) * angle) @ sym

    return I


def _ann_steps(T, h):
    I = _interp_to_identity(T)
    grid = I(np.arange(h + 1) / h)
    return grid[1:] @ inv2(grid[:-1])


def annihilation_path(T: np.ndarray, q_ratio: float, epsilon: float,
                      side: str = "right") -> AnnihilationResult:
    """Split T along a path to the identity into h near-homothety steps.

    With J_k = I((k+1)/h) I(k/h)^{-1} Q the product telescopes exactly:
    T (prod J) = Q^h (and (prod J) T = Q^h, Q being scalar).  h is the
    smallest step count with every ||J_k - Q|| < epsilon.
    """
    T = np.asarray(T, float)
    if det2(T) <= 0:
        raise ValueError("annihilation requires det(T) > 0; apply the signed reduction first")
    if not (0.0 < q_ratio < 1.0):
        raise ValueError("homothety ratio must lie in (0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")

    def worst(h):
        return float(np.max(opnorm(_ann_steps(T, h) - np.eye(2)))) * q_ratio

    h = 1
    while worst(h) >= epsilon:
        h *= 2
        if h > 1 << 22:
            raise ValueError("annihilation step count diverged")
    lo = h // 2 if h > 1 else 1
    while lo < h:
        mid = (lo + h) // 2
        if worst(mid) < epsilon:
            h = mid
        else:
            lo = mid + 1
    steps = _ann_steps(T, h)
    factors = steps * q_ratio
    prod = matmul_chain(factors)
    target = q_ratio ** h * np.eye(2)
    lhs = T @ prod if side == "right" else prod @ T
    residual = float(opnorm(lhs - target))
    return AnnihilationResult(
        factors=factors,
        h=h,
        q_ratio=float(q_ratio),
        side=side,
        max_step_dist=float(np.max(opnorm(factors - q_ratio * np.eye(2)))),
        residual=residual,
    )


@dataclass(frozen=True)
class TransitionKit:
    """Inputs of the assembly: saddle block P, homothety block Q, transitions."""

    lambda1: float
    lambda2: float
    r: float
    T1: np.ndarray
    T2: np.ndarray

    def __post_init__(self):
        if not (1.0 > abs(self.lambda1) > abs(self.lambda2) > 0.0):
            raise ValueError("need 1 > |lambda1| > |lambda2| > 0")
        if not (0.0 < self.r < 1.0):
            raise ValueError("need homothety ratio in (0, 1)")
        for name in ("T1", "T2"):
            t = np.ascontiguousarray(np.asarray(getattr(self, name), float))
            if t.shape != (2, 2) or abs(det2(t)) < 1e-12 * max(opnorm(t) ** 2, 1e-30):
                raise ValueError(f"{name} must be an invertible 2x2 matrix")
            t.setflags(write=False)
            object.__setattr__(self, name, t)

    @property
    def P(self) -> np.ndarray:
        return np.diag([self.lambda1, self.lambda2])

    @property
    def Q(self) -> np.ndarray:
        return self.r * np.eye(2)


@dataclass(frozen=True)
class SignedPlan:
    """Orientation bookkeeping for the assembly.

    When exactly one transition reverses orientation it is replaced by the
    composite T P^w T' Q T, restoring a positive determinant.  When both
    reverse, the annihilation runs against T diag(1,-1); the involution
    commutes with P and Q so the collapsed product is unchanged.  Negative
    saddle entries force even P-block lengths.
    """

    t1_eff: np.ndarray
    t2_eff: np.ndarray
    with_involution: bool
    l13_even: bool
    substituted: str  # "", "T1", or "T2"


def signed_reduction(kit: TransitionKit) -> SignedPlan:
    d1, d2 = float(det2(kit.T1)), float(det2(kit.T2))
    l13_even = kit.lambda1 < 0 or kit.lambda2 < 0
    w = 2 if l13_even else 1
    p_w = np.linalg.matrix_power(kit.P, w)
    if d1 > 0 and d2 > 0:
        return SignedPlan(kit.T1, kit.T2, False, l13_even, "")
    if d1 < 0 and d2 < 0:
        return SignedPlan(kit.T1, kit.T2, True, l13_even, "")
    if d1 < 0:
        t1 = kit.T1 @ p_w @ kit.T2 @ kit.Q @ kit.T1
        return SignedPlan(t1, kit.T2, False, l13_even, "T1")
    t2 = kit.T2 @ p_w @ kit.T1 @ kit.Q @ kit.T2
    return SignedPlan(kit.T1, t2, False, l13_even, "T2")


@dataclass(frozen=True)
class ScheduleL:
    """Block lengths of the assembled cocycle plus derived annihilation data."""

    l1: int
    l2: int
    l3: int
    l4: int
    i1: int            # length of the L-block paired with T2
    i2: int            # length of the J-block paired with T1
    i3: int            # rotation-slot count per homothety block
    c1: float
    c2: float
    mu_L: float        # per-period geometric mean of the weak eigenvalue
    nu: float
    ann_L: AnnihilationResult
    ann_J: AnnihilationResult
    plan: SignedPlan

    def __post_init__(self):
        if self.l1 != self.l3:
            raise ValueError("schedule requires l1 = l3")
        if (self.l1, self.l2) == (self.l3, self.l4):
            raise ValueError("schedule requires (l1, l2) != (l3, l4)")
        if not (self.l2 > self.i1 + self.i2 + self.i3 and self.l4 > self.i1 + self.i2 + self.i3):
            raise ValueError("schedule requires l2, l4 > i1 + i2 + i3")
        if self.plan.l13_even and self.l1 % 2:
            raise ValueError("negative saddle entries require even l1 = l3")
        if not self.mu_L > 1.0 - self.nu:
            raise ValueError("schedule violates mu_L > 1 - nu")

    @property
    def period(self) -> int:
        return self.l1 + self.l2 + self.l3 + self.l4 + 4


def _rotation_slot_budget(r, epsilon):
    i3 = 1
    while 2.0 * r * np.sin(np.pi / (4.0 * i3)) >= 0.5 * epsilon:
        i3 += 1
        if i3 > 1 << 20:
            raise ValueError("rotation slot search diverged")
    return i3


def plan_schedule(kit: TransitionKit, epsilon: float) -> ScheduleL:
    """Choose annihilation lengths, rotation budget and block lengths.

    The rescale budget: multiplying every factor by a ratio below
    (1-nu)^{-1} must stay an epsilon/2 perturbation, and the per-period weak
    eigenvalue mean mu_L must exceed 1 - nu.  Block lengths are the smallest
    meeting both.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    plan = signed_reduction(kit)
    r = kit.r
    eps_ann = min(0.5 * epsilon, 0.4 * r)
    tgt_J = plan.t1_eff @ _D if plan.with_involution else plan.t1_eff
    tgt_L = _D @ plan.t2_eff if plan.with_involution else plan.t2_eff
    ann_J = annihilation_path(tgt_J, r, eps_ann, side="left")
    ann_L = annihilation_path(tgt_L, r, eps_ann, side="right")
    i1, i2 = ann_L.h, ann_J.h
    i3 = _rotation_slot_budget(r, epsilon)

    k_est = max(
        1.0,
        abs(kit.lambda1),
        float(opnorm(plan.t1_eff)),
        float(opnorm(plan.t2_eff)),
        float(np.max(opnorm(ann_J.factors))),
        float(np.max(opnorm(ann_L.factors))),
    )
    nu = 1.0 - 1.0 / (1.0 + 0.5 * epsilon / k_est)

    a, b, c = -np.log(r), -np.log(abs(kit.lambda1)), -np.log(1.0 - nu)
    l2 = i1 + i2 + i3 + 1
    l4 = l2 + 1
    if c <= b:
        eps_min = 2.0 * k_est * (1.0 / abs(kit.lambda1) - 1.0)
        raise ScheduleInfeasible(
            f"rescale budget infeasible: |lambda1|={abs(kit.lambda1):g} <= 1-nu={1 - nu:g}; "
            f"minimal achievable epsilon ~ {eps_min:g}",
            eps_min,
        )
    l1 = max(1, int(np.ceil(((l2 + l4) * (a - c) - 4.0 * c) / (2.0 * (c - b)))) + 1)
    if plan.l13_even and l1 % 2:
        l1 += 1

    def mu_of(l1_):
        n = 2 * l1_ + l2 + l4 + 4
        return np.exp(((l2 + l4) * np.log(r) + 2.0 * l1_ * np.log(abs(kit.lambda1))) / n)

    step = 2 if plan.l13_even else 1
    while mu_of(l1) <= 1.0 - nu:
        l1 += step
        if l1 > 10 ** 7:
            raise ScheduleInfeasible("schedule search diverged", float("nan"))

    return ScheduleL(
        l1=l1, l2=l2, l3=l1, l4=l4,
        i1=i1, i2=i2, i3=i3,
        c1=r ** i1, c2=r ** i2,
        mu_L=float(mu_of(l1)), nu=float(nu),
        ann_L=ann_L, ann_J=ann_J, plan=plan,
    )


@dataclass(frozen=True)
class FlexAssembly:
    """Assembled base cocycle plus the slot layout the witness path perturbs."""

    cocycle: LinearCocycle
    kit: TransitionKit
    sched: ScheduleL
    slot_signs: np.ndarray       # (n,) 0 for plain factors, +-1 for rotation slots
    return_residual: float       # against the collapsed scalar * Q-power * P-power

    @property
    def period(self) -> int:
        return self.cocycle.period


def _factor_list(kit: TransitionKit, sched: ScheduleL):
    """Time-ordered factors at the base parameter, plus rotation-slot signs."""
    p, q = kit.P, kit.r * np.eye(2)
    plan = sched.plan
    factors, signs = [], []

    def put(m, s=0):
        factors.append(np.asarray(m, float))
        signs.append(s)

    for half, (l_p, l_q) in enumerate(((sched.l1, sched.l2), (sched.l3, sched.l4))):
        for _ in range(l_p):
            put(p)
        put(plan.t1_eff)
        for j in sched.ann_J.factors:
            put(j)
        for _ in range(l_q - sched.i1 - sched.i2 - sched.i3):
            put(q)
        for _ in range(sched.i3):
            put(q, +1 if half == 0 else -1)
        for l in sched.ann_L.factors:
            put(l)
        put(plan.t2_eff)
    return np.stack(factors), np.asarray(signs, int)


def assemble_flex_cocycle(kit: TransitionKit, sched: ScheduleL) -> FlexAssembly:
    """Interleave P-blocks, annihilation blocks and Q-blocks per the schedule.

    Certifies that the return product collapses to
    (c1 c2)^2 Q^{l2+l4-2(i1+i2)} P^{l1+l3}.
    """
    factors, signs = _factor_list(kit, sched)
    coc = LinearCocycle(factors)
    scalar = (sched.c1 * sched.c2) ** 2 * kit.r ** (
        sched.l2 + sched.l4 - 2 * (sched.i1 + sched.i2)
    )
    target = scalar * np.linalg.matrix_power(kit.P, sched.l1 + sched.l3)
    residual = float(opnorm(return_product(coc) - target))
    if residual > 1e-10 * max(1.0, float(opnorm(target))):
        raise ArithmeticError(f"assembled return product off target by {residual:g}")
    return FlexAssembly(coc, kit, sched, signs, residual)


def witness_mats_at(asm: FlexAssembly, t: float) -> np.ndarray:
    """Factor stack of the witness path at parameter t in [-1, 1].

    For t >= 0 every factor is rescaled by mu_L^{-t} so the weak return
    eigenvalue interpolates geometrically to exactly 1.  For t < 0 the
    designated homothety slots become R(+-pi t / (2 i3)) Q.
    """
    base = asm.cocycle.mats
    if t >= 0.0:
        return base * asm.sched.mu_L ** (-t)
    ang = np.pi * t / (2.0 * asm.sched.i3)
    out = base.copy()
    for k in np.nonzero(asm.slot_signs)[0]:
        out[k] = rotation(asm.slot_signs[k] * ang) @ base[k]
    return out


def build_flex_witness(kit: TransitionKit, sched: ScheduleL, epsilon: float,
                       nodes_per_side: int = 32) -> CocyclePath:
    """Two-sided flexibility witness path on a node grid over [-1, 1].

    The path passes ``verify_flexible`` at the requested epsilon: rotation
    and rescale branches each stay strictly within epsilon/2 of the base.
    """
    asm = assemble_flex_cocycle(kit, sched)
    worst_scale = (1.0 / sched.mu_L - 1.0) * float(np.max(opnorm(asm.cocycle.mats)))
    if worst_scale >= 0.5 * epsilon:
        raise ScheduleInfeasible(
            f"rescale branch size {worst_scale:g} >= epsilon/2; "
            f"minimal achievable epsilon ~ {2.0 * worst_scale:g}",
            2.0 * worst_scale,
        )
    ts = np.linspace(-1.0, 1.0, 2 * nodes_per_side + 1)
    stacks = np.stack([witness_mats_at(asm, float(t)) for t in ts])
    return CocyclePath(ts, stacks)


# ---------------------------------------------------------------------------
# homothety creation from a complex-eigenvalue block


@dataclass(frozen=True)
class HomothetyResult:
    """Per-step nudged power of a spiral block, closed by an annihilation tail."""

    N: int
    nudge: float                  # signed angle added to each of the N steps
    factors: np.ndarray           # (1 + N + h, 2, 2) time order: T, steps, tail
    ratio: float                  # homothety ratio of the certified product
    offdiag_residual: float
    max_step_perturbation: float

    @property
    def product(self) -> np.ndarray:
        return matmul_chain(self.factors)


def _real_normal_form(B):
    """S with S^-1 B S = rho R(ang); the eigenvector phase minimizing cond(S)."""
    vals, vecs = np.linalg.eig(B)
    k = int(np.argmax(vals.imag))
    w = vecs[:, k]
    best = None
    for theta in np.linspace(0.0, np.pi, 91):
        z = w * np.exp(1j * theta)
        s = np.column_stack([z.real, z.imag])
        d = det2(s)
        if abs(d) < 1e-14:
            continue
        s = s / np.sqrt(abs(d))
        kappa = float(opnorm(s) * opnorm(inv2(s)))
        if best is None or kappa < best[0]:
            best = (kappa, s)
    kappa, s = best
    lam = vals[k]
    rho = abs(lam)
    ang = float(np.arctan2((inv2(s) @ B @ s)[1, 0], (inv2(s) @ B @ s)[0, 0]))
    return s, kappa, rho, ang


def homothety_from_complex(B: np.ndarray, T: np.ndarray, epsilon: float) -> HomothetyResult:
    """Nudge N spiral steps so their product is the homothety rho^N Id, then
    annihilate the transition against it.

    B must have a non-real contracting spectrum.  Each returned step is
    within epsilon of its unperturbed factor (B for the spiral steps, the
    homothety for the tail).
    """
    B = np.asarray(B, float)
    T = np.asarray(T, float)
    _, _, kind = eig2(B)
    if kind != "complex":
        raise ValueError("block must have a non-real spectrum")
    if not det2(B) < 1.0:
        raise ValueError("block must be contracting")
    s, kappa, rho, ang = _real_normal_form(B)
    s_inv = inv2(s)

    beta_max = 2.0 * np.arcsin(min(1.0, 0.45 * epsilon / (rho * kappa)))
    N = None
    for cand in range(1, int(np.ceil(np.pi / beta_max)) + 2):
        d = np.remainder(cand * ang, 2.0 * np.pi)
        d = d - 2.0 * np.pi if d > np.pi else d
        if abs(d) / cand <= beta_max:
            N, nudge = cand, -d / cand
            break
    if N is None:
        raise ArithmeticError("angle rounding search failed")

    step = s @ (rho * rotation(ang + nudge)) @ s_inv
    steps = np.broadcast_to(step, (N, 2, 2)).copy()
    max_pert = float(opnorm(step - B))
    if max_pert >= epsilon:
        raise ArithmeticError(f"step perturbation {max_pert:g} exceeds epsilon")

    q_ratio = rho ** N
    sc = 0.5 * tr2(T)
    if opnorm(T - sc * np.eye(2)) <= 1e-12 * max(1.0, opnorm(T)):
        tail = np.zeros((0, 2, 2))
    else:
        if det2(T) <= 0:
            raise ValueError("transition must preserve orientation")
        ann = annihilation_path(T, q_ratio, epsilon, side="left")
        tail = ann.factors
        max_pert = max(max_pert, ann.max_step_dist)

    factors = np.concatenate([T[None], steps, tail])
    prod = matmul_chain(factors)
    ratio = 0.5 * float(tr2(prod))
    offdiag = float(opnorm(prod - ratio * np.eye(2)))
    return HomothetyResult(
        N=N, nudge=float(nudge), factors=factors, ratio=ratio,
        offdiag_residual=offdiag, max_step_perturbation=max_pert,
    )


# ---------------------------------------------------------------------------
# diagonalizing coordinates and the angle-distortion calibration


@dataclass(frozen=True)
class DiagIndexResult:
    index: int
    basis: np.ndarray      # unimodular change to eigen-coordinates at the index
    norms: np.ndarray      # ||B_i|| for every index


def _eigvec(m, lam):
    r1 = np.array([m[0, 0] - lam, m[0, 1]])
    r2 = np.array([m[1, 0], m[1, 1] - lam])
    v = np.array([-r1[1], r1[0]]) if np.hypot(*r1) >= np.hypot(*r2) else np.array([-r2[1], r2[0]])
    n = np.hypot(*v)
    if n == 0:
        raise ValueError("return product is not diagonalizable")
    return v / n


def diagonalizing_index(c: LinearCocycle, alpha: float) -> DiagIndexResult:
    """Index along the orbit where eigen-coordinates are cheapest.

    Propagates the eigendirections of the return product along the orbit and
    measures at each index the norm of the unimodular basis change mapping an
    orthonormal frame onto them (norm 1 exactly when the directions are
    orthogonal).  Returns the argmin; raises if it exceeds alpha.
    """
    m0 = return_product(c)
    l1, l2, kind = eig2(m0)
    if kind != "real-distinct":
        raise ValueError("return product must have real distinct eigenvalues")
    strong = _eigvec(m0, l2)   # smaller modulus: most contracted
    weak = _eigvec(m0, l1)

    n = c.period
    norms = np.empty(n)
    bases = []
    u, w = strong, weak
    for i in range(n):
        s = u[0] * w[1] - u[1] * w[0]
        b = np.column_stack([u, w / s])
        bases.append(b)
        norms[i] = opnorm(b)
        u = c.mats[i] @ u
        w = c.mats[i] @ w
        u /= np.hypot(*u)
        w /= np.hypot(*w)
    idx = int(np.argmin(norms))
    if norms[idx] > alpha:
        raise ValueError(
            f"minimal basis-change norm {norms[idx]:g} exceeds alpha={alpha:g}; "
            "Lyapunov-split hypotheses violated"
        )
    return DiagIndexResult(index=idx, basis=bases[idx], norms=norms)


@dataclass(frozen=True)
class DistortionReport:
    worst_ratio: float
    kappa: float
    tau: float
    held: bool
    witness: tuple


def angle_distortion_check(C1: float, kappa: float, tau: float,
                           samples: int = 100_000, seed: int = 0) -> DistortionReport:
    """Worst image-norm ratio over nearby unit vectors, by sampling.

    Monte-Carlo over matrices with both norms below C1 and unit-vector pairs
    at angle <= tau, plus a dense scan of the extremal family
    diag(C1, 1/C1).  Reports whether the ratio stayed inside [1/kappa, kappa].
    """
    if not (C1 > 1.0 and kappa > 1.0 and tau >= 0.0):
        raise ValueError("need C1 > 1, kappa > 1, tau >= 0")
    rng = np.random.default_rng(seed)
    m = samples
    logs = rng.uniform(-np.log(C1), np.log(C1), size=(m, 2))
    qa, qb = rng.uniform(0, 2 * np.pi, size=(2, m))
    diags = np.zeros((m, 2, 2))
    diags[:, 0, 0] = np.exp(logs[:, 0])
    diags[:, 1, 1] = np.exp(logs[:, 1])
    mats = rotation(qa) @ diags @ rotation(qb)
    phi = rng.uniform(0, 2 * np.pi, size=m)
    psi = rng.uniform(0, tau, size=m) if tau > 0 else np.zeros(m)
    u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    v = np.stack([np.cos(phi + psi), np.sin(phi + psi)], axis=-1)
    au = np.einsum("nij,nj->ni", mats, u)
    av = np.einsum("nij,nj->ni", mats, v)
    ratio = np.hypot(au[:, 0], au[:, 1]) / np.hypot(av[:, 0], av[:, 1])
    ratio = np.maximum(ratio, 1.0 / ratio)
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    witness = (mats[k], float(phi[k]), float(psi[k]))

    # extremal boundary family
    a = np.diag([C1, 1.0 / C1])
    phis = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    for sgn in (tau, -tau):
        ub = np.stack([np.cos(phis), np.sin(phis)], axis=-1)
        vb = np.stack([np.cos(phis + sgn), np.sin(phis + sgn)], axis=-1)
        rb = np.hypot(*(ub @ a.T).T) / np.hypot(*(vb @ a.T).T)
        rb = np.maximum(rb, 1.0 / rb)
        kb = int(np.argmax(rb))
        if rb[kb] > worst:
            worst = float(rb[kb])
            witness = (a, float(phis[kb]), float(sgn))
    return DistortionReport(worst_ratio=worst, kappa=float(kappa), tau=float(tau),
                            held=bool(worst < kappa), witness=witness)
