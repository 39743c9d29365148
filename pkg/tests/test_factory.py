from functools import reduce

import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab.cocycle import LinearCocycle
from cocyclelab.factory import (
    ScheduleInfeasible,
    annihilation_path,
    assemble_flex_cocycle,
    homothety_from_complex,
    signed_reduction,
    witness_mats_at,
    _D,
)
from cocyclelab.linalg2 import det2, opnorm, tr2

from conftest import random_gl2, random_kit


def quad_roots(m):
    """Closed-form root oracle for the characteristic polynomial."""
    t, d = np.trace(m), np.linalg.det(m)
    disc = t * t - 4 * d
    s = np.sqrt(complex(disc))
    return (t + s) / 2, (t - s) / 2


class TestHomoperPath:
    def test_zero_rotation(self):
        got = cl.homoper_path(0.9, 0.4, 0.0)
        np.testing.assert_allclose(got, np.diag([0.81, 0.16]), atol=1e-15)

    def test_quarter_turn_homothety(self):
        m = cl.homoper_path(0.9, 0.4, np.pi / 2)
        ratio = 0.5 * tr2(m)
        assert opnorm(m - ratio * np.eye(2)) < 1e-15
        assert ratio == pytest.approx(0.36, abs=1e-15)

    def test_interior_spectrum(self):
        m = cl.homoper_path(0.9, 0.4, np.pi / 4)
        r1, r2 = quad_roots(m)
        assert r1.imag == 0 and r2.imag == 0
        assert 0 < r2.real < r1.real < 1

    def test_trace_monotone_det_constant(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            l2 = rng.uniform(0.05, 0.8)
            l1 = rng.uniform(l2 + 0.05, 0.99)
            ts = np.linspace(0, np.pi / 2, 1000)
            ms = np.stack([cl.homoper_path(l1, l2, t) for t in ts])
            traces = tr2(ms)
            assert np.all(np.diff(traces) < 0)
            np.testing.assert_allclose(det2(ms), (l1 * l2) ** 2, atol=1e-14)

    def test_bad_lambdas(self):
        with pytest.raises(ValueError):
            cl.homoper_path(0.4, 0.9, 0.1)


class TestAnnihilation:
    def test_identity_transition(self):
        a = annihilation_path(np.eye(2), 0.5, 0.1, "right")
        assert a.h == 1
        np.testing.assert_allclose(a.factors[0], 0.5 * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(a.product, 0.5 ** a.h * np.eye(2), atol=1e-15)

    def test_quarter_rotation_minimal_h(self):
        # ||(R(pi/2h) - Id) Q|| = 2 * 0.5 * sin(pi/(4h)) < 0.1 first at h = 8
        a = annihilation_path(cl.rotation(np.pi / 2), 0.5, 0.1, "right")
        assert a.h == 8
        assert a.max_step_dist < 0.1
        assert 2 * 0.5 * np.sin(np.pi / (4 * 7)) >= 0.1  # h = 7 would fail

    def test_random_telescoping(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            t = random_gl2(rng, max_cond=10.0)
            a = annihilation_path(t, 0.5, 0.05, "right")
            np.testing.assert_allclose(t @ a.product, 0.5 ** a.h * np.eye(2), atol=1e-12)
            b = annihilation_path(t, 0.5, 0.05, "left")
            np.testing.assert_allclose(b.product @ t, 0.5 ** b.h * np.eye(2), atol=1e-12)
            assert a.max_step_dist < 0.05

    def test_orientation_reversing_rejected(self):
        with pytest.raises(ValueError, match="det"):
            annihilation_path(np.diag([1.0, -1.0]), 0.5, 0.1)


class TestSignedReduction:
    def test_orientation_preserving_unchanged(self, base_kit):
        plan = signed_reduction(base_kit)
        assert plan.substituted == "" and not plan.with_involution and not plan.l13_even
        np.testing.assert_array_equal(plan.t1_eff, base_kit.T1)

    def test_single_reversal_substitution(self):
        rng = np.random.default_rng(2)
        kit = random_kit(rng, det_signs=(-1, +1))
        plan = signed_reduction(kit)
        assert plan.substituted == "T1"
        want = kit.T1 @ kit.P @ kit.T2 @ kit.Q @ kit.T1
        np.testing.assert_allclose(plan.t1_eff, want, rtol=1e-14)
        assert det2(plan.t1_eff) > 0 and det2(plan.t2_eff) > 0

    def test_double_reversal_involution(self):
        rng = np.random.default_rng(3)
        kit = random_kit(rng, det_signs=(-1, -1))
        plan = signed_reduction(kit)
        assert plan.with_involution and plan.substituted == ""

    def test_negative_lambda_parity(self):
        rng = np.random.default_rng(4)
        kit = random_kit(rng, lam_signs=(+1, -1))
        assert signed_reduction(kit).l13_even


class TestHomothetyFromComplex:
    def test_rational_angle(self):
        b = 0.9 * cl.rotation(2 * np.pi / 7)
        res = homothety_from_complex(b, np.eye(2), 0.1)
        assert res.N == 7
        assert res.nudge == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(res.product, 0.9 ** 7 * np.eye(2), atol=1e-14)

    def test_angle_rounding_search(self):
        b = 0.9 * cl.rotation(1.0)
        res = homothety_from_complex(b, np.eye(2), 0.01)
        assert res.offdiag_residual < 1e-12
        assert res.max_step_perturbation < 0.01

    def test_nonnormal_conjugated(self):
        shear = np.array([[1.0, 0.7], [0.0, 1.0]])
        b = shear @ (0.9 * cl.rotation(1.0)) @ np.linalg.inv(shear)
        rng = np.random.default_rng(5)
        t = random_gl2(rng, 4.0)
        res = homothety_from_complex(b, t, 0.05)
        assert res.offdiag_residual < 1e-10
        assert 0 < res.ratio < 1
        assert res.max_step_perturbation < 0.05

    def test_real_spectrum_rejected(self):
        with pytest.raises(ValueError, match="spectrum"):
            homothety_from_complex(np.diag([0.9, 0.4]), np.eye(2), 0.1)


class TestDiagonalizingIndex:
    def test_orthogonal_eigenvectors(self):
        c = LinearCocycle(np.diag([0.99, 0.1])[None])
        res = cl.diagonalizing_index(c, alpha=2.0)
        assert res.index == 0
        assert res.norms[0] == pytest.approx(1.0, abs=1e-12)

    def _brute_norms(self, c):
        """Independent oracle: eigendecompose the return product at every index."""
        out = []
        for i in range(c.period):
            m = cl.return_product(c.shifted(i))
            vals, vecs = np.linalg.eig(m)
            order = np.argsort(np.abs(vals))
            u = vecs[:, order[0]].real
            w = vecs[:, order[1]].real
            u, w = u / np.hypot(*u), w / np.hypot(*w)
            s = u[0] * w[1] - u[1] * w[0]
            out.append(opnorm(np.column_stack([u, w / s])))
        return np.array(out)

    def test_shear_vs_brute(self):
        # return product diagonal at index 0, strongly sheared at index 1
        shear = np.array([[1.0, 4.0], [0.0, 1.0]])
        c = LinearCocycle(np.stack([shear,
                                    np.diag([0.9, 0.1]) @ np.linalg.inv(shear)]))
        res = cl.diagonalizing_index(c, alpha=50.0)
        brute = self._brute_norms(c)
        assert brute[0] < brute[1]
        assert res.index == int(np.argmin(brute)) == 0
        np.testing.assert_allclose(res.norms, brute, rtol=1e-8)

    def test_random_exhaustive_scan(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            mats = np.stack([random_gl2(rng, 6.0) @ np.diag([0.9, 0.3])
                             for _ in range(n)])
            c = LinearCocycle(mats)
            m = cl.return_product(c)
            l1, l2, kind = cl.eig2(m)
            if kind != "real-distinct":
                continue
            res = cl.diagonalizing_index(c, alpha=np.inf)
            brute = self._brute_norms(c)
            assert res.index == int(np.argmin(brute))

    def test_homothety_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            cl.diagonalizing_index(LinearCocycle((0.5 * np.eye(2))[None]), 2.0)


class TestAngleDistortion:
    def test_zero_angle(self):
        rep = cl.angle_distortion_check(3.0, 1.5, 0.0, samples=1000)
        assert rep.worst_ratio == pytest.approx(1.0, abs=1e-12)
        assert rep.held

    def test_submultiplicative_bound(self):
        rep = cl.angle_distortion_check(2.0, 4.0 + 1e-9, np.pi / 2 - 0.01, samples=20000)
        assert rep.held  # kappa = C1^2 always holds

    def test_boundary_family_matches_sampling(self):
        c1, tau = 3.0, 0.05
        rep = cl.angle_distortion_check(c1, 1.2, tau, samples=100_000, seed=1)
        # independent dense scan of the extremal family
        a = np.diag([c1, 1.0 / c1])
        phi = np.linspace(0, 2 * np.pi, 200_000)
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        v = np.stack([np.cos(phi + tau), np.sin(phi + tau)], axis=-1)
        r = np.hypot(*(u @ a.T).T) / np.hypot(*(v @ a.T).T)
        want = float(np.max(np.maximum(r, 1 / r)))
        assert abs(rep.worst_ratio - want) < 0.01 * want


class TestAssembly:
    def test_identity_transitions_exact_product(self):
        kit = cl.TransitionKit(0.97, 0.4, 0.9, np.eye(2), np.eye(2))
        sched = cl.plan_schedule(kit, 0.6)
        asm = assemble_flex_cocycle(kit, sched)
        want = 0.9 ** (sched.l2 + sched.l4) * np.linalg.matrix_power(
            kit.P, sched.l1 + sched.l3)
        np.testing.assert_allclose(cl.return_product(asm.cocycle), want, rtol=1e-11)

    def test_fold_oracle(self, base_kit, base_epsilon):
        sched = cl.plan_schedule(base_kit, base_epsilon)
        asm = assemble_flex_cocycle(base_kit, sched)
        want = reduce(lambda acc, m: m @ acc, list(asm.cocycle.mats), np.eye(2))
        np.testing.assert_allclose(cl.return_product(asm.cocycle), want, rtol=1e-13)
        assert asm.period == sched.period

    def test_eigenvalue_formula(self, base_kit, base_epsilon):
        sched = cl.plan_schedule(base_kit, base_epsilon)
        asm = assemble_flex_cocycle(base_kit, sched)
        scalar = (sched.c1 * sched.c2) ** 2 * base_kit.r ** (
            sched.l2 + sched.l4 - 2 * (sched.i1 + sched.i2))
        want = sorted([scalar * base_kit.lambda1 ** (2 * sched.l1),
                       scalar * base_kit.lambda2 ** (2 * sched.l1)])
        l1, l2, kind = cl.eig2(cl.return_product(asm.cocycle))
        assert kind == "real-distinct"
        np.testing.assert_allclose(sorted([l1, l2]), want, rtol=1e-9)

    def test_schedule_invariants(self, base_kit, base_epsilon):
        sched = cl.plan_schedule(base_kit, base_epsilon)
        assert sched.l1 == sched.l3 and sched.l2 != sched.l4
        assert min(sched.l2, sched.l4) > sched.i1 + sched.i2 + sched.i3
        assert sched.mu_L > 1 - sched.nu

    def test_infeasible_reports_minimal_epsilon(self):
        kit = cl.TransitionKit(0.8, 0.3, 0.9, np.eye(2), np.eye(2))
        with pytest.raises(ScheduleInfeasible) as e:
            cl.plan_schedule(kit, 0.05)
        assert e.value.eps_min > 0.05


class TestWitness:
    def test_base_point(self, base_kit, base_epsilon, base_witness):
        sched = cl.plan_schedule(base_kit, base_epsilon)
        asm = assemble_flex_cocycle(base_kit, sched)
        np.testing.assert_array_equal(base_witness.at(0.0).mats, asm.cocycle.mats)

    def test_endpoints(self, base_witness):
        m_lo = cl.return_product(base_witness.at(-1.0))
        c = 0.5 * tr2(m_lo)
        assert opnorm(m_lo - c * np.eye(2)) < 1e-9
        assert 0 < c < 1
        m_hi = cl.return_product(base_witness.at(1.0))
        l1, l2, kind = cl.eig2(m_hi)
        assert kind == "real-distinct"
        assert abs(l1 - 1.0) < 1e-9 and 0 < l2 < 1

    def test_diameter_budget(self, base_witness, base_epsilon):
        assert cl.path_diameter(base_witness) < base_epsilon

    def test_signed_variants_verify(self):
        rng = np.random.default_rng(7)
        cases = [((-1, +1), (+1, +1)), ((-1, -1), (+1, +1)),
                 ((+1, +1), (+1, -1)), ((-1, -1), (+1, -1))]
        for det_signs, lam_signs in cases:
            kit = random_kit(rng, det_signs=det_signs, lam_signs=lam_signs)
            eps = 0.7
            sched = cl.plan_schedule(kit, eps)
            if sched.plan.l13_even:
                assert sched.l1 % 2 == 0
            w = cl.build_flex_witness(kit, sched, eps)
            rep = cl.verify_flexible(w, eps)
            assert rep.passed, (det_signs, lam_signs, rep.summary())

    def test_involution_commutes(self):
        assert np.array_equal(_D @ _D, np.eye(2))
        p = np.diag([0.9, 0.4])
        np.testing.assert_array_equal(_D @ p @ _D, p)

    def test_rotation_slots(self, base_kit, base_epsilon):
        sched = cl.plan_schedule(base_kit, base_epsilon)
        asm = assemble_flex_cocycle(base_kit, sched)
        assert np.sum(asm.slot_signs == +1) == sched.i3
        assert np.sum(asm.slot_signs == -1) == sched.i3
        mats = witness_mats_at(asm, -0.5)
        changed = np.flatnonzero(np.any(mats != asm.cocycle.mats, axis=(1, 2)))
        np.testing.assert_array_equal(changed, np.flatnonzero(asm.slot_signs))
