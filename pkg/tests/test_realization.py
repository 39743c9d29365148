import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab.cocycle import CocyclePath, LinearCocycle
from cocyclelab.linalg2 import opnorm
from cocyclelab.realization import (
    GridSpec,
    RadialCocycle,
    Reparam,
    build_reparam,
    certify_realization,
    eval_fiber_derivative,
    eval_fiber_map,
    jacobian_fd_check,
)

from conftest import random_gl2


def two_node_path(a, b, n=1):
    mats = np.stack([np.broadcast_to(a, (n, 2, 2)), np.broadcast_to(b, (n, 2, 2))])
    return CocyclePath(np.array([0.0, 1.0]), mats)


@pytest.fixture(scope="module")
def simple_rc():
    """Two-node straight path from diag(0.9, 0.4) to a slightly rotated copy."""
    a = np.diag([0.9, 0.4])
    b = cl.rotation(0.15) @ np.diag([0.85, 0.45])
    path = two_node_path(a, b)
    theta = build_reparam(path, delta=0.02, inner_radius=1e-4, outer_radius=1.0)
    return RadialCocycle(path, theta, epsilon1=0.05)


class TestBuildReparam:
    def test_constant_path_single_plateau(self):
        c = LinearCocycle(np.diag([0.9, 0.4])[None])
        p = CocyclePath.from_cocycles([0.0, 1.0], [c, c])
        th = build_reparam(p, delta=0.1, inner_radius=0.5, outer_radius=1.0)
        assert not th.shrunk
        rh = np.linspace(np.log(0.25), 0.5, 50)
        np.testing.assert_allclose(th.value(rh), th.values[0], atol=1e-15)

    def test_inner_radius_forced(self):
        # arc length 1 with delta 0.1 needs ln(outer/inner) >= 10
        p = two_node_path(np.eye(2), 2.0 * np.eye(2))
        assert p.arc_length() == pytest.approx(1.0)
        th = build_reparam(p, delta=0.1, inner_radius=0.5, outer_radius=1.0)
        assert th.shrunk
        assert th.inner_log <= -10.0
        # speed bound holds exactly: arc advance per log-radius <= delta
        rh = np.linspace(th.inner_log, th.outer_log, 1000)[1:-1]
        speed = th.slope(rh) * 1.0  # arc length per unit of path parameter is 1
        assert np.max(np.abs(speed)) <= 0.1 * (1 + 1e-9)

    def test_slack_keeps_radii_affine(self):
        p = two_node_path(np.eye(2), 2.0 * np.eye(2))
        th = build_reparam(p, delta=1e3, inner_radius=0.1, outer_radius=1.0)
        assert not th.shrunk
        assert th.inner_radius == pytest.approx(0.1)
        # theta affine in log r between the plateaus
        rh = np.linspace(th.inner_log, th.outer_log, 64)
        want = (rh - th.inner_log) / (th.outer_log - th.inner_log)
        np.testing.assert_allclose(th.value(rh), want, atol=1e-9)

    def test_bad_inputs(self):
        p = two_node_path(np.eye(2), 2.0 * np.eye(2))
        with pytest.raises(ValueError):
            build_reparam(p, delta=-1.0, inner_radius=0.1, outer_radius=1.0)
        with pytest.raises(ValueError):
            build_reparam(p, delta=0.1, inner_radius=1.0, outer_radius=0.5)

    def test_table_size_and_monotonicity(self, simple_rc):
        th = simple_rc.theta
        assert th.log_bp.size >= 256
        assert np.all(np.diff(th.values) >= 0)


class TestFiberMap:
    def test_origin_fixed(self, simple_rc):
        np.testing.assert_array_equal(eval_fiber_map(simple_rc, 0, np.zeros(2)),
                                      np.zeros(2))

    def test_outer_plateau_linear(self, simple_rc):
        x = np.array([1.7, -0.4])
        want = simple_rc.path.mats[-1, 0] @ x
        np.testing.assert_allclose(eval_fiber_map(simple_rc, 0, x), want, rtol=1e-14)

    def test_independent_interpolation_oracle(self, simple_rc):
        rng = np.random.default_rng(0)
        th = simple_rc.theta
        for _ in range(25):
            x = rng.normal(size=2) * np.exp(rng.uniform(th.inner_log, 0.0))
            r = np.hypot(*x)
            # oracle: entrywise interpolation done by hand
            t = np.interp(np.log(r), th.log_bp, th.values)
            nodes = simple_rc.path.nodes
            a = np.empty((2, 2))
            for i in range(2):
                for j in range(2):
                    a[i, j] = np.interp(t, nodes, simple_rc.path.mats[:, 0, i, j])
            np.testing.assert_allclose(eval_fiber_map(simple_rc, 0, x), a @ x,
                                       rtol=1e-12)


class TestFiberDerivative:
    def test_inner_plateau_exact(self, simple_rc):
        x = np.array([1e-6, -2e-6])
        want = simple_rc.path.mats[0, 0]
        np.testing.assert_array_equal(eval_fiber_derivative(simple_rc, 0, x), want)

    def test_constant_path_derivative_is_factor(self):
        c = LinearCocycle(np.diag([0.9, 0.4])[None])
        p = CocyclePath.from_cocycles([0.0, 1.0], [c, c])
        rc = RadialCocycle(p, build_reparam(p, 0.1, 0.01, 1.0), 0.05)
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = rng.normal(size=2)
            np.testing.assert_allclose(eval_fiber_derivative(rc, 0, x),
                                       np.diag([0.9, 0.4]), atol=1e-15)

    def test_finite_difference_match(self, simple_rc):
        # sample in the active band away from table breakpoints
        th = simple_rc.theta
        mids = 0.5 * (th.log_bp[:-1] + th.log_bp[1:])
        mids = mids[(mids > -3.0) & (mids < -0.05)][::3][:40]
        pts = np.stack([np.exp(mids) * np.cos(0.7), np.exp(mids) * np.sin(0.7)],
                       axis=-1)
        assert jacobian_fd_check(simple_rc, pts, h=1e-6) < 1e-5


class TestCertify:
    def test_constant_path_zero_residuals(self):
        c = LinearCocycle(np.diag([0.6, 0.3])[None])
        p = CocyclePath.from_cocycles([0.0, 1.0], [c, c])
        rc = RadialCocycle(p, build_reparam(p, 0.1, 0.01, 1.0), epsilon1=0.05)
        cert = certify_realization(rc, GridSpec(orbits=100))
        assert cert.passed
        assert cert.max_onestep == 0.0
        assert cert.max_jstep == 0.0
        assert cert.max_dfk < 0.5

    def test_witness_certificate(self, realized):
        cert = certify_realization(realized.rc)
        assert cert.passed, cert.summary()
        # the traversal speed construction leaves at least a 2x one-step margin
        assert cert.max_onestep < 0.5 * realized.rc.epsilon1

    def test_speed_violation_detected(self, realized):
        rc = realized.rc
        th = rc.theta
        mid = 0.5 * (th.log_bp[0] + th.log_bp[-1])
        squeezed = Reparam(mid + (th.log_bp - mid) / 100.0, th.values, th.delta)
        bad = RadialCocycle(rc.path, squeezed, rc.epsilon1,
                            uniformity=(rc.K_bound, rc.k_contract))
        cert = certify_realization(bad, GridSpec(per_decade=8, angles=32, orbits=100))
        assert not cert.passed
        assert max(cert.max_onestep, cert.max_jstep) > rc.epsilon1
        assert cert.witness_onestep is not None and cert.witness_jstep is not None

    def test_grid_too_coarse_rejected(self):
        with pytest.raises(ValueError, match="coarse"):
            GridSpec(radial_decades=7)
        with pytest.raises(ValueError, match="coarse"):
            GridSpec(angles=31)


class TestInvariants:
    def test_plateau_agreement_bitwise(self, realized):
        rc = realized.rc
        th = rc.theta
        inner = rc.path.mats[0]
        outer = rc.path.mats[-1]
        rng = np.random.default_rng(2)
        for i in range(0, rc.period, 7):
            phi = rng.uniform(0, 2 * np.pi)
            lp_in = np.array([[th.inner_log - 3.0, phi]])
            lp_out = np.array([[th.outer_log + 2.0, phi]])
            from cocyclelab.geometry import apply_mat_lp

            np.testing.assert_array_equal(rc.fiber_lp(i, lp_in),
                                          apply_mat_lp(inner[i], lp_in))
            np.testing.assert_array_equal(rc.fiber_lp(i, lp_out),
                                          apply_mat_lp(outer[i], lp_out))

    def test_orbit_radius_sandwich(self, realized):
        rc = realized.rc
        rng = np.random.default_rng(3)
        k, K = rc.k_contract, rc.K_bound
        lp = np.stack([rng.uniform(rc.theta.inner_log, 0.0, 50),
                       rng.uniform(0, 2 * np.pi, 50)], axis=-1)
        cur = lp.copy()
        for ell in range(min(k, 40)):
            cur = rc.fiber_lp(ell % rc.period, cur)
            drift = np.abs(cur[:, 0] - lp[:, 0])
            assert np.all(drift <= k * np.log(K) + 1e-9)

    def test_meanvalue_closeness(self, realized):
        # parameter drift over a K^k radius window is bounded by delta * window
        rc = realized.rc
        k, K = rc.k_contract, rc.K_bound
        window = k * np.log(K)
        nu = rc.theta.delta * 2 * window
        rng = np.random.default_rng(4)
        rhos = rng.uniform(rc.theta.inner_log, 0.0, 200)
        for dr in (-window, -0.3 * window, 0.3 * window, window):
            t1 = rc.theta.value(rhos)
            t2 = rc.theta.value(rhos + dr)
            m1 = rc.path.mats_at(t1)
            m2 = rc.path.mats_at(t2)
            dev = np.max(opnorm(m1 - m2), axis=-1)
            assert np.all(dev < nu + 1e-12)

    def test_fiber_bijection_roundtrip(self, realized):
        rc = realized.rc
        rng = np.random.default_rng(5)
        lp = np.stack([rng.uniform(rc.theta.inner_log - 2, 2.0, 200),
                       rng.uniform(0, 2 * np.pi, 200)], axis=-1)
        for i in range(0, rc.period, 5):
            back = rc.fiber_inv_lp(i, rc.fiber_lp(i, lp))
            assert np.max(np.abs(back - lp)) < 1e-10
