import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab.retard import realize_witness, retard


def random_gl2(rng, max_cond=10.0, det_sign=+1):
    """Random invertible 2x2 with condition number below max_cond."""
    s = rng.uniform(1.0, np.sqrt(max_cond * 0.95))
    d = np.diag([s, det_sign / s])
    return cl.rotation(rng.uniform(0, 2 * np.pi)) @ d @ cl.rotation(rng.uniform(0, 2 * np.pi))


def random_kit(rng, det_signs=(+1, +1), lam_signs=(+1, +1)):
    """Feasible random transition kit (moderate norms, weak eigenvalue near 1)."""
    return cl.TransitionKit(
        lam_signs[0] * rng.uniform(0.95, 0.99),
        lam_signs[1] * rng.uniform(0.25, 0.55),
        rng.uniform(0.82, 0.94),
        random_gl2(rng, 4.0, det_signs[0]),
        random_gl2(rng, 4.0, det_signs[1]),
    )


@pytest.fixture(scope="session")
def base_kit():
    return cl.TransitionKit(0.97, 0.4, 0.9, cl.rotation(0.7),
                            np.array([[1.1, 0.3], [0.1, 0.8]]))


@pytest.fixture(scope="session")
def base_epsilon():
    return 0.6


@pytest.fixture(scope="session")
def base_witness(base_kit, base_epsilon):
    sched = cl.plan_schedule(base_kit, base_epsilon)
    return cl.build_flex_witness(base_kit, sched, base_epsilon)


@pytest.fixture(scope="session")
def realized(base_witness, base_epsilon):
    return realize_witness(base_witness, base_epsilon)


@pytest.fixture(scope="session")
def retarded3(realized):
    return retard(realized.rc, realized.spec, 3)


@pytest.fixture(scope="session")
def base_meridians(retarded3):
    chart = retarded3.chart()
    tr = cl.trace_wss(retarded3,
                      extent=(chart.anchor_log_r - chart.depth, chart.anchor_log_r))
    return cl.meridians_from_trace(tr, retarded3)
