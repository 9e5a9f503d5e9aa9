import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mflab import systems
from mflab.coeffs import IndexedTerm, TrigTerm
from mflab.specs import MetricSpec
from mflab.surface import sm_points

settings.register_profile("mflab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mflab")


def fd_grad(f, z, h=1e-4):
    """Order-4 central differences of ``f`` (array-valued) along each entry of ``z``."""
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.size):
        step = h * max(1.0, abs(z[i]))
        e = np.zeros_like(z)
        e[i] = step
        d = (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12 * step)
        cols.append(np.asarray(d, dtype=float))
    return np.stack(cols, axis=-1)


def fd_derivative(f, t, h=1e-4):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def random_sm(sys, N, seed=0, radius=None):
    """Random points of SM; disk charts are sampled inside ``radius``."""
    rng = np.random.default_rng(seed)
    if sys.metric.kind == "constant_curvature" and sys.metric.K0 != 0:
        r = (radius or 0.6) * np.sqrt(rng.uniform(size=N))
        a = rng.uniform(0, 2 * np.pi, N)
        x = np.stack([r * np.cos(a), r * np.sin(a)], -1)
    else:
        x = rng.uniform(0, 2 * np.pi, (N, sys.dim))
    th = rng.uniform(0, 2 * np.pi, N)
    return sm_points(sys.metric, x, th)


def orthogonal_metric():
    """a_11 = 1 + 0.3 cos x2, a_22 = 1 + 0.4 sin x1: curved, with a closed-form Gaussian curvature."""
    return MetricSpec("riemannian", 2, (
        IndexedTerm((0, 0), TrigTerm((0, 0), 1.0)),
        IndexedTerm((0, 0), TrigTerm((0, 1), 0.3)),
        IndexedTerm((1, 1), TrigTerm((0, 0), 1.0)),
        IndexedTerm((1, 1), TrigTerm((1, 0), 0.0, 0.4)),
    ))


def gauss_curvature_orthogonal(x):
    """Brioschi formula for E dx1^2 + G dx2^2 with E = E(x2), G = G(x1)."""
    E, E2, E22 = 1 + 0.3 * np.cos(x[1]), -0.3 * np.sin(x[1]), -0.3 * np.cos(x[1])
    G, G1, G11 = 1 + 0.4 * np.sin(x[0]), 0.4 * np.cos(x[0]), -0.4 * np.sin(x[0])
    s = np.sqrt(E * G)
    t1 = G11 / s - G1**2 / (2 * G * s)
    t2 = E22 / s - E2**2 / (2 * E * s)
    return -(t1 + t2) / (2 * s)


SURFACES = {
    "euclidean": systems.euclidean_plane,
    "riemannian_torus": systems.riemannian_torus,
    "randers_torus": systems.randers_torus,
}


@pytest.fixture(params=sorted(SURFACES))
def surface_pair(request):
    """(name, system without field, system with Omega = dx1 ^ dx2)."""
    make = SURFACES[request.param]
    return request.param, make(0.0), make(1.0)


@pytest.fixture
def field():
    return systems.sample_field()
