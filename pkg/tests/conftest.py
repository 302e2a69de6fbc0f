import numpy as np
import pytest

from vortexlab.target import LinearTarget, SphereTarget


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)


@pytest.fixture(params=["linear12", "linear1", "sphere"])
def any_target(request):
    if request.param == "linear12":
        return LinearTarget((1, 2))
    if request.param == "linear1":
        return LinearTarget((1,))
    return SphereTarget()


def finite_difference_gradient(target, h_func, x, step=1e-5):
    """Central-difference metric gradient oracle.

    Walks along an orthonormal-ish coordinate frame in the ambient space,
    projects steps back onto the manifold, and assembles the vector dual to
    dH with respect to the target metric. Independent of grad_H.
    """
    x = np.asarray(x)
    if target.kind == "linear":
        n = x.shape[-1]
        grad = np.zeros(n, dtype=np.complex128)
        for j in range(n):
            for unit in (1.0, 1j):
                e = np.zeros(n, dtype=np.complex128)
                e[j] = unit
                hp = h_func(x + step * e)
                hm = h_func(x - step * e)
                deriv = (hp - hm) / (2 * step)
                grad += deriv * e  # metric is the flat real inner product
        return grad
    # sphere: use two tangent directions, project the step to stay on S^2
    basis = []
    seed = np.array([1.0, 0.0, 0.0]) if abs(x[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = seed - np.dot(seed, x) * x
    u /= np.linalg.norm(u)
    basis.append(u)
    basis.append(np.cross(x, u))
    grad = np.zeros(3)
    for e in basis:
        xp = (x + step * e) / np.linalg.norm(x + step * e)
        xm = (x - step * e) / np.linalg.norm(x - step * e)
        deriv = (h_func(xp) - h_func(xm)) / (2 * step)
        grad += deriv * e
    return grad
