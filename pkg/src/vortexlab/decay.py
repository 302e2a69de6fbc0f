"""Discrete exponential-decay machinery and the center-of-mass split.

Two recursion checkers verify the printed conclusions of the three-term
comparison lemmas at machine slack. The decomposition splits a
small-energy pair into a center path psi(t) in the fixed set of the
critical rotation and a balanced tangent remainder phi0; a rotation
parameter i p/q is removed by pulling back along the q-fold cover
(t, theta) -> (q t, q theta) and gauging away the integer twist, so phi0
lives on the cover grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cylinder import CylinderDomain, Pair
from .target import TargetManifold

_SLACK = 1e-12


@dataclass(frozen=True)
class DecaySequence:
    """Nonnegative sequence with optional nonnegative forcing."""

    values: np.ndarray
    forcing: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("sequence values must be nonnegative")
        if self.forcing is not None and np.any(np.asarray(self.forcing) < 0):
            raise ValueError("forcing values must be nonnegative")


def xi_of_gamma(gamma: float) -> float:
    """Decay base (1 + sqrt(1 - 4 gamma^2)) / (2 gamma), always > 1."""
    if not 0.0 < gamma < 0.5:
        raise ValueError("comparison constant must lie in (0, 1/2)")
    return (1.0 + np.sqrt(1.0 - 4.0 * gamma * gamma)) / (2.0 * gamma)


@dataclass(frozen=True)
class RecursionReport:
    """Outcome of a three-term comparison check.

    ``max_excess`` is the largest x_k minus bound_k over the checked range;
    nonpositive (up to slack) means the conclusion holds everywhere.
    """

    applicable: bool
    hypothesis_failures: tuple[int, ...]
    violations: tuple[tuple[int, float], ...]
    xi: float
    max_excess: float


def recursion_bound_check(values, gamma: float) -> RecursionReport:
    """Check x_k <= x_0 xi^-k + x_N xi^-(N-k) given the interior recursion.

    The hypothesis x_k <= gamma (x_{k-1} + x_{k+1}) is verified first at
    machine slack; if it fails anywhere the report is marked inapplicable
    and the conclusion is not judged.
    """
    x = np.asarray(values, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("sequence values must be nonnegative")
    n = len(x) - 1
    if n < 2:
        raise ValueError("need at least three terms")
    xi = xi_of_gamma(gamma)
    hyp_bad = []
    for k in range(1, n):
        slack = _SLACK * max(1.0, x[k - 1], x[k + 1])
        if x[k] - gamma * (x[k - 1] + x[k + 1]) > slack:
            hyp_bad.append(k)
    if hyp_bad:
        return RecursionReport(False, tuple(hyp_bad), (), xi, np.nan)
    k_idx = np.arange(n + 1)
    bound = x[0] * xi**-k_idx.astype(float) + x[n] * xi**-(n - k_idx).astype(float)
    excess = x - bound
    slack = _SLACK * np.maximum(1.0, bound)
    bad = [(int(k), float(excess[k])) for k in k_idx if excess[k] > slack[k]]
    return RecursionReport(True, (), tuple(bad), xi, float(np.max(excess)))


@dataclass(frozen=True)
class PerturbedReport:
    """Outcome of the forced three-term comparison check."""

    applicable: bool
    envelope_failures: tuple[int, ...]
    recursion_failures: tuple[int, ...]
    violations: tuple[tuple[int, float], ...]
    sigma: float
    bound_constant: float


def perturbed_recursion_bound_check(
    x, z, gamma: float, chi: float, big_k: float, eps: float
) -> PerturbedReport:
    """Check the forced decay conclusion on sequences indexed -N..N.

    Hypotheses verified first: the forcing envelope z_j <= K e^{-chi(N-|j|)},
    and the conditional recursion at every interior j whose 5-term forcing
    window is eps-small against the x window. The conclusion
    x_j <= (10 K e^{2 chi} / eps + x_{-N+1} + x_{N-1}) e^{-sigma (N-|j|)}
    with sigma = min(chi, ln xi) is then checked for |j| <= N-1.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if len(x) != len(z) or len(x) % 2 == 0:
        raise ValueError("need matching odd-length sequences indexed -N..N")
    if np.any(x < 0) or np.any(z < 0):
        raise ValueError("sequences must be nonnegative")
    big_n = len(x) // 2
    if big_n < 2:
        raise ValueError("need N >= 2")
    xi = xi_of_gamma(gamma)
    sigma = min(chi, np.log(xi))
    dist = big_n - np.abs(np.arange(-big_n, big_n + 1))

    env_bad = [
        int(j - big_n)
        for j in range(2 * big_n + 1)
        if z[j] - big_k * np.exp(-chi * dist[j]) > _SLACK * max(1.0, big_k)
    ]
    rec_bad = []
    for j in range(2, 2 * big_n - 1):
        zw = z[j - 2 : j + 3].sum()
        xw = x[j - 2 : j + 3].sum()
        if zw <= eps * xw + _SLACK * max(1.0, xw):
            slack = _SLACK * max(1.0, x[j - 1], x[j + 1])
            if x[j] - gamma * (x[j - 1] + x[j + 1]) > slack:
                rec_bad.append(int(j - big_n))
    if env_bad or rec_bad:
        return PerturbedReport(False, tuple(env_bad), tuple(rec_bad), (), sigma, np.nan)

    const = 10.0 * np.exp(2.0 * chi) * big_k / eps + x[1] + x[2 * big_n - 1]
    bad = []
    for j in range(1, 2 * big_n):
        bound = const * np.exp(-sigma * dist[j])
        if x[j] - bound > _SLACK * max(1.0, bound):
            bad.append((int(j - big_n), float(x[j] - bound)))
    return PerturbedReport(True, (), (), tuple(bad), sigma, float(const))


def admissible_sequence(rng: np.random.Generator, n: int, gamma: float) -> np.ndarray:
    """Random sequence satisfying the interior recursion for this gamma.

    Mixes the two exact decay modes of a randomly damped comparison
    constant gamma' <= gamma; such sequences satisfy the recursion for
    gamma' with equality, hence for gamma with room.
    """
    gamma_p = gamma * rng.uniform(0.5, 1.0)
    xi_p = xi_of_gamma(gamma_p)
    a, b = rng.uniform(0.0, 10.0, size=2)
    k = np.arange(n + 1, dtype=np.float64)
    return a * xi_p**-k + b * xi_p**-(n - k)


def forced_sequence_pair(
    rng: np.random.Generator, big_n: int, gamma: float
) -> tuple[np.ndarray, np.ndarray, float, float, float]:
    """Random (x, z, chi, K, eps) satisfying both forced-lemma hypotheses.

    Two lawful regimes: forcing-dominated sequences where the conditional
    recursion never triggers, and recursion-dominated mode mixtures with
    the forcing constant sized so its term carries the boundary indices.
    Both keep sigma = chi strictly below ln xi.
    """
    xi = xi_of_gamma(gamma)
    chi = float(np.log(xi) * rng.uniform(0.4, 0.9))
    eps = float(rng.uniform(0.05, 0.2))
    j = np.arange(-big_n, big_n + 1)
    dist = big_n - np.abs(j)
    if rng.uniform() < 0.5:
        big_k = float(rng.uniform(0.5, 2.0))
        z = big_k * rng.uniform(0.3, 1.0, size=2 * big_n + 1) * np.exp(-chi * dist)
        x = rng.uniform(0.0, 0.15, size=2 * big_n + 1) * z / eps
        return x, z, chi, big_k, eps
    a, b = rng.uniform(0.0, 5.0, size=2)
    x = a * xi ** -(j + big_n).astype(float) + b * xi ** -(big_n - j).astype(float)
    big_k = float((a + b) * eps / (10.0 * np.exp(2.0 * chi)) * rng.uniform(1.5, 3.0))
    z = big_k * rng.uniform(0.3, 1.0, size=2 * big_n + 1) * np.exp(-chi * dist)
    return x, z, chi, big_k, eps


# ---------------------------------------------------------------------------
# center-of-mass decomposition
# ---------------------------------------------------------------------------


@dataclass
class Decomposition:
    """Split of a pair into a center path and a balanced remainder.

    psi and phi0 live on the q-fold cover grid (identical to the base grid
    when lambda_cr is an integer); beta is the connection remainder on the
    base grid after removing the constant part lam + i lambda_cr.
    """

    target: TargetManifold
    base_domain: CylinderDomain
    cover_domain: CylinderDomain
    lambda_cr: Fraction
    lam: complex
    beta: np.ndarray
    psi: np.ndarray
    phi0: np.ndarray

    @property
    def cover_degree(self) -> int:
        return self.lambda_cr.denominator

    def validate(self, tol: float = 1e-8) -> None:
        mean = self.phi0.mean(axis=1)
        scale = max(1.0, float(np.max(np.abs(self.phi0))))
        if np.max(np.abs(mean)) > tol * scale:
            raise ValueError("remainder field is not balanced")
        if not self.target.fixed_set_lambda(self.lambda_cr).contains(
            self.target, self.psi, tol
        ):
            raise ValueError("center path leaves the fixed set of the rotation")


def _sphere_center_of_mass(target, loop: np.ndarray, max_iter: int = 50) -> np.ndarray:
    if target.diam_S1(loop) > np.pi / 2.0:
        raise ValueError("loop too spread for a center of mass")
    m = loop.mean(axis=0)
    norm = np.linalg.norm(m)
    if norm < 1e-8:
        raise ValueError("loop too spread for a center of mass")
    m = m / norm
    for _ in range(max_iter):
        step = target.log_map(m, loop).mean(axis=0)
        m = target.exp_map(m, step)
        if np.linalg.norm(step) < 1e-13:
            return m
    raise ValueError("center-of-mass iteration did not converge")


def _pull_back_to_cover(pair: Pair, p: int, q: int):
    base = pair.domain
    cover = CylinderDomain(
        half_length=base.half_length / q, n_t=base.n_t, n_theta=q * base.n_theta
    )
    cols = np.arange(cover.n_theta) % base.n_theta
    phi_cover = pair.phi[:, cols]
    a_cover = q * pair.a[:, cols] - 1j * p
    phi_gauged = pair.target.act(phi_cover, float(p) * cover.theta)
    return cover, a_cover, phi_gauged


def center_decomposition(
    pair: Pair, lambda_cr, eps: float = 0.05, max_iter: int = 50
) -> Decomposition:
    """Split phi as the exp of a balanced field over a center path.

    lambda_cr is the exact rational r standing for the critical rotation
    parameter i r. Preconditions: pointwise covariant derivative and the
    connection offset |a - i lambda_cr| both below eps.
    """
    from .cylinder import sup_covariant_norm

    lambda_cr = Fraction(lambda_cr)
    target = pair.target
    offset = float(np.max(np.abs(pair.a - 1j * float(lambda_cr))))
    if offset > eps:
        raise ValueError(f"connection offset {offset:.3g} exceeds eps={eps}")
    sup_d = sup_covariant_norm(pair)
    if sup_d > eps:
        raise ValueError(f"covariant sup {sup_d:.3g} exceeds eps={eps}")

    p, q = lambda_cr.numerator, lambda_cr.denominator
    cover, a_cover, phi_g = _pull_back_to_cover(pair, p, q)

    if target.kind == "linear":
        psi = phi_g.mean(axis=1)
        phi0 = phi_g - psi[:, None, :]
    else:
        psi = np.stack(
            [_sphere_center_of_mass(target, phi_g[i], max_iter) for i in range(cover.n_t)]
        )
        phi0 = target.log_map(psi[:, None, :], phi_g)

    mid = pair.a[pair.domain.n_t // 2] if pair.domain.n_t % 2 else 0.5 * (
        pair.a[pair.domain.n_t // 2 - 1] + pair.a[pair.domain.n_t // 2]
    )
    lam_full = complex(mid.mean())
    lam = 1j * (lam_full.imag - float(lambda_cr))
    beta = pair.a - lam_full

    decomp = Decomposition(
        target=target,
        base_domain=pair.domain,
        cover_domain=cover,
        lambda_cr=lambda_cr,
        lam=lam,
        beta=beta,
        psi=psi,
        phi0=phi0,
    )
    decomp.validate()
    return decomp


def reconstruct_base_map(decomp: Decomposition) -> np.ndarray:
    """Invert the decomposition back to the base-grid map values."""
    target = decomp.target
    if target.kind == "linear":
        phi_g = decomp.psi[:, None, :] + decomp.phi0
    else:
        phi_g = target.exp_map(decomp.psi[:, None, :], decomp.phi0)
    p = decomp.lambda_cr.numerator
    phi_cover = target.act(phi_g, -float(p) * decomp.cover_domain.theta)
    return phi_cover[:, : decomp.base_domain.n_theta]


def psi_gradient_residual(decomp: Decomposition, lam: complex) -> np.ndarray:
    """Per-t norm of psi' + i lam I(psi) X(psi), the gradient-segment defect."""
    target = decomp.target
    dt = decomp.cover_domain.dt
    psi = decomp.psi
    dpsi = np.empty_like(psi)
    dpsi[1:-1] = (psi[2:] - psi[:-2]) / (2.0 * dt)
    dpsi[0] = (-3.0 * psi[0] + 4.0 * psi[1] - psi[2]) / (2.0 * dt)
    dpsi[-1] = (3.0 * psi[-1] - 4.0 * psi[-2] + psi[-3]) / (2.0 * dt)
    if target.kind == "sphere":
        dpsi = target.project_tangent(psi, dpsi)
    drift = complex(1j * lam) * target.complex_structure(psi, target.field_X(psi))
    if target.kind == "sphere":
        drift = drift.real
    res = dpsi + drift
    return np.sqrt(target.metric(psi, res, res))


def fit_exponential_rate(
    t, values, half_length: float, collar: float | None = None, side: str = "both"
) -> tuple[float, float, float]:
    """Least-squares decay rate against distance to the cylinder boundary.

    Fits log(values) = log(C) - sigma * (N - |t|) over the chosen collar
    (side "left", "right" or "both"); returns (sigma, C, r_squared).
    """
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = half_length - np.abs(t)
    keep = np.ones(len(t), dtype=bool)
    if collar is not None:
        keep &= d <= collar
    if side == "left":
        keep &= t < 0
    elif side == "right":
        keep &= t > 0
    elif side != "both":
        raise ValueError("side must be left, right or both")
    if keep.sum() < 8:
        raise ValueError("need at least 8 samples in the fit window")
    if np.any(v[keep] <= 0):
        raise ValueError("fit window contains nonpositive values")
    dd, lv = d[keep], np.log(v[keep])
    slope, intercept = np.polyfit(dd, lv, 1)
    pred = slope * dd + intercept
    ss_res = float(np.sum((lv - pred) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(-slope), float(np.exp(intercept)), r2
