"""Finite cylinders, gauged pairs and their discrete covariant calculus.

A cylinder ``C_N = [-N, N] x S^1`` is sampled on a uniform grid, closed in
the angular direction. A pair consists of a connection in temporal gauge,
``alpha = a(t, theta) dtheta`` with purely imaginary ``a``, together with a
map ``phi`` into one of the targets. The discrete operators are second-order:
central differences inside, one-sided second-order stencils at the two time
boundaries, exact periodic wrap in the angle.

The squared pointwise norm of the covariant differential is
``|D_t phi|^2 + |D_theta phi|^2``; the energy of a sub-cylinder is one half
of its integral (the harmonic-map normalization, which is the one that makes
the rotation-invariant model cylinders carry energy
``2 pi l (H(end+) - H(end-))``).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .target import LinearTarget, TargetManifold, make_target


@dataclass(frozen=True)
class CylinderDomain:
    """Uniform grid on [-N, N] x S^1."""

    half_length: float
    n_t: int
    n_theta: int

    def __post_init__(self):
        if self.half_length <= 0:
            raise ValueError("half_length must be positive")
        if self.n_t < 4:
            raise ValueError("need at least 4 time samples")
        if self.n_theta < 8:
            raise ValueError("need at least 8 angular samples")

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-self.half_length, self.half_length, self.n_t)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.dtheta

    @property
    def dt(self) -> float:
        return 2.0 * self.half_length / (self.n_t - 1)

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    def t_index(self, t_value: float) -> int:
        """Grid index of a time value, which must lie on the grid."""
        pos = (t_value + self.half_length) / self.dt
        i = int(round(pos))
        if i < 0 or i >= self.n_t or abs(pos - i) > 1e-8:
            raise ValueError(f"t={t_value} does not lie on the time grid")
        return i


@dataclass
class Pair:
    """Connection coefficient grid plus map grid over a cylinder domain.

    ``a`` has shape (n_t, n_theta) and is purely imaginary; ``phi`` has shape
    (n_t, n_theta, n) complex for a linear target or (n_t, n_theta, 3) real
    unit vectors for the sphere.
    """

    domain: CylinderDomain
    target: TargetManifold
    a: np.ndarray
    phi: np.ndarray

    def validate(self, tol: float = 1e-10) -> None:
        if self.a.shape != (self.domain.n_t, self.domain.n_theta):
            raise ValueError("connection grid shape mismatch")
        if np.max(np.abs(self.a.real)) > 1e-12 * max(1.0, np.max(np.abs(self.a))):
            raise ValueError("connection coefficient must be purely imaginary")
        if self.phi.shape[:2] != (self.domain.n_t, self.domain.n_theta):
            raise ValueError("map grid shape mismatch")
        self.target.validate_point(self.phi, tol)


@dataclass(frozen=True)
class VolumeForm:
    """Positive density f(t) dt dtheta with an exponential-boundedness tag."""

    f: np.ndarray
    eta: float

    def __post_init__(self):
        if np.any(self.f <= 0):
            raise ValueError("volume density must be positive")

    def exponentially_bounded(self, domain: CylinderDomain) -> bool:
        envelope = self.eta * np.exp(np.abs(domain.t) - domain.half_length)
        return bool(np.all(self.f < envelope * (1 + 1e-12) + 1e-300))


@dataclass(frozen=True)
class ModeSpectrum:
    """Band-limited angular data for the exactly solvable model flows.

    ``coeffs[m, j]`` multiplies ``exp(i k_m theta)`` in coordinate j at t=0.
    """

    lam: complex
    ks: tuple[int, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        if abs(complex(self.lam).real) > 1e-12:
            raise ValueError("rotation parameter must be purely imaginary")
        if self.coeffs.shape[0] != len(self.ks):
            raise ValueError("one coefficient row per mode required")


def _dtheta_periodic(grid: np.ndarray, dtheta: float) -> np.ndarray:
    return (np.roll(grid, -1, axis=1) - np.roll(grid, 1, axis=1)) / (2.0 * dtheta)


def _dt_second_order(grid: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(grid)
    out[1:-1] = (grid[2:] - grid[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * grid[0] + 4.0 * grid[1] - grid[2]) / (2.0 * dt)
    out[-1] = (3.0 * grid[-1] - 4.0 * grid[-2] + grid[-3]) / (2.0 * dt)
    return out


def covariant_derivative(pair: Pair) -> tuple[np.ndarray, np.ndarray]:
    """Grids of D_t phi and D_theta phi.

    D_theta phi = d_theta phi - i a X(phi); with purely imaginary a this is
    d_theta phi + Im(a) X(phi), which keeps sphere values real. On the sphere
    both derivatives are projected to the tangent planes.
    """
    t = pair.target
    dt_phi = _dt_second_order(pair.phi, pair.domain.dt)
    dth_phi = _dtheta_periodic(pair.phi, pair.domain.dtheta)
    x_field = t.field_X(pair.phi)
    dth_phi = dth_phi + np.imag(pair.a)[..., None] * x_field
    if t.kind == "sphere":
        dt_phi = t.project_tangent(pair.phi, dt_phi)
        dth_phi = t.project_tangent(pair.phi, dth_phi)
    return dt_phi, dth_phi


def dbar_residual(pair: Pair) -> np.ndarray:
    """Antiholomorphicity defect D_t phi - I(phi) D_theta phi on the grid."""
    dt_phi, dth_phi = covariant_derivative(pair)
    return dt_phi - pair.target.complex_structure(pair.phi, dth_phi)


def energy_density(pair: Pair) -> np.ndarray:
    dt_phi, dth_phi = covariant_derivative(pair)
    t = pair.target
    return t.metric(pair.phi, dt_phi, dt_phi) + t.metric(pair.phi, dth_phi, dth_phi)


def _integrate(density: np.ndarray, domain: CylinderDomain, i0: int, i1: int) -> float:
    # angular direction: exact uniform rule on the periodic grid
    ang = density.sum(axis=1) * domain.dtheta
    return float(np.trapezoid(ang[i0 : i1 + 1], dx=domain.dt))


def energy(pair: Pair, t_lo: float | None = None, t_hi: float | None = None) -> float:
    """Energy of the sub-cylinder [t_lo, t_hi] x S^1 (grid-aligned bounds)."""
    d = pair.domain
    i0 = 0 if t_lo is None else d.t_index(t_lo)
    i1 = d.n_t - 1 if t_hi is None else d.t_index(t_hi)
    if i1 <= i0:
        raise ValueError("empty sub-cylinder")
    return 0.5 * _integrate(energy_density(pair), d, i0, i1)


def sup_covariant_norm(pair: Pair) -> float:
    return float(np.sqrt(np.max(energy_density(pair))))


def evolve_modes(domain: CylinderDomain, target: LinearTarget, spectrum: ModeSpectrum) -> Pair:
    """Exact rotation-invariant evolution of band-limited angular data.

    Each coefficient follows ``c_{k,j}(t) = c_{k,j}(0) exp((-k + i lam w_j) t)``
    and the connection is constant, ``a = lam``. Modes beyond the angular
    Nyquist limit cannot be represented on the grid and raise.
    """
    if target.kind != "linear":
        raise ValueError("mode evolution is defined for linear targets")
    kmax = domain.n_theta // 2 - 1
    if any(abs(k) > kmax for k in spectrum.ks):
        raise ValueError(f"mode index beyond the angular Nyquist limit {kmax}")
    if spectrum.coeffs.shape[1] != target.n:
        raise ValueError("coefficient columns must match target coordinates")
    t = domain.t[:, None]
    theta = domain.theta[None, :]
    phi = np.zeros((domain.n_t, domain.n_theta, target.n), dtype=np.complex128)
    lam = complex(spectrum.lam)
    for m, k in enumerate(spectrum.ks):
        for j, w in enumerate(target.weights):
            rate = -k + 1j * lam * w  # real number: i*lam is real for imaginary lam
            phi[..., j] += spectrum.coeffs[m, j] * np.exp(rate * t) * np.exp(1j * k * theta)
    a = np.full((domain.n_t, domain.n_theta), lam, dtype=np.complex128)
    return Pair(domain=domain, target=target, a=a, phi=phi)


def random_spectrum(
    target: LinearTarget,
    lam: complex,
    rng: np.random.Generator,
    half_length: float,
    k_range: int = 6,
    density: float = 0.7,
) -> ModeSpectrum:
    """Random band-limited data normalized so no mode overflows on [-N, N]."""
    ks = [k for k in range(-k_range, k_range + 1) if rng.uniform() < density]
    if not ks:
        ks = [int(rng.integers(-k_range, k_range + 1))]
    coeffs = np.zeros((len(ks), target.n), dtype=np.complex128)
    lam = complex(lam)
    for m, k in enumerate(ks):
        for j, w in enumerate(target.weights):
            rate = (-k + 1j * lam * w).real
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            coeffs[m, j] = amp * np.exp(-abs(rate) * half_length)
    return ModeSpectrum(lam=lam, ks=tuple(ks), coeffs=coeffs)


def l_min(weights: Sequence[int], lam: complex | Fraction) -> float:
    """Smallest modulus of -k + i w lam over integer modes k and weights w."""
    if isinstance(lam, Fraction):
        q = float(lam)
    else:
        lam = complex(lam)
        if abs(lam.real) > 1e-12:
            raise ValueError("rotation parameter must be purely imaginary")
        q = lam.imag
    best = np.inf
    for w in weights:
        s = w * q
        best = min(best, abs(s - round(s)))
    return float(best)


def gamma_factor(eta: float) -> float:
    """Three-segment comparison constant 1/(e^{eta/2} + e^{-eta/2})."""
    return 1.0 / (np.exp(eta / 2.0) + np.exp(-eta / 2.0))


gamma = gamma_factor


def critical_residues(weights: Sequence[int], lo, hi) -> list[Fraction]:
    """Exact rotation parameters in [lo, hi) fixing some coordinate.

    Returned as sorted fractions q, standing for the imaginary value i q,
    each in lowest terms, with w q an integer for at least one weight w.
    """
    found: set[Fraction] = set()
    for w in weights:
        if w == 0:
            continue
        aw = abs(w)
        m_lo = int(np.ceil(lo * aw - 1e-12))
        m_hi = int(np.floor(hi * aw + 1e-12))
        for m in range(m_lo, m_hi + 1):
            q = Fraction(m, aw)
            if q >= lo and q < hi:
                found.add(q)
    return sorted(found)


def segment_energies(pair: Pair) -> tuple[np.ndarray, np.ndarray]:
    """Energies of the unit segments [n, n+1] x S^1 tiling the cylinder.

    Requires an integer half-length with segment endpoints on the grid.
    Returns (segment start values, energies).
    """
    N = pair.domain.half_length
    if abs(N - round(N)) > 1e-9:
        raise ValueError("unit segments need an integer half-length")
    N = int(round(N))
    starts = np.arange(-N, N)
    energies = np.array([energy(pair, float(n), float(n + 1)) for n in starts])
    return starts, energies


def mean_value_check(values: np.ndarray, gamma: float) -> list[tuple[int, float]]:
    """Indices where the three-segment comparison fails beyond slack.

    Checks ``values[i+1] <= gamma * (values[i] + values[i+2])`` with slack
    1e-12 * max(1, neighbors); returns (middle index, excess) per failure.
    """
    out = []
    v = np.asarray(values, dtype=np.float64)
    for i in range(len(v) - 2):
        slack = 1e-12 * max(1.0, v[i], v[i + 2])
        excess = v[i + 1] - gamma * (v[i] + v[i + 2])
        if excess > slack:
            out.append((i + 1, float(excess)))
    return out


# ---------------------------------------------------------------------------
# Serialization. One CSV of grid samples plus one JSON header; floats are
# written with shortest round-trip formatting so load(save(x)) == x.
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def pair_header(pair: Pair) -> dict:
    t = pair.target
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "pair",
        "domain": {
            "half_length": float(pair.domain.half_length),
            "n_t": pair.domain.n_t,
            "n_theta": pair.domain.n_theta,
        },
        "target": {"kind": t.kind},
    }
    if t.kind == "linear":
        header["target"]["weights"] = list(t.weights)
    return header


def save_pair(pair: Pair, csv_path, json_path) -> None:
    d, t = pair.domain, pair.target
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(pair_header(pair), fh, sort_keys=True, indent=1)
        fh.write("\n")
    if t.kind == "linear":
        comp_cols = [f"phi{j}_{part}" for j in range(t.n) for part in ("re", "im")]
    else:
        comp_cols = ["phi_x", "phi_y", "phi_z"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "theta", "a_im", *comp_cols])
        for i in range(d.n_t):
            for k in range(d.n_theta):
                row = [_fmt(d.t[i]), _fmt(d.theta[k]), _fmt(pair.a[i, k].imag)]
                p = pair.phi[i, k]
                if t.kind == "linear":
                    for j in range(t.n):
                        row.extend([_fmt(p[j].real), _fmt(p[j].imag)])
                else:
                    row.extend([_fmt(p[0]), _fmt(p[1]), _fmt(p[2])])
                writer.writerow(row)


def load_pair(csv_path, json_path) -> Pair:
    with open(json_path, encoding="utf-8") as fh:
        header = json.load(fh)
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {header.get('schema_version')}")
    dom = CylinderDomain(
        half_length=header["domain"]["half_length"],
        n_t=header["domain"]["n_t"],
        n_theta=header["domain"]["n_theta"],
    )
    target = make_target(header["target"]["kind"], header["target"].get("weights"))
    n_pts = dom.n_t * dom.n_theta
    a = np.zeros((dom.n_t, dom.n_theta), dtype=np.complex128)
    if target.kind == "linear":
        phi = np.zeros((dom.n_t, dom.n_theta, target.n), dtype=np.complex128)
    else:
        phi = np.zeros((dom.n_t, dom.n_theta, 3), dtype=np.float64)
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        rows = list(reader)
    if len(rows) != n_pts:
        raise ValueError(f"expected {n_pts} samples, found {len(rows)}")
    for idx, row in enumerate(rows):
        i, k = divmod(idx, dom.n_theta)
        a[i, k] = 1j * float(row[2])
        vals = [float(x) for x in row[3:]]
        if target.kind == "linear":
            for j in range(target.n):
                phi[i, k, j] = vals[2 * j] + 1j * vals[2 * j + 1]
        else:
            phi[i, k] = vals
    return Pair(domain=dom, target=target, a=a, phi=phi)
