"""Meromorphic connections on punctured model surfaces.

The closed model surface is a rectangle (u, v) in [0, 2pi) x [0, pi],
periodic in u, whose v-boundaries are the two degenerate pole circles; a
curvature density vanishing at the poles closes up to a continuous 2-form
on the round sphere. Curvature is stored as purely imaginary grid values
F = i g(u, v) du dv, and the sign convention is pinned by the degree-1
reference bundle: a smooth connection of extension degree d carries total
curvature integral -2 pi i d.

Near each puncture the connection takes the radial normal form
d + alpha + lambda dtheta, with alpha = a_theta(r, theta) dtheta and
a_theta - lambda a sum of positive-power radial terms. Residues are kept
as exact rationals whenever they are built from rationals; quadrature only
ever touches holonomy circles and the curvature integral.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .cylinder import CylinderDomain, _dt_second_order, _dtheta_periodic

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Residue:
    """Purely imaginary residue, exact when born rational.

    ``rational`` q stands for the value i q; when None the float ``imag``
    carries the value.
    """

    imag: float
    rational: Fraction | None = None

    @classmethod
    def from_fraction(cls, q) -> "Residue":
        q = Fraction(q)
        return cls(imag=float(q), rational=q)

    @classmethod
    def from_imag(cls, x: float) -> "Residue":
        return cls(imag=float(x), rational=None)

    @property
    def value(self) -> complex:
        return 1j * self.imag

    def shift(self, n: int) -> "Residue":
        if self.rational is not None:
            return Residue.from_fraction(self.rational + n)
        return Residue.from_imag(self.imag + n)


def shift_trivialization(res: Residue, n: int) -> Residue:
    """Torsor action of the trivialization shift: value + i n."""
    return res.shift(n)


@dataclass(frozen=True)
class LocalTerm:
    """Radial correction i r^power (c cos(k theta) + s sin(k theta))."""

    power: float
    harmonic: int
    c: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("radial powers must be positive")


@dataclass(frozen=True)
class Puncture:
    """Puncture with residue, trivialization index and local radial form."""

    location: tuple[float, float]
    residue: Residue
    trivialization: int = 0
    local_terms: tuple[LocalTerm, ...] = ()

    def a_theta(self, r: float, theta: np.ndarray) -> np.ndarray:
        out = np.full_like(theta, self.residue.value, dtype=np.complex128)
        for term in self.local_terms:
            angular = term.c * np.cos(term.harmonic * theta) \
                + term.s * np.sin(term.harmonic * theta)
            out = out + 1j * r**term.power * angular
        return out


@dataclass(frozen=True)
class MeromorphicConnection:
    """Synthetic connection: global curvature grid plus local puncture forms.

    ``curvature[i, j]`` is the imaginary density at (u_i, v_j) with u on the
    periodic grid of n_u points and v on the closed grid of n_v + 1 points.
    """

    n_u: int
    n_v: int
    curvature: np.ndarray
    punctures: tuple[Puncture, ...] = ()
    chart_radius: float = 0.2

    def __post_init__(self):
        if self.curvature.shape != (self.n_u, self.n_v + 1):
            raise ValueError("curvature grid shape mismatch")
        if not np.all(np.isfinite(self.curvature)):
            raise ValueError("curvature must extend finitely over the grid")
        if np.max(np.abs(self.curvature.real)) > 1e-12 * max(
            1.0, float(np.max(np.abs(self.curvature)))
        ):
            raise ValueError("curvature density must be purely imaginary")

    @property
    def u(self) -> np.ndarray:
        return np.arange(self.n_u) * (2.0 * np.pi / self.n_u)

    @property
    def v(self) -> np.ndarray:
        return np.linspace(0.0, np.pi, self.n_v + 1)

    def curvature_integral(self) -> complex:
        """Exact-for-band-limited quadrature of the curvature 2-form."""
        du = 2.0 * np.pi / self.n_u
        dv = np.pi / self.n_v
        per_u = np.trapezoid(self.curvature, dx=dv, axis=1)
        return complex(per_u.sum() * du)


def holonomy_circle(conn: MeromorphicConnection, puncture: int, radius: float) -> complex:
    """exp of the theta-integral of the local form on the radius-r circle."""
    if radius <= 0 or radius > conn.chart_radius:
        raise ValueError("circle leaves the local chart of the puncture")
    p = conn.punctures[puncture]
    n_q = 64
    theta = np.arange(n_q) * (2.0 * np.pi / n_q)
    integral = p.a_theta(radius, theta).sum() * (2.0 * np.pi / n_q)
    return complex(np.exp(integral))


def limit_holonomy(conn: MeromorphicConnection, puncture: int, tol: float = 1e-9) -> complex:
    """Holonomy limit along shrinking circles, Richardson-extrapolated.

    The log-holonomy sequence is extrapolated assuming radial powers 2, 3,
    4 in turn; a residual tail above ``tol`` flags a non-convergent local
    form and raises.
    """
    p = conn.punctures[puncture]
    radii = conn.chart_radius * 0.5 ** np.arange(7)
    n_q = 64
    theta = np.arange(n_q) * (2.0 * np.pi / n_q)
    logs = np.array([p.a_theta(r, theta).sum() * (2.0 * np.pi / n_q) for r in radii])
    for q in (2, 3, 4):
        logs = (2.0**q * logs[1:] - logs[:-1]) / (2.0**q - 1.0)
    scale = max(1.0, float(np.max(np.abs(logs))))
    if abs(logs[-1] - logs[-2]) > tol * scale:
        raise ValueError("holonomy sequence does not converge at the puncture")
    return complex(np.exp(logs[-1]))


def chern_weil_degree(conn: MeromorphicConnection) -> float:
    """(i / 2 pi) integral of F plus i times the residue sum.

    Integer within 1e-6 for admissible connections; non-integer output is a
    diagnostic, not an error.
    """
    total = 1j / (2.0 * np.pi) * conn.curvature_integral()
    for p in conn.punctures:
        total += 1j * p.residue.value
    if abs(total.imag) > 1e-9 * max(1.0, abs(total)):
        raise ValueError("degree came out non-real; conventions violated")
    return float(total.real)


def orbifold_degree(conn: MeromorphicConnection) -> Fraction:
    """Curvature integral alone, reported through exact residue bookkeeping.

    Requires every residue rational. The quadrature part is the integer
    extension degree (asserted within 1e-6); subtracting the exact residue
    sum from it reproduces (i / 2 pi) times the curvature integral as an
    exact fraction.
    """
    fractions = []
    for p in conn.punctures:
        if p.residue.rational is None:
            raise ValueError("orbifold bookkeeping needs rational residues")
        fractions.append(p.residue.rational)
    cw = chern_weil_degree(conn)
    d_int = round(cw)
    if abs(cw - d_int) > 1e-6:
        raise ValueError(f"extension degree {cw} is not an integer")
    return Fraction(d_int) + sum(fractions, Fraction(0))


def shift_connection_trivialization(
    conn: MeromorphicConnection, puncture: int, n: int
) -> MeromorphicConnection:
    """Shift one puncture's trivialization, moving its residue by i n."""
    ps = list(conn.punctures)
    p = ps[puncture]
    ps[puncture] = replace(p, residue=p.residue.shift(n), trivialization=p.trivialization + n)
    return replace(conn, punctures=tuple(ps))


def make_sphere_connection(
    degree: int,
    punctures: tuple[Puncture, ...] = (),
    n_u: int = 64,
    n_v: int = 64,
    decoration: tuple[tuple[int, int, float], ...] = (),
    chart_radius: float = 0.2,
) -> MeromorphicConnection:
    """Connection on the closed model with prescribed extension degree.

    The curvature density is a trig polynomial vanishing at both poles;
    ``decoration`` rows (m, 2p, amp) add amp cos(m u) sin^2(v) cos(2 p v)
    texture. The normalization makes the quadrature hit
    integral F = -2 pi i (degree + sum residues) exactly.
    """
    u = np.arange(n_u) * (2.0 * np.pi / n_u)
    v = np.linspace(0.0, np.pi, n_v + 1)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    base = 1.0 - np.cos(2.0 * vv)
    g = np.zeros_like(uu)
    for m, twop, amp in decoration:
        if twop % 2:
            raise ValueError("v-harmonics must be even to respect the poles")
        g = g + amp * np.cos(m * uu) * base * np.cos(twop * vv)
    res_sum = sum((float(p.residue.imag) for p in punctures), 0.0)
    target = -2.0 * np.pi * (degree + res_sum)
    probe = MeromorphicConnection(n_u=n_u, n_v=n_v, curvature=1j * g, punctures=())
    base_conn = MeromorphicConnection(n_u=n_u, n_v=n_v, curvature=1j * base, punctures=())
    amp0 = (target - probe.curvature_integral().imag) / base_conn.curvature_integral().imag
    return MeromorphicConnection(
        n_u=n_u,
        n_v=n_v,
        curvature=1j * (g + amp0 * base),
        punctures=punctures,
        chart_radius=chart_radius,
    )


def make_node_residues(q) -> tuple[Residue, Residue]:
    """Residues at the two preimages of a node: opposite exact values."""
    q = Fraction(q)
    return Residue.from_fraction(q), Residue.from_fraction(-q)


def node_matching_defects(pairs) -> list[int]:
    """Indices of node preimage pairs whose residues fail to sum to zero."""
    bad = []
    for idx, (ra, rb) in enumerate(pairs):
        if ra.rational is not None and rb.rational is not None:
            ok = ra.rational + rb.rational == 0
        else:
            ok = abs(ra.imag + rb.imag) < 1e-12
        if not ok:
            bad.append(idx)
    return bad


# ---------------------------------------------------------------------------
# balanced temporal gauge on cylinders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BalancedGauge:
    """Result of gauging a cylinder connection to balanced temporal form."""

    a_theta: np.ndarray
    lam: complex
    envelope: np.ndarray
    max_excess: float


def _cumtrapz_from_middle(values: np.ndarray, dt: float, domain: CylinderDomain) -> np.ndarray:
    cum = np.zeros_like(values)
    cum[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * dt, axis=0)
    if domain.n_t % 2 == 1:
        mid = cum[domain.n_t // 2]
    else:
        mid = 0.5 * (cum[domain.n_t // 2 - 1] + cum[domain.n_t // 2])
    return cum - mid


def balanced_temporal_gauge(
    domain: CylinderDomain, a_t: np.ndarray, a_theta: np.ndarray
) -> BalancedGauge:
    """Gauge a cylinder connection so a_t = 0 and a_theta(middle) = lambda.

    lambda is the gauge-invariant angular mean on the middle circle. The
    transformed coefficient is reconstructed by integrating the curvature
    density from the middle circle, so |a - lambda| sits inside the
    integrated-|curvature| envelope by construction; the margin is still
    measured and returned.
    """
    curv = _dt_second_order(a_theta, domain.dt) - _dtheta_periodic(a_t, domain.dtheta)
    if domain.n_t % 2 == 1:
        middle = a_theta[domain.n_t // 2]
    else:
        middle = 0.5 * (a_theta[domain.n_t // 2 - 1] + a_theta[domain.n_t // 2])
    lam = complex(middle.mean())
    if abs(lam.real) > 1e-10 * max(1.0, abs(lam)):
        raise ValueError("connection coefficient must be purely imaginary")
    lam = 1j * lam.imag
    a_new = lam + _cumtrapz_from_middle(curv, domain.dt, domain)
    envelope = np.abs(_cumtrapz_from_middle(np.abs(curv) + 0j, domain.dt, domain).real)
    excess = np.abs(a_new - lam) - envelope
    return BalancedGauge(
        a_theta=a_new,
        lam=lam,
        envelope=envelope,
        max_excess=float(np.max(excess)),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _residue_json(res: Residue):
    if res.rational is not None:
        return {"rational": f"{res.rational.numerator}/{res.rational.denominator}"}
    return {"imag": res.imag}


def _residue_from_json(obj) -> Residue:
    if "rational" in obj:
        num, den = obj["rational"].split("/")
        return Residue.from_fraction(Fraction(int(num), int(den)))
    return Residue.from_imag(obj["imag"])


def save_connection(conn: MeromorphicConnection, json_path, csv_path) -> None:
    head = {
        "schema_version": SCHEMA_VERSION,
        "kind": "meromorphic_connection",
        "n_u": conn.n_u,
        "n_v": conn.n_v,
        "chart_radius": conn.chart_radius,
        "punctures": [
            {
                "location": list(p.location),
                "residue": _residue_json(p.residue),
                "trivialization": p.trivialization,
                "local_terms": [
                    {"power": t.power, "harmonic": t.harmonic, "c": t.c, "s": t.s}
                    for t in p.local_terms
                ],
            }
            for p in conn.punctures
        ],
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(head, fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u_index", "v_index", "curvature_im"])
        for i in range(conn.n_u):
            for j in range(conn.n_v + 1):
                writer.writerow([i, j, repr(float(conn.curvature[i, j].imag))])


def load_connection(json_path, csv_path) -> MeromorphicConnection:
    with open(json_path, encoding="utf-8") as fh:
        head = json.load(fh)
    if head.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {head.get('schema_version')}")
    n_u, n_v = head["n_u"], head["n_v"]
    g = np.zeros((n_u, n_v + 1))
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            g[int(row[0]), int(row[1])] = float(row[2])
    punctures = tuple(
        Puncture(
            location=tuple(p["location"]),
            residue=_residue_from_json(p["residue"]),
            trivialization=p["trivialization"],
            local_terms=tuple(
                LocalTerm(power=t["power"], harmonic=t["harmonic"], c=t["c"], s=t["s"])
                for t in p["local_terms"]
            ),
        )
        for p in head["punctures"]
    )
    return MeromorphicConnection(
        n_u=n_u,
        n_v=n_v,
        curvature=1j * g,
        punctures=punctures,
        chart_radius=head["chart_radius"],
    )
