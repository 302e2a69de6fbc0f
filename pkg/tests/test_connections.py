"""Connection invariants against exact holonomy and degree oracles."""

from fractions import Fraction

import numpy as np
import pytest

from vortexlab.connections import (
    BalancedGauge,
    LocalTerm,
    MeromorphicConnection,
    Puncture,
    Residue,
    balanced_temporal_gauge,
    chern_weil_degree,
    holonomy_circle,
    limit_holonomy,
    load_connection,
    make_node_residues,
    make_sphere_connection,
    node_matching_defects,
    orbifold_degree,
    save_connection,
    shift_connection_trivialization,
    shift_trivialization,
)
from vortexlab.cylinder import CylinderDomain


def _flat_connection(residues, n_u=16, n_v=8, local_terms=()):
    punctures = tuple(
        Puncture(location=(0.5 + k, 1.0), residue=r, local_terms=local_terms)
        for k, r in enumerate(residues)
    )
    zero = np.zeros((n_u, n_v + 1), dtype=np.complex128)
    return MeromorphicConnection(n_u=n_u, n_v=n_v, curvature=zero, punctures=punctures)


# ---------------------------------------------------------------------------
# holonomy
# ---------------------------------------------------------------------------


def test_holonomy_flat_residue():
    conn = _flat_connection([Residue.from_imag(0.3)])
    expected = np.exp(2j * np.pi * 0.3)  # -0.30901699.. + 0.95105651..j
    for radius in (0.05, 0.1, 0.2):
        hol = holonomy_circle(conn, 0, radius)
        assert hol == pytest.approx(expected, abs=1e-12)
    assert expected.real == pytest.approx(-0.30901699437494745, abs=1e-15)


def test_holonomy_zero_residue_is_one():
    conn = _flat_connection([Residue.from_imag(0.0)])
    assert holonomy_circle(conn, 0, 0.1) == pytest.approx(1.0, abs=1e-12)


def test_holonomy_radial_term_richardson():
    # a_theta = lambda + i 0.4 r^2: deviation from e^{2 pi lambda} scales as r^2
    terms = (LocalTerm(power=2, harmonic=0, c=0.4),)
    conn = _flat_connection([Residue.from_imag(0.3)], local_terms=terms)
    expected = np.exp(2j * np.pi * 0.3)
    d1 = abs(holonomy_circle(conn, 0, 0.2) - expected)
    d2 = abs(holonomy_circle(conn, 0, 0.1) - expected)
    assert d1 / d2 == pytest.approx(4.0, rel=1e-2)


def test_holonomy_angular_terms_integrate_out():
    # nonzero harmonics drop out of the circle integral exactly
    terms = (LocalTerm(power=2, harmonic=3, c=0.7, s=-0.2),)
    conn = _flat_connection([Residue.from_imag(0.3)], local_terms=terms)
    assert holonomy_circle(conn, 0, 0.2) == pytest.approx(np.exp(2j * np.pi * 0.3), abs=1e-12)


def test_holonomy_rejects_radius_outside_chart():
    conn = _flat_connection([Residue.from_imag(0.3)])
    with pytest.raises(ValueError, match="chart"):
        holonomy_circle(conn, 0, 0.5)


def test_limit_holonomy_frozen_values():
    terms = (
        LocalTerm(power=2, harmonic=0, c=0.4),
        LocalTerm(power=3, harmonic=0, c=-1.1),
        LocalTerm(power=4, harmonic=2, c=0.5, s=0.3),
    )
    half = _flat_connection([Residue.from_fraction(Fraction(1, 2))], local_terms=terms)
    assert limit_holonomy(half, 0) == pytest.approx(-1.0, abs=1e-10)
    third = _flat_connection([Residue.from_fraction(Fraction(1, 3))], local_terms=terms)
    expected = complex(-0.5, np.sqrt(3.0) / 2.0)  # e^{2 pi i / 3}
    assert limit_holonomy(third, 0) == pytest.approx(expected, abs=1e-10)
    zero = _flat_connection([Residue.from_imag(0.0)], local_terms=terms)
    assert limit_holonomy(zero, 0) == pytest.approx(1.0, abs=1e-10)


def test_limit_holonomy_flags_nonconvergent_form():
    terms = (LocalTerm(power=0.25, harmonic=0, c=0.8),)
    conn = _flat_connection([Residue.from_imag(0.3)], local_terms=terms)
    with pytest.raises(ValueError, match="converge"):
        limit_holonomy(conn, 0)


# ---------------------------------------------------------------------------
# trivialization torsor
# ---------------------------------------------------------------------------


def test_shift_trivialization_values():
    assert shift_trivialization(Residue.from_imag(0.3), 0).value == pytest.approx(0.3j)
    assert shift_trivialization(Residue.from_imag(0.3), 1).value == pytest.approx(1.3j)
    shifted = shift_trivialization(Residue.from_fraction(Fraction(1, 2)), -1)
    assert shifted.rational == Fraction(-1, 2)
    assert shifted.value == -0.5j


# ---------------------------------------------------------------------------
# degrees
# ---------------------------------------------------------------------------


def test_chern_weil_flat_cancelling_residues():
    conn = _flat_connection([Residue.from_imag(0.3), Residue.from_imag(-0.3)])
    assert chern_weil_degree(conn) == pytest.approx(0.0, abs=1e-13)


def test_chern_weil_flat_shifted_residue():
    n = 3
    conn = _flat_connection([Residue.from_imag(0.3), Residue.from_imag(-0.3 + n)])
    assert chern_weil_degree(conn) == pytest.approx(-float(n), abs=1e-12)


def test_chern_weil_smooth_reference_degrees():
    for d in (1, -2, 0):
        conn = make_sphere_connection(degree=d, decoration=((1, 2, 0.3), (2, 4, -0.2)))
        assert chern_weil_degree(conn) == pytest.approx(float(d), abs=1e-10)


def test_chern_weil_integrality_random_instances(rng):
    for _ in range(100):
        d = int(rng.integers(-3, 4))
        n_p = int(rng.integers(0, 4))
        punctures = tuple(
            Puncture(
                location=(float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(1, 2))),
                residue=Residue.from_fraction(
                    Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 7)))
                ),
                local_terms=(LocalTerm(power=2, harmonic=0, c=float(rng.normal())),),
            )
            for _ in range(n_p)
        )
        deco = tuple(
            (int(rng.integers(1, 5)), 2 * int(rng.integers(1, 4)), float(rng.normal()))
            for _ in range(int(rng.integers(0, 3)))
        )
        conn = make_sphere_connection(degree=d, punctures=punctures, decoration=deco)
        cw = chern_weil_degree(conn)
        assert abs(cw - round(cw)) < 1e-6
        assert round(cw) == d
        for j in range(n_p):
            res = conn.punctures[j].residue
            assert limit_holonomy(conn, j) == pytest.approx(
                np.exp(2 * np.pi * res.value), abs=1e-8
            )


def test_orbifold_degree_examples():
    flat = _flat_connection(
        [Residue.from_fraction(Fraction(1, 2)), Residue.from_fraction(Fraction(-1, 2))]
    )
    assert orbifold_degree(flat) == Fraction(0)

    half = make_sphere_connection(
        degree=1, punctures=(Puncture(location=(1.0, 1.0),
                                      residue=Residue.from_fraction(Fraction(-1, 2))),)
    )
    assert orbifold_degree(half) == Fraction(1, 2)

    smooth = make_sphere_connection(degree=-2)
    assert orbifold_degree(smooth) == Fraction(-2)

    with pytest.raises(ValueError, match="rational"):
        orbifold_degree(_flat_connection([Residue.from_imag(0.3)]))


def test_trivialization_shift_cancels_exactly():
    conn = make_sphere_connection(
        degree=2,
        punctures=(
            Puncture(location=(1.0, 1.0), residue=Residue.from_fraction(Fraction(1, 3))),
            Puncture(location=(4.0, 2.0), residue=Residue.from_fraction(Fraction(-5, 6))),
        ),
    )
    before = orbifold_degree(conn)
    for n in (1, -2, 7):
        shifted = shift_connection_trivialization(conn, 0, n)
        assert shifted.punctures[0].residue.rational == Fraction(1, 3) + n
        assert shifted.punctures[0].trivialization == n
        assert orbifold_degree(shifted) == before  # exact Fraction equality
        assert chern_weil_degree(shifted) == pytest.approx(
            chern_weil_degree(conn) - n, abs=1e-10
        )


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------


def test_node_residues_match():
    ra, rb = make_node_residues(Fraction(2, 5))
    assert ra.rational == Fraction(2, 5) and rb.rational == Fraction(-2, 5)
    assert node_matching_defects([(ra, rb)]) == []
    bad = (Residue.from_fraction(Fraction(1, 2)), Residue.from_fraction(Fraction(1, 2)))
    assert node_matching_defects([(ra, rb), bad]) == [1]
    # holonomies at the two preimages multiply to 1
    hol = np.exp(2 * np.pi * ra.value) * np.exp(2 * np.pi * rb.value)
    assert hol == pytest.approx(1.0, abs=1e-14)


# ---------------------------------------------------------------------------
# balanced temporal gauge
# ---------------------------------------------------------------------------


def test_balanced_gauge_already_flat():
    d = CylinderDomain(half_length=2.0, n_t=33, n_theta=16)
    lam = 0.25j
    a_t = np.zeros((33, 16), dtype=np.complex128)
    a_theta = np.full((33, 16), lam)
    out = balanced_temporal_gauge(d, a_t, a_theta)
    assert out.lam == pytest.approx(lam, abs=1e-15)
    assert np.max(np.abs(out.a_theta - lam)) < 1e-14
    assert out.max_excess <= 1e-12


def test_balanced_gauge_recovers_flat_part_of_exact_gauge():
    # alpha = lambda dtheta + dg with band-limited periodic g: the angular
    # mean on the middle circle sees dg exactly cancel
    d = CylinderDomain(half_length=3.0, n_t=121, n_theta=64)
    lam = 0.25j
    t = d.t[:, None]
    th = d.theta[None, :]
    a_t = 1j * 0.3 * np.cos(t) * np.cos(2 * th)
    a_theta = lam + 1j * (-0.6 * np.sin(t) * np.sin(2 * th) - 0.1 * np.sin(th))
    out = balanced_temporal_gauge(d, a_t, a_theta)
    assert out.lam == pytest.approx(lam, abs=1e-12)
    # gauge-flat input: transformed coefficient collapses to lambda up to
    # the mixed-stencil discretization error
    assert np.max(np.abs(out.a_theta - lam)) < 5e-3
    assert out.max_excess <= 1e-12


def test_balanced_gauge_envelope_on_vortex_like_curvature():
    d = CylinderDomain(half_length=6.0, n_t=97, n_theta=16)
    lam = 0.4j
    t = d.t[:, None]
    th = d.theta[None, :]
    eta = 0.8
    density = eta * np.exp(np.abs(t) - 6.0) * (0.3 + 0.2 * np.cos(th)) * np.sign(np.sin(t))
    dt_grid = np.zeros_like(density)
    dt_grid[1:] = np.cumsum(0.5 * (density[1:] + density[:-1]) * d.dt, axis=0)
    a_theta = lam + 1j * (dt_grid - dt_grid[48])
    a_t = np.zeros_like(a_theta)
    out = balanced_temporal_gauge(d, a_t, a_theta)
    assert out.lam == pytest.approx(lam, abs=1e-12)
    assert out.max_excess <= 1e-12
    # the envelope dominates the actual drift everywhere
    assert np.all(np.abs(out.a_theta - out.lam) <= out.envelope + 1e-12)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_connection_roundtrip(tmp_path):
    conn = make_sphere_connection(
        degree=1,
        punctures=(
            Puncture(
                location=(1.0, 1.5),
                residue=Residue.from_fraction(Fraction(-3, 7)),
                trivialization=2,
                local_terms=(LocalTerm(power=2, harmonic=1, c=0.3, s=-0.4),),
            ),
            Puncture(location=(4.0, 1.0), residue=Residue.from_imag(0.125)),
        ),
        decoration=((1, 2, 0.5),),
    )
    save_connection(conn, tmp_path / "c.json", tmp_path / "c.csv")
    back = load_connection(tmp_path / "c.json", tmp_path / "c.csv")
    assert np.array_equal(back.curvature, conn.curvature)
    assert back.punctures[0].residue.rational == Fraction(-3, 7)
    assert back.punctures[0].trivialization == 2
    assert back.punctures[0].local_terms == conn.punctures[0].local_terms
    assert back.punctures[1].residue.rational is None
    assert back.punctures[1].residue.imag == 0.125
    assert (tmp_path / "c.json").read_text().count('"rational": "-3/7"') == 1


def test_connection_rejects_bad_grids():
    with pytest.raises(ValueError, match="shape"):
        MeromorphicConnection(n_u=8, n_v=8, curvature=np.zeros((8, 8)) * 1j)
    bad = np.full((8, 9), np.nan) * 1j
    with pytest.raises(ValueError, match="finite"):
        MeromorphicConnection(n_u=8, n_v=8, curvature=bad)
    with pytest.raises(ValueError, match="imaginary"):
        MeromorphicConnection(n_u=8, n_v=8, curvature=np.ones((8, 9), dtype=np.complex128))
