import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from eoconv.core import EPS0, HBAR, hz_to_rad
from eoconv.coupling import (
    FieldProfile,
    Grid,
    MaterialEO,
    air_gap_factor,
    g_from_overlap,
    g_simplified,
    g_thickness_scaling,
    mode_volume_for_field,
    overlap_integral,
    phase_match,
    single_photon_field,
)
from eoconv.engine import cooperativity
from eoconv.errors import DomainError, GridMismatch, PhaseMatchingError, TraceParseError, ZeroNormVolume
from conftest import TWO_PI, make_system

MAT = MaterialEO()
W_P = hz_to_rad(193.5e12)
W_MW = hz_to_rad(8.941e9)
R = 2.4e-3
D = 0.4e-3
M = 20819


def _radial_gaussian_integral(r0, s):
    # int_0^inf r exp(-(r - r0)^2 / (2 s^2)) dr
    return s**2 * math.exp(-(r0**2) / (2 * s**2)) + r0 * s * math.sqrt(math.pi / 2) * (1 + erf(r0 / (math.sqrt(2) * s)))


def test_gaussian_overlap_matches_closed_form():
    r0, z0 = 50e-6, 0.0
    widths = [(4e-6, 6e-6), (5e-6, 3e-6), (6e-6, 5e-6)]
    s_r = sum(w[0] ** -2 for w in widths) ** -0.5
    s_z = sum(w[1] ** -2 for w in widths) ** -0.5
    grid = Grid.regular(0.0, r0 + 60e-6, 512, -40e-6, 40e-6, 512)
    p, mw, sb = (FieldProfile.gaussian(grid, r0, z0, a, b, m) for (a, b), m in zip(widths, (10, 1, 11)))
    exact = TWO_PI * _radial_gaussian_integral(r0, s_r) * s_z * math.sqrt(TWO_PI)
    assert overlap_integral(p, mw, sb).real == pytest.approx(exact, rel=1e-6)
    assert abs(overlap_integral(p, mw, sb).imag) < 1e-12 * exact


def test_norm_volume_of_gaussian():
    grid = Grid.regular(0.0, 200e-6, 400, -50e-6, 50e-6, 400)
    prof = FieldProfile.gaussian(grid, 100e-6, 0.0, 5e-6, 4e-6)
    # |psi|^2 halves the variance
    exact = TWO_PI * _radial_gaussian_integral(100e-6, 5e-6 / math.sqrt(2)) * 4e-6 / math.sqrt(2) * math.sqrt(TWO_PI)
    assert prof.norm_volume == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("mismatch", [1, 2, 3])
def test_azimuthal_mismatch_gives_zero(mismatch):
    grid = Grid.regular(R - 60e-6, R, 64, -40e-6, 40e-6, 64)
    p = FieldProfile.wgm_gaussian(grid, R, M)
    sb = FieldProfile.wgm_gaussian(grid, R, M + 1 + mismatch)
    mw = FieldProfile.rim_annulus(grid, R, 0.5e-3, D, 1)
    assert overlap_integral(p, mw, sb) == 0
    assert g_from_overlap(MAT, W_P, W_P, W_MW, (p, sb, mw)) == 0.0


def test_lower_sideband_selection_rule():
    grid = Grid.regular(R - 60e-6, R, 64, -40e-6, 40e-6, 64)
    p = FieldProfile.wgm_gaussian(grid, R, M)
    mw = FieldProfile.rim_annulus(grid, R, 0.5e-3, D, 1)
    lower = FieldProfile.wgm_gaussian(grid, R, M - 1)
    assert abs(overlap_integral(p, mw, lower, sign=-1)) > 0
    assert overlap_integral(p, mw, lower, sign=+1) == 0


def test_overlap_reduces_to_simplified_form():
    # uniform microwave field over the optical mode, identical optical
    # cross-sections, field amplitude from the microwave mode volume
    grid = Grid.regular(R - 60e-6, R, 256, -40e-6, 40e-6, 256)
    p = FieldProfile.wgm_gaussian(grid, R, M)
    sb = FieldProfile.wgm_gaussian(grid, R, M + 1)
    V_mw = 2.7e-9
    mw = FieldProfile(grid, np.ones((256, 256)), 1, V_mw)
    g_full = g_from_overlap(MAT, W_P, W_P, W_MW, (p, sb, mw))
    E = single_photon_field(W_MW, V_mw, MAT.eps_r_mw)
    assert g_full == pytest.approx(g_simplified(MAT, W_P, E), rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(0.01, 100.0), which=st.integers(0, 2))
def test_scale_invariance(c, which):
    grid = Grid.regular(R - 60e-6, R, 64, -40e-6, 40e-6, 64)
    profs = [FieldProfile.wgm_gaussian(grid, R, M), FieldProfile.wgm_gaussian(grid, R, M + 1),
             FieldProfile.rim_annulus(grid, R, 0.5e-3, D, 1)]
    g0 = g_from_overlap(MAT, W_P, W_P, W_MW, profs)
    profs[which] = profs[which].scaled(c)
    g1 = g_from_overlap(MAT, W_P, W_P, W_MW, profs)
    assert g1 >= 0
    assert g1 == pytest.approx(g0, rel=1e-12)


def test_reference_scale_coupling_rate():
    grid = Grid.regular(R - 60e-6, R, 256, -40e-6, 40e-6, 256)
    p = FieldProfile.wgm_gaussian(grid, R, M)
    sb = FieldProfile.wgm_gaussian(grid, R, M + 1)
    mw = FieldProfile.rim_annulus(grid, R, 0.5e-3, D, 1)
    g_hz = g_from_overlap(MAT, W_P, hz_to_rad(193.5e12 + 8.941e9), W_MW, (p, sb, mw)) / TWO_PI
    assert 10 <= g_hz <= 100


def test_zero_norm_volume_and_grid_mismatch():
    grid = Grid.regular(0, 1e-3, 8, -1e-3, 1e-3, 8)
    other = Grid.regular(0, 2e-3, 8, -1e-3, 1e-3, 8)
    p = FieldProfile.gaussian(grid, 5e-4, 0, 1e-4, 1e-4, 2)
    with pytest.raises(GridMismatch):
        overlap_integral(p, FieldProfile.gaussian(other, 5e-4, 0, 1e-4, 1e-4, 1), p)
    with pytest.raises(ZeroNormVolume):
        FieldProfile(grid, np.zeros((8, 8)), 1, None)
    with pytest.raises(ZeroNormVolume):
        FieldProfile(grid, np.ones((8, 8)), 1, 0.0)


def test_simplified_inversion_and_linearity():
    E = TWO_PI * 28 / (MAT.n_opt**2 * W_P * MAT.r33 / 2)
    assert E == pytest.approx(2.0e-3, rel=0.03)
    assert g_simplified(MAT, W_P, E) == pytest.approx(TWO_PI * 28, rel=1e-12)
    assert g_simplified(MAT, W_P, 0.0) == 0.0
    g = g_simplified(MAT, W_P, 1e-3)
    assert g_simplified(MaterialEO(r33=2 * MAT.r33), W_P, 1e-3) == pytest.approx(2 * g, rel=1e-14)
    assert g_simplified(MaterialEO(n_opt=MAT.n_opt * math.sqrt(2)), W_P, 1e-3) == pytest.approx(2 * g, rel=1e-14)
    assert g_simplified(MAT, 2 * W_P, 1e-3) == pytest.approx(2 * g, rel=1e-14)
    assert g_simplified(MAT, W_P, 2e-3) == pytest.approx(2 * g, rel=1e-14)


def test_single_photon_field():
    W = hz_to_rad(8.9e9)
    E_target = 2.0e-3
    V = mode_volume_for_field(W, E_target, 28.0)
    # oracle: hbar Omega / (2 eps0 eps_r E^2)
    assert V == pytest.approx(HBAR * W / (2 * EPS0 * 28.0 * E_target**2), rel=1e-14)
    assert V == pytest.approx(2.97e-9, rel=0.01)
    assert single_photon_field(W, V, 28.0) == pytest.approx(E_target, rel=1e-14)
    assert single_photon_field(W, 4 * V, 28.0) == pytest.approx(E_target / 2, rel=1e-14)
    with pytest.raises(DomainError):
        single_photon_field(W, 0.0, 28.0)


def test_air_gap_factor():
    assert air_gap_factor(D, 0.0, 28.0) == 1.0
    f = air_gap_factor(D, 20e-6, 28.0)
    assert f == pytest.approx(0.4 / (0.4 + 28 * 0.02), rel=1e-14)
    assert f == pytest.approx(0.42, abs=0.01)
    gaps = np.linspace(0, 100e-6, 50)
    vals = [air_gap_factor(D, g, 28.0) for g in gaps]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        air_gap_factor(0.0, 1e-6, 28.0)


def test_phase_match():
    assert phase_match(30000, 1) == (30001, 29999, False)
    pm = phase_match(30000, 0)
    assert pm.m_plus == pm.m_minus == 30000 and pm.degenerate
    co, counter = phase_match(30000, 1), phase_match(30000, -1)
    assert (counter.m_plus, counter.m_minus) == (co.m_minus, co.m_plus)
    with pytest.raises(PhaseMatchingError):
        phase_match(0, 1)
    with pytest.raises(PhaseMatchingError):
        phase_match(1, 1)


def test_thickness_scaling_and_cooperativity():
    g = TWO_PI * 7.43
    assert g_thickness_scaling(g, 0.4e-3, 50e-6) == pytest.approx(8 * g, rel=1e-14)
    assert g_thickness_scaling(g, 0.4e-3, 0.4e-3) == g
    g_new = g_thickness_scaling(7.43, 0.4e-3, 50e-6)
    G0 = cooperativity(make_system())
    assert cooperativity(make_system(g_hz=g_new)) == pytest.approx(64 * G0, rel=1e-12)


def test_profile_file_round_trip(tmp_path):
    grid = Grid.regular(R - 20e-6, R, 16, -10e-6, 10e-6, 12)
    prof = FieldProfile.wgm_gaussian(grid, R, M)
    prof = FieldProfile(grid, prof.values * np.exp(0.3j), M, None)
    path = tmp_path / "p.txt"
    prof.to_file(path)
    assert path.read_text().splitlines()[0] == "# r z re im"
    back = FieldProfile.from_file(path, m=M)
    np.testing.assert_allclose(back.values, prof.values, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(back.grid.r, grid.r, rtol=1e-11)
    assert back.norm_volume == pytest.approx(prof.norm_volume, rel=1e-9)


def test_profile_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("# r z re im\n0 0 1 0\n0 1 1\n")
    with pytest.raises(TraceParseError) as info:
        FieldProfile.from_file(bad)
    assert info.value.line_no == 3 and ":3:" in str(info.value)
    missing_header = tmp_path / "nohdr.txt"
    missing_header.write_text("0 0 1 0\n")
    with pytest.raises(TraceParseError):
        FieldProfile.from_file(missing_header)
    holes = tmp_path / "holes.txt"
    holes.write_text("# r z re im\n0 0 1 0\n1 0 1 0\n0 1 1 0\n")
    with pytest.raises(GridMismatch):
        FieldProfile.from_file(holes)
