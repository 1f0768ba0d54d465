import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nesscorr.density import (
    DensityField,
    apply_lap1d,
    constant_field,
    evolve_density,
    field_from_interior,
    rate_family_profile_coefficients,
    stationary_density,
    stationary_density_tridiag,
)
from nesscorr.models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    UsageError,
    boundary_values,
    sep,
    sip,
)


def test_lap_of_affine_profile_vanishes():
    spec = sep(8, 1, rho_minus=0.2, rho_plus=0.9)
    prof = stationary_density(spec)
    out = apply_lap1d(spec, prof)
    assert np.max(np.abs(out.values)) < 1e-9


def test_lap_spec_example_n4():
    spec = sep(4, 1, lam_minus=1.0, lam_plus=0.5, rho_minus=0.0001,
               rho_plus=0.9999)
    f = DensityField(4, np.array([0.0, 0.2, 0.4, 0.6, 1.0]))
    out = apply_lap1d(spec, f)
    # interior of the example profile is stationary for these couplings
    # up to the tiny admissibility offset on the pinned entries
    spec2 = RateFamilySpec(4, 1.0, -1.0, 1.0, 0.5, 1e-12, 1 - 1e-12)
    out2 = apply_lap1d(spec2, f)
    assert np.max(np.abs(out2.values[1:-1])) < 1e-9
    assert abs(out.values[1]) < 1e-2  # perturbed only through the ghosts


def test_lap_constant_profile():
    spec = sip(6, 2, rho_minus=0.4, rho_plus=0.4)
    out = apply_lap1d(spec, constant_field(spec))
    assert np.max(np.abs(out.values)) == 0.0


def test_stationary_examples():
    spec = sep(4, 1, rho_minus=1e-12, rho_plus=1 - 1e-12)
    prof = stationary_density(spec)
    assert np.allclose(prof.values, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-9)

    spec = RateFamilySpec(4, 1.0, -1.0, 1.0, 0.5, 1e-12, 1 - 1e-12)
    prof = stationary_density(spec)
    assert np.allclose(prof.interior, [0.2, 0.4, 0.6], atol=1e-9)

    spec = sip(7, 1, rho_minus=0.6, rho_plus=0.6)
    prof = stationary_density(spec)
    assert np.allclose(prof.values, 0.6)


@settings(max_examples=25, deadline=None)
@given(
    N=st.integers(min_value=3, max_value=64),
    lam_m=st.floats(min_value=0.05, max_value=1.0),
    lam_p=st.floats(min_value=0.05, max_value=1.0),
    rho_m=st.floats(min_value=0.01, max_value=0.99),
    rho_p=st.floats(min_value=0.01, max_value=0.99),
)
def test_closed_form_coefficients_match_solve(N, lam_m, lam_p, rho_m, rho_p):
    spec = RateFamilySpec(N, 1.0, -1.0, lam_m, lam_p, rho_m, rho_p)
    a, b = rate_family_profile_coefficients(spec)
    prof = stationary_density(spec)
    x = np.arange(1, N)
    assert np.allclose(prof.interior, a * x + b, atol=1e-11)
    tri = stationary_density_tridiag(spec)
    assert np.allclose(prof.values, tri.values, atol=1e-12)


@pytest.mark.parametrize("spec", [
    sep(12, 2, lam_minus=0.3, lam_plus=0.8, rho_minus=0.3, rho_plus=1.7),
    BEPSpec(9, 1.5, 0.4, 0.9, "generator"),
    BEPSpec(9, 1.5, 0.4, 0.9, "paper"),
    PilesSpec(9, 2, 0.1, 0.4, "generator"),
    PilesSpec(9, 2, 0.1, 0.4, "paper"),
    GLSpec(9, -0.5, 0.5),
])
def test_stationary_matches_tridiagonal(spec):
    a = stationary_density(spec)
    b = stationary_density_tridiag(spec)
    assert np.allclose(a.values, b.values, atol=1e-12)
    out = apply_lap1d(spec, a)
    assert np.max(np.abs(out.values)) < 1e-8


def test_piles_ghosts_by_mode():
    gen = PilesSpec(6, 3, 0.2, 0.4, "generator")
    pap = PilesSpec(6, 3, 0.2, 0.4, "paper")
    assert boundary_values(gen)[0] == pytest.approx(3 * 0.25)
    assert boundary_values(pap)[0] == pytest.approx(0.25)


def test_evolve_fixed_point_and_long_time():
    spec = sep(8, 1, rho_minus=0.2, rho_plus=0.9)
    prof = stationary_density(spec)
    out = evolve_density(spec, prof, 0.7)
    assert np.allclose(out.values, prof.values, atol=1e-12)

    f0 = constant_field(spec, 0.55)
    out = evolve_density(spec, f0, 50.0)
    assert np.max(np.abs(out.values - prof.values)) < 1e-8


def test_evolve_equilibrium_flat():
    spec = sip(6, 1, rho_minus=0.4, rho_plus=0.4)
    f0 = constant_field(spec)
    out = evolve_density(spec, f0, 0.3)
    assert np.allclose(out.values, 0.4, atol=1e-12)


def test_evolve_linearity():
    spec = sep(7, 1, rho_minus=0.2, rho_plus=0.8)
    rng = np.random.default_rng(3)
    u = field_from_interior(spec, rng.uniform(0, 1, 6))
    v = field_from_interior(spec, rng.uniform(0, 1, 6))
    w = field_from_interior(spec, 0.25 * u.interior + 0.75 * v.interior)
    t = 0.11
    eu = evolve_density(spec, u, t).interior
    ev = evolve_density(spec, v, t).interior
    ew = evolve_density(spec, w, t).interior
    assert np.allclose(ew, 0.25 * eu + 0.75 * ev, atol=1e-12)


def test_evolve_preserves_monotonicity():
    spec = sep(9, 1, lam_minus=0.6, rho_minus=0.1, rho_plus=0.9)
    vals = np.concatenate(([0.1], np.sort(np.random.default_rng(5).uniform(0.1, 0.9, 8)), [0.9]))
    f0 = DensityField(9, vals)
    for t in (0.01, 0.1, 1.0):
        out = evolve_density(spec, f0, t)
        assert np.all(np.diff(out.values) > -1e-12)


def test_negative_time_rejected():
    spec = sep(5, 1, rho_minus=0.2, rho_plus=0.8)
    with pytest.raises(UsageError):
        evolve_density(spec, stationary_density(spec), -0.1)


def test_large_lattice_integrator_path():
    spec = sep(160, 1, rho_minus=0.2, rho_plus=0.8)
    prof = stationary_density(spec)
    out = evolve_density(spec, prof, 0.05)
    assert np.max(np.abs(out.values - prof.values)) < 1e-8


def test_closed_form_matches_tridiag_at_n256():
    rng = np.random.default_rng(11)
    for _ in range(3):
        lam_m, lam_p = rng.uniform(0.05, 1.0, 2)
        rho_m, rho_p = rng.uniform(0.05, 0.95, 2)
        spec = RateFamilySpec(256, 1.0, -1.0, lam_m, lam_p, rho_m, rho_p)
        a = stationary_density(spec)
        b = stationary_density_tridiag(spec)
        assert np.max(np.abs(a.values - b.values)) < 1e-12
