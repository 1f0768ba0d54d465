import numpy as np
import pytest

from nesscorr.correlation import (
    MODE_EXCLUDED,
    MODE_MOMENT,
    build_generator2d,
    default_diagonal_mode,
    diagonal_value,
    evolve_correlation,
    evolve_coupled,
    field_from_function,
    gl_shift,
    gl_unshift,
    source_term,
    zero_field,
)
from nesscorr.density import DensityField, constant_field, stationary_density
from nesscorr.models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    UsageError,
    sep,
    sip,
    irw,
)
from nesscorr.walks import stationary_correlation_solve

from _diffusion_oracle import (
    bep_generator,
    gl_generator,
    moment_ode,
    propagate_moments,
)


def test_diagonal_value_identities():
    # matched product marginals zero the diagonal extension
    s = sip(5, 2, rho_minus=0.8, rho_plus=0.8)
    rho = 0.8
    sfm = (2 + 1) / 2 * rho ** 2  # negative-binomial factorial moment
    assert diagonal_value(s, sfm, rho) == pytest.approx(0.0)

    s = sep(5, 3, rho_minus=1.2, rho_plus=1.2)
    sfm = (3 - 1) / 3 * 1.2 ** 2  # binomial factorial moment
    assert diagonal_value(s, sfm, 1.2) == pytest.approx(0.0)

    s = irw(5, c=1.0, rho_minus=0.7, rho_plus=0.7)
    assert diagonal_value(s, 0.49, 0.7) == pytest.approx(0.0)

    with pytest.raises(UsageError):
        diagonal_value(sep(5, 1, rho_minus=0.5, rho_plus=0.5), 0.0, 0.5)


def test_default_modes():
    assert default_diagonal_mode(sep(5, 1, rho_minus=0.5, rho_plus=0.5)) == MODE_EXCLUDED
    assert default_diagonal_mode(sep(5, 2, rho_minus=0.5, rho_plus=0.5)) == MODE_MOMENT
    assert default_diagonal_mode(GLSpec(5, 0.0, 1.0)) == MODE_MOMENT


def test_exclusion_suppresses_diagonal_jumps():
    spec = sep(6, 1, rho_minus=0.2, rho_plus=0.8)
    gen = build_generator2d(spec, MODE_MOMENT)
    g = gen.geom
    row = gen.matrix[g.index(2, 3)].toarray().ravel()
    assert row[g.index(2, 2)] == 0.0
    assert row[g.index(3, 3)] == 0.0


def test_irw_correction_vanishes():
    spec = irw(6, c=1.0, rho_minus=0.2, rho_plus=0.8)
    gen = build_generator2d(spec)
    g = gen.geom
    nn = spec.N ** 2
    row = gen.matrix[g.index(2, 3)].toarray().ravel()
    # plain nearest-neighbour entries at rate c
    assert row[g.index(1, 3)] == pytest.approx(nn)
    assert row[g.index(2, 4)] == pytest.approx(nn)
    assert row[g.index(2, 2)] == pytest.approx(nn)
    assert row[g.index(3, 3)] == pytest.approx(nn)
    assert row[g.index(2, 3)] == pytest.approx(-4 * nn)


@pytest.mark.parametrize("spec", [
    sep(6, 1, lam_minus=0.4, rho_minus=0.2, rho_plus=0.7),
    sep(6, 2, rho_minus=0.4, rho_plus=1.4),
    sip(6, 1.5, lam_plus=0.6, rho_minus=0.2, rho_plus=0.9),
    irw(6, c=2.0, rho_minus=0.2, rho_plus=0.9),
    GLSpec(6, 0.1, 0.8),
    BEPSpec(6, 1.5, 0.4, 0.9, "generator"),
    PilesSpec(6, 2, 0.1, 0.4, "generator"),
    PilesSpec(6, 2, 0.1, 0.4, "paper"),
])
def test_generator_rows(spec):
    gen = build_generator2d(spec, MODE_MOMENT)
    g = gen.geom
    mat = gen.matrix.toarray()
    sums = mat.sum(axis=1)
    # frame rows identically zero
    assert np.max(np.abs(mat[g.is_boundary])) == 0.0
    # every row non-positive sum; interior rows conservative
    assert np.max(sums) < 1e-9
    for i in np.flatnonzero(~g.is_boundary):
        x, y = int(g.xs[i]), int(g.ys[i])
        touches_frame = (x == 1) or (y == spec.N - 1)
        if not touches_frame:
            assert abs(sums[i]) < 1e-9
        else:
            assert sums[i] < 1e-9
    # off-diagonal entries are rates: non-negative
    off = mat - np.diag(np.diag(mat))
    assert off.min() > -1e-12


def test_source_examples():
    spec = sep(8, 1, rho_minus=1e-9, rho_plus=1 - 1e-9)
    rho = stationary_density(spec)
    g = source_term(spec, rho)
    vals = g.values[g.geom.is_upper_diagonal]
    assert np.allclose(vals, -1.0, atol=1e-6)
    assert np.max(np.abs(g.values[~g.geom.is_upper_diagonal])) == 0.0

    spec_eq = sip(8, 1, rho_minus=0.4, rho_plus=0.4)
    g = source_term(spec_eq, stationary_density(spec_eq))
    assert np.max(np.abs(g.values)) == 0.0

    spec_irw = irw(8, c=1.0, rho_minus=0.1, rho_plus=0.9)
    g = source_term(spec_irw, stationary_density(spec_irw))
    assert np.max(np.abs(g.values)) == 0.0


def test_source_bounded_uniformly_in_n():
    vals = []
    for N in (8, 16, 32, 64, 128):
        spec = sep(N, 1, rho_minus=0.05, rho_plus=0.95)
        g = source_term(spec, stationary_density(spec))
        vals.append(np.max(np.abs(g.values)))
    assert np.max(vals) - np.min(vals) < 1e-9


def test_gl_shift_round_trip():
    spec = GLSpec(7, 0.0, 1.0)
    rng = np.random.default_rng(0)
    psi = zero_field(spec)
    mask = ~psi.geom.is_boundary
    psi.values[mask] = rng.normal(size=mask.sum())
    back = gl_unshift(gl_shift(psi))
    assert np.allclose(back.values, psi.values)
    with pytest.raises(UsageError):
        gl_unshift(psi)

    # unit-variance product start shifts to zero
    unit = field_from_function(spec, lambda x, y: 1.0 if x == y else 0.0)
    assert gl_shift(unit).values.max() == 0.0

    # variance sigma^2 leaves sigma^2 - 1 on the diagonal
    sig = field_from_function(spec, lambda x, y: 2.5 if x == y else 0.0)
    shifted = gl_shift(sig)
    assert shifted.values[shifted.geom.is_diagonal] == pytest.approx(1.5)


def test_evolve_zero_fixed_point():
    spec = sip(6, 1, rho_minus=0.4, rho_plus=0.4)
    phi0, rho0 = zero_field(spec), constant_field(spec)
    phi = evolve_correlation(spec, phi0, rho0, 0.3)
    assert phi.max_abs() < 1e-11


def test_evolve_reaches_stationary():
    spec = sep(8, 1, rho_minus=0.2, rho_plus=0.9)
    phi0, rho0 = zero_field(spec), constant_field(spec, 0.5)
    phi = evolve_correlation(spec, phi0, rho0, 50.0)
    ref = stationary_correlation_solve(spec)
    mask = ~phi.geom.is_boundary & ~phi.geom.is_diagonal
    assert np.max(np.abs(phi.values[mask] - ref.values[mask])) < 1e-8


def test_evolve_mode_mismatch_rejected():
    spec = sep(6, 1, rho_minus=0.2, rho_plus=0.8)
    phi0 = zero_field(spec, diagonal_mode=MODE_MOMENT)
    with pytest.raises(UsageError):
        evolve_correlation(spec, phi0, constant_field(spec), 0.1)


def test_gl_evolution_matches_symbolic_moments():
    spec = GLSpec(6, 0.15, 0.85)
    n = spec.N - 1
    drift, amat = gl_generator(n, spec.phi_minus, spec.phi_plus)
    A, cvec, pairs = moment_ode(n, drift, amat)
    rng = np.random.default_rng(1)
    m0 = rng.uniform(-0.5, 1.0, n)
    cov0 = np.diag(rng.uniform(0.5, 2.0, n))
    M20 = cov0 + np.outer(m0, m0)
    t = 0.17
    mt, M2t = propagate_moments(A, cvec, pairs, m0, M20, t,
                                speed=spec.N ** 2)
    phi0 = field_from_function(
        spec, lambda x, y: M20[x - 1, y - 1] - m0[x - 1] * m0[y - 1])
    rho0 = DensityField(spec.N, np.concatenate(
        [[spec.phi_minus], m0, [spec.phi_plus]]))
    rho_t, phi_t = evolve_coupled(spec, phi0, rho0, t)
    assert np.allclose(rho_t.interior, mt, atol=1e-10)
    for x in range(1, n + 1):
        for y in range(x, n + 1):
            ref = M2t[x - 1, y - 1] - mt[x - 1] * mt[y - 1]
            assert phi_t.value(x, y) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("mode,ok", [("generator", True), ("paper", False)])
def test_bep_evolution_vs_symbolic_moments(mode, ok):
    """The closed pair equation is exact for the self-consistent bath; the
    printed bath breaks it at the corner diagonal sites."""
    spec = BEPSpec(5, 1.5, 0.4, 0.9, mode)
    n = spec.N - 1
    drift, amat = bep_generator(n, spec.alpha, spec.T_minus, spec.T_plus,
                                corrected_bath=(mode == "generator"))
    A, cvec, pairs = moment_ode(n, drift, amat)
    m0 = np.linspace(1.0, 2.4, n)
    M20 = np.outer(m0, m0) + np.diag(m0 ** 2 / spec.alpha)
    t = 0.13
    mt, M2t = propagate_moments(A, cvec, pairs, m0, M20, t, speed=spec.N ** 2)
    al = spec.alpha

    def pair0(x, y):
        if x == y:
            return al / (al + 1) * M20[x - 1, x - 1] - m0[x - 1] ** 2
        return M20[x - 1, y - 1] - m0[x - 1] * m0[y - 1]

    phi0 = field_from_function(spec, pair0)
    from nesscorr.models import boundary_values

    gm, gp = boundary_values(spec)
    rho0 = DensityField(spec.N, np.concatenate([[gm], m0, [gp]]))
    _, phi_t = evolve_coupled(spec, phi0, rho0, t)
    worst = 0.0
    for x in range(1, n + 1):
        for y in range(x, n + 1):
            if x == y:
                ref = al / (al + 1) * M2t[x - 1, x - 1] - mt[x - 1] ** 2
            else:
                ref = M2t[x - 1, y - 1] - mt[x - 1] * mt[y - 1]
            worst = max(worst, abs(phi_t.value(x, y) - ref))
    if ok:
        assert worst < 1e-9
    else:
        assert worst > 1e-4  # printed bath: closure fails at the corners


def test_gl_stationary_solve_is_unit_diagonal():
    spec = GLSpec(9, -0.3, 0.6)
    phi = stationary_correlation_solve(spec)
    g = phi.geom
    assert np.allclose(phi.values[g.is_diagonal], 1.0, atol=1e-10)
    mask = ~g.is_boundary & ~g.is_diagonal
    assert np.max(np.abs(phi.values[mask])) < 1e-10
