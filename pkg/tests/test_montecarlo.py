import numpy as np
import pytest

from nesscorr import montecarlo as mc
from nesscorr.correlation import evolve_coupled, zero_field
from nesscorr.density import constant_field, stationary_density
from nesscorr.models import (
    BEPSpec,
    DomainError,
    GLSpec,
    PilesSpec,
    UsageError,
    irw,
    sep,
    sip,
)


def test_t0_returns_initial():
    spec = sep(5, 1, rho_minus=0.2, rho_plus=0.8)
    eta0 = np.array([1, 0, 1, 0])
    out = mc.simulate_jump(spec, eta0, 0.0, seed=1)
    assert np.array_equal(out, eta0)

    gl = GLSpec(5, 0.1, 0.9)
    z0 = np.array([0.3, 0.1, 0.5, 0.2])
    assert np.allclose(mc.simulate_diffusion(gl, z0, 0.0, 1e-3, seed=1), z0)


def test_exclusion_bound_holds_along_trajectories():
    spec = sep(6, 1, rho_minus=0.3, rho_plus=0.9)
    init = mc.sample_initial_ensemble(spec, stationary_density(spec),
                                      "binomial", 400, seed=7)
    for t in (0.05, 0.35):
        out = mc.sample_paths(spec, init.copy(), t, seed=11)
        assert out.min() >= 0 and out.max() <= 1


def test_bulk_only_conserves_particles():
    spec = sip(6, 1, rho_minus=0.4, rho_plus=0.9)
    init = mc.sample_initial_ensemble(spec, constant_field(spec, 0.7),
                                      "negative-binomial", 300, seed=3)
    before = init.sum(axis=1).copy()
    out = mc.sample_paths(spec, init, 0.4, seed=5, with_boundary=False)
    assert np.array_equal(out.sum(axis=1), before)

    piles = PilesSpec(6, 2, 0.2, 0.4)
    init = mc.sample_initial_ensemble(piles, constant_field(piles, 1.0),
                                      "negative-binomial", 300, seed=3)
    before = init.sum(axis=1).copy()
    out = mc.sample_paths(piles, init, 0.3, seed=5, with_boundary=False)
    assert np.array_equal(out.sum(axis=1), before)


def test_determinism_bit_identical():
    spec = sip(5, 1, rho_minus=0.3, rho_plus=0.8)
    a = mc.estimate_fields(spec, stationary_density(spec),
                           "negative-binomial", 0.2, 2000, seed=42)
    b = mc.estimate_fields(spec, stationary_density(spec),
                           "negative-binomial", 0.2, 2000, seed=42)
    assert np.array_equal(a.rho_mean, b.rho_mean)
    assert np.array_equal(a.rho_se, b.rho_se)
    assert a.pairs == b.pairs
    c = mc.estimate_fields(spec, stationary_density(spec),
                           "negative-binomial", 0.2, 2000, seed=43)
    assert not np.array_equal(a.rho_mean, c.rho_mean)


def test_doubling_m_halves_standard_error():
    spec = sep(6, 1, rho_minus=0.2, rho_plus=0.8)
    prof = stationary_density(spec)
    a = mc.estimate_fields(spec, prof, "binomial", 0.1, 4000, seed=1)
    b = mc.estimate_fields(spec, prof, "binomial", 0.1, 16000, seed=1)
    ratio = np.mean(a.rho_se / b.rho_se)
    assert ratio == pytest.approx(2.0, rel=0.2)


def test_sampler_families():
    spec = sep(6, 2, rho_minus=1.0, rho_plus=1.0)
    draws = mc.sample_initial_ensemble(spec, constant_field(spec, 1.0),
                                       "binomial", 20000, seed=9)
    assert draws.min() >= 0 and draws.max() <= 2
    assert draws.mean() == pytest.approx(1.0, abs=0.02)
    assert draws.var() == pytest.approx(0.5, rel=0.08)  # Binomial(2, 1/2)

    sp = sip(6, 1.5, rho_minus=0.6, rho_plus=0.6)
    draws = mc.sample_initial_ensemble(sp, constant_field(sp, 0.6),
                                       "negative-binomial", 20000, seed=9)
    lam = 0.6 / (1.5 + 0.6)
    var = 1.5 * lam / (1 - lam) ** 2
    assert draws.mean() == pytest.approx(0.6, abs=0.02)
    assert draws.var() == pytest.approx(var, rel=0.08)

    det = mc.sample_initial_ensemble(spec, constant_field(spec, 1.4),
                                     "deterministic", 3, seed=0)
    assert np.all(det == 1)

    with pytest.raises(UsageError):
        mc.sample_initial_ensemble(spec, constant_field(spec, 1.0),
                                   "poisson", 5, seed=0)


def test_irw_equilibrium_pair_field_vanishes():
    spec = irw(6, c=1.0, rho_minus=0.6, rho_plus=0.6)
    est = mc.estimate_fields(spec, constant_field(spec), "poisson",
                             0.3, 20000, seed=17)
    for (x, y, mean, se) in est.pairs:
        assert abs(mean) <= 3.5 * se + 1e-12


def test_sep_equilibrium_invariance():
    spec = sep(5, 1, rho_minus=0.5, rho_plus=0.5)
    est = mc.estimate_fields(spec, constant_field(spec), "binomial",
                             0.2, 20000, seed=23)
    assert np.all(np.abs(est.rho_mean - 0.5) <= 3.5 * est.rho_se)
    for (x, y, mean, se) in est.pairs:
        assert abs(mean) <= 3.5 * se


def test_gl_equilibrium_mean():
    spec = GLSpec(6, 0.4, 0.4)
    est = mc.estimate_fields(spec, constant_field(spec), "gaussian",
                             0.1, 5000, seed=2, dt=2e-3)
    assert np.all(np.abs(est.rho_mean - 0.4) <= 3.5 * est.rho_se)


def test_bep_equilibrium_mean_and_diagonal():
    spec = BEPSpec(5, 1.0, 0.7, 0.7)
    est = mc.estimate_fields(spec, constant_field(spec), "gamma",
                             0.1, 8000, seed=4, dt=1e-3)
    assert np.all(np.abs(est.rho_mean - 1.4) <= 3.5 * est.rho_se)
    # Gamma(alpha, 2T) zeroes the extended diagonal
    for (x, y, mean, se) in est.pairs:
        if x == y:
            assert abs(mean) <= 4 * se + 0.02


def test_bep_negative_state_rejected():
    spec = BEPSpec(5, 1.0, 0.5, 0.5)
    with pytest.raises(DomainError):
        mc.simulate_diffusion(spec, np.array([-1.0, 0.5, 0.5, 0.5]), 0.1,
                              1e-3, seed=0)
    with pytest.raises(UsageError):
        mc.simulate_diffusion(spec, np.full(4, 0.5), 0.1, -1e-3, seed=0)


def test_mc_matches_closed_evolution_small_case():
    spec = sep(5, 1, rho_minus=0.15, rho_plus=0.85)
    rho0 = stationary_density(spec)
    est = mc.estimate_fields(spec, rho0, "binomial", 0.5, 30000, seed=31)
    _, phi = evolve_coupled(spec, zero_field(spec), rho0, 0.5)
    for (x, y, mean, se) in est.pairs:
        assert abs(mean - phi.value(x, y)) <= 3.5 * se


def test_piles_equilibrium_and_logseries_reservoirs():
    spec = PilesSpec(5, 2, 0.25, 0.25)
    target = 2 * 0.25 / 0.75
    est = mc.estimate_fields(spec, constant_field(spec, target),
                             "negative-binomial", 0.25, 20000, seed=6)
    assert np.all(np.abs(est.rho_mean - target) <= 3.5 * est.rho_se)
    for (x, y, mean, se) in est.pairs:
        assert abs(mean) <= 3.5 * se + 1e-3


def test_piles_mc_matches_closed_evolution():
    spec = PilesSpec(4, 1, 0.1, 0.3)
    rho0 = stationary_density(spec)
    est = mc.estimate_fields(spec, rho0, "negative-binomial", 0.4, 30000,
                             seed=13)
    _, phi = evolve_coupled(spec, zero_field(spec), rho0, 0.4)
    for (x, y, mean, se) in est.pairs:
        assert abs(mean - phi.value(x, y)) <= 3.5 * se


def test_sampler_diagonal_identity_at_t0():
    # the extended diagonal estimator is centered at zero on product draws
    for spec, family in ((sep(5, 2, rho_minus=0.8, rho_plus=0.8), "binomial"),
                         (sip(5, 1, rho_minus=0.5, rho_plus=0.5),
                          "negative-binomial"),
                         (irw(5, c=2.0, rho_minus=0.6, rho_plus=0.6),
                          "poisson")):
        est = mc.estimate_fields(spec, constant_field(spec), family, 0.0,
                                 20000, seed=21)
        for (x, y, mean, se) in est.pairs:
            if x == y:
                assert abs(mean) <= 3.5 * se
