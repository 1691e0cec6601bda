# test_models.py
import math

import numpy as np
import pytest
from scipy import integrate

from core import DecoherenceParams, DomainError, ValidationError
from evolution import damping_rate, frequency_shift, propagate_closed_form
from models import (
    KIND_EPR,
    KIND_RABI,
    KIND_SPIN,
    CatScenario,
    OscillatorScenario,
    TwoLevelScenario,
    annihilation_operator,
    cat_density,
    cat_interference_rate,
    coherent_amplitude,
    coherent_state,
    epr_transit,
    fock_matrix_decoherence,
    free_particle_spread,
    milburn_frozen_compare,
    oscillator_hamiltonian,
    rabi_damping_vs_n,
    rabi_population_difference,
    spin_state_after_transit,
    stern_gerlach_probabilities,
    two_level_coherence,
    undamped_half_width,
)
from observables import averaged_phase_factor, averaged_signal, trace_product


# ─── Oscillator ────────────────────────────────────────────────────────────────
def test_coherent_amplitude_reference(params):
    sc = OscillatorScenario(alpha0=2.0, omega=1.0)
    amplitude = coherent_amplitude(sc, params, 1.0)
    assert abs(amplitude) == pytest.approx(1.902932, abs=1e-6)
    assert np.angle(amplitude) == pytest.approx(-0.996687, abs=1e-6)
    assert coherent_amplitude(sc, params, 0.0) == 2.0


def test_coherent_amplitude_matches_matrix_propagation(params):
    sc = OscillatorScenario(alpha0=2.0 + 0.5j, omega=1.0, dim=40)
    state = propagate_closed_form(coherent_state(sc), oscillator_hamiltonian(sc), params, 1.0)
    propagated = trace_product(state, annihilation_operator(sc.dim))
    assert abs(propagated - coherent_amplitude(sc, params, 1.0)) < 1e-8


def test_coherent_amplitude_decays_monotonically(params):
    sc = OscillatorScenario(alpha0=2.0, omega=1.0)
    ladder = [abs(coherent_amplitude(sc, params, 2.0 ** k)) for k in range(12)]
    assert all(a > b for a, b in zip(ladder, ladder[1:]))
    assert ladder[-1] < 1e-40


def test_truncation(params):
    assert OscillatorScenario(alpha0=2.0, omega=1.0).dim == 44
    with pytest.raises(DomainError, match="truncation"):
        OscillatorScenario(alpha0=2.0, omega=1.0, dim=10)


def test_frozen_frequency_comparison():
    params = DecoherenceParams(tau1=1.0, tau2=1.0)
    result = milburn_frozen_compare(2.0 * math.pi, params, 1.0)
    assert result.ours == pytest.approx(math.log(1.0 + 4.0 * math.pi ** 2) / 2.0)
    assert result.ours == pytest.approx(1.850384, abs=1e-6)
    assert result.milburn == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        milburn_frozen_compare(0.0, params, 1.0)


def test_small_frequency_comparison_vanishes():
    params = DecoherenceParams(tau1=0.5, tau2=1.0)
    result = milburn_frozen_compare(1e-8, params, 1.0)
    assert result.ours < 1e-16 and result.milburn < 1e-15


def test_fock_elements(params):
    sc = OscillatorScenario(alpha0=2.0, omega=1.0)
    poisson = math.exp(-4.0) * 4.0 ** 3 / math.factorial(3)
    assert fock_matrix_decoherence(sc, params, 5.0, 3, 3) == pytest.approx(poisson, rel=1e-12)
    state = propagate_closed_form(coherent_state(sc), oscillator_hamiltonian(sc), params, 1.0)
    assert abs(fock_matrix_decoherence(sc, params, 1.0, 1, 0) - state.entries[1, 0]) < 1e-10
    assert fock_matrix_decoherence(sc, params, 1e6, 1, 0) == 0j
    with pytest.raises(ValidationError, match="index"):
        fock_matrix_decoherence(sc, params, 1.0, sc.dim, 0)


# ─── Free Particle ─────────────────────────────────────────────────────────────
def test_free_particle_spread():
    params = DecoherenceParams(tau1=0.01, tau2=0.01)
    assert free_particle_spread(1.0, 0.1, params, 10.0) == pytest.approx(2.001, rel=1e-12)
    assert free_particle_spread(1.0, 0.1, params, 0.0) == 1.0


# ─── Schrödinger Cat ───────────────────────────────────────────────────────────
@pytest.fixture
def cat():
    return CatScenario(sigma_x=1.0, D=10.0, m=1.0)


def test_cat_velocity_spread_is_minimum_uncertainty(cat):
    assert cat.sigma_v == pytest.approx(0.5)
    with pytest.raises(ValidationError, match="contradicts"):
        CatScenario(sigma_x=1.0, D=10.0, m=1.0, sigma_v=0.7)
    with pytest.raises(ValidationError):
        CatScenario(sigma_x=1.0, D=10.0, m=1.0, minimum_uncertainty=False)


def test_cat_center_never_decoheres(cat, params):
    values = [cat_density(cat, params, 0.0, t) for t in (0.1, 1.0, 100.0)]
    assert values[0] == pytest.approx(values[1], abs=1e-15)
    assert values[0] == pytest.approx(values[2], abs=1e-15)
    assert cat_interference_rate(cat, params, 0.0) == 0.0


def test_cat_rate_is_the_damping_rate(cat, params):
    for x in (0.5, 2.0, -3.0):
        assert cat_interference_rate(cat, params, x) == pytest.approx(damping_rate(cat.omega(x), params))


def test_cat_density_matches_averaged_signal(cat, params):
    x, t = 1.3, 2.0
    psi1, psi2 = cat.envelopes(x)
    omega = float(cat.omega(x))
    averaged = averaged_signal(lambda s: math.cos(omega * s), t, params, bound=1.0)
    expected = 0.5 * (psi1 ** 2 + psi2 ** 2) + psi1 * psi2 * averaged
    assert cat_density(cat, params, x, t) == pytest.approx(expected, abs=1e-8)


def test_cat_density_is_normalized(params):
    sc = CatScenario(sigma_x=1.0, D=12.0, m=1.0)
    total, _ = integrate.quad(lambda x: cat_density(sc, params, x, 1.0), -40.0, 40.0,
                              points=(-6.0, 0.0, 6.0), limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_half_width_shrinks_with_mass(params):
    widths = [undamped_half_width(CatScenario(sigma_x=1.0, D=10.0, m=m, sigma_v=0.5, minimum_uncertainty=False),
                                  params, 10.0)
              for m in (1.0, 10.0, 100.0)]
    assert widths[0] > widths[1] > widths[2] > 0


def test_half_width_is_where_envelope_halves(cat, params):
    x = undamped_half_width(cat, params, 10.0)
    assert math.exp(-cat_interference_rate(cat, params, x) * 10.0) == pytest.approx(0.5, rel=1e-9)


# ─── Two-Level Systems ─────────────────────────────────────────────────────────
def test_zero_splitting_survives():
    sc = TwoLevelScenario(kind=KIND_SPIN, splitting=0.0, L=1.0, v=1.0)
    assert two_level_coherence(sc, DecoherenceParams(0.1, 0.1)).survival == 1.0


def test_spin_survival_after_a_full_larmor_turn(params):
    sc = TwoLevelScenario(kind=KIND_SPIN, splitting=1.0, L=2.0 * math.pi, v=1.0)
    report = two_level_coherence(sc, params)
    assert report.survival == pytest.approx(0.731543, abs=2e-6)
    state = spin_state_after_transit(sc, params)
    assert abs(state.entries[0, 1]) == pytest.approx(0.5 * report.survival, abs=1e-12)


def test_stern_gerlach_probabilities(params):
    sc = TwoLevelScenario(kind=KIND_SPIN, splitting=1.0, L=1.0, v=1.0)
    plus, minus = stern_gerlach_probabilities(sc, params)
    assert plus + minus == pytest.approx(1.0)
    assert plus > 0.5
    plus, minus = stern_gerlach_probabilities(sc, params, t=2000.0)
    assert plus == pytest.approx(0.5, abs=1e-6) and minus == pytest.approx(0.5, abs=1e-6)


def test_transit_needs_geometry(params):
    sc = TwoLevelScenario(kind=KIND_SPIN, splitting=1.0)
    with pytest.raises(DomainError, match="transit geometry"):
        two_level_coherence(sc, params)
    with pytest.raises(ValidationError, match="both L and v"):
        TwoLevelScenario(kind=KIND_SPIN, splitting=1.0, L=1.0)


def test_epr_transit(params):
    sc = TwoLevelScenario(kind=KIND_EPR, splitting=1.0, L=2.0 * math.pi, v=1.0)
    report = epr_transit(sc, params)
    gamma = damping_rate(1.0, params)
    assert report.survival == pytest.approx(math.exp(-gamma * 2.0 * math.pi), rel=1e-12)
    assert report.populations == pytest.approx((0.0, 0.5, 0.5, 0.0), abs=1e-12)
    long_haul = epr_transit(sc, params, t=5.0 / gamma)
    assert long_haul.survival < 0.01
    assert long_haul.populations == pytest.approx((0.0, 0.5, 0.5, 0.0), abs=1e-12)


@pytest.fixture
def rabi():
    return TwoLevelScenario(kind=KIND_RABI, g=5.0, n_photons=0)


def test_rabi_splitting_follows_photon_number():
    assert TwoLevelScenario(kind=KIND_RABI, g=2.0, n_photons=3).splitting == pytest.approx(4.0)
    with pytest.raises(ValidationError, match="contradicts"):
        TwoLevelScenario(kind=KIND_RABI, g=2.0, n_photons=3, splitting=1.0)


def test_rabi_population_difference(rabi, params):
    assert rabi_population_difference(rabi, params, 0.0) == pytest.approx(1.0)
    gamma, nu = damping_rate(5.0, params), frequency_shift(5.0, params)
    for t in (0.1, 0.7, 2.5):
        d = rabi_population_difference(rabi, params, t)
        assert d == pytest.approx(math.exp(-gamma * t) * math.cos(nu * t), abs=1e-12)


def test_rabi_envelope_rate(rabi, params):
    gamma = damping_rate(5.0, params)
    assert gamma == pytest.approx(math.log(1.25) / 0.2) and gamma == pytest.approx(1.115718, abs=1e-6)
    nu = frequency_shift(5.0, params)
    peaks = np.arange(1, 12) * math.pi / nu
    d = np.array([rabi_population_difference(rabi, params, t) for t in peaks])
    slope = np.polyfit(peaks, np.log(np.abs(d)), 1)[0]
    assert -slope == pytest.approx(gamma, rel=0.02)


def test_rabi_relaxes_to_equal_populations(rabi, params):
    t = 10.0 / damping_rate(5.0, params)
    d = rabi_population_difference(rabi, params, t)
    assert abs(d) < 0.01
    assert abs(0.5 * (1.0 + d) - 0.5) < 0.005


def test_rabi_damping_table():
    table = rabi_damping_vs_n(1.0, [0], DecoherenceParams(1.0, 1.0))
    assert table.rows[0][1] == pytest.approx(math.log(2.0) / 2.0)
    assert math.isnan(table.exponent)
    table = rabi_damping_vs_n(5.0, range(51), DecoherenceParams(0.1, 0.1))
    gammas = [gamma for _, gamma in table.rows]
    assert all(a < b for a, b in zip(gammas, gammas[1:]))
    assert 0.0 < table.exponent < 1.0


def test_phase_factor_reference(params):
    value = averaged_phase_factor(1.0, params, 1.0)
    assert abs(value) == pytest.approx(0.951466, abs=1e-6)
    assert np.angle(value) == pytest.approx(0.996687, abs=1e-6)
    assert abs(averaged_phase_factor(-1.0, params, 1.0) - value.conjugate()) < 1e-15
