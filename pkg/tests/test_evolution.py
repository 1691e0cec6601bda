# test_evolution.py
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from core import (
    BASIS_ENERGY,
    DecoherenceParams,
    DensityMatrix,
    DomainError,
    SpectralHamiltonian,
    Superoperator,
    ValidationError,
    bohr_frequencies,
    diagonalize_hamiltonian,
    pure_state,
    random_density_matrix,
    random_hermitian,
    to_energy_basis,
    unvectorize,
    vectorize,
)
from evolution import (
    damping_rate,
    finite_difference_step,
    frequency_shift,
    generator_apply,
    liouvillian,
    map_semigroup_propagate,
    milburn_factor,
    milburn_propagate,
    phase_destroying_rhs,
    propagate_closed_form,
    propagate_quadrature,
    propagate_steps,
    propagate_unitary,
    propagator_factor,
)
from helpers import rk4


# ─── Rates ─────────────────────────────────────────────────────────────────────
def test_rates_at_unit_product():
    params = DecoherenceParams(tau1=1.0, tau2=1.0)
    assert damping_rate(1.0, params) == pytest.approx(math.log(2.0) / 2.0, rel=1e-15)
    assert frequency_shift(1.0, params) == pytest.approx(math.pi / 4.0, rel=1e-15)


def test_rates_vanish_at_zero_frequency(params):
    assert damping_rate(0.0, params) == 0.0
    assert frequency_shift(0.0, params) == 0.0


def test_rates_are_even_and_odd(params):
    omegas = np.array([-3.0, -0.5, 0.5, 3.0])
    gamma = damping_rate(omegas, params)
    nu = frequency_shift(omegas, params)
    assert_allclose(gamma, gamma[::-1])
    assert_allclose(nu, -nu[::-1])
    assert np.all(np.diff(gamma[2:]) > 0)


def test_rate_at_large_product():
    params = DecoherenceParams(tau1=1.0, tau2=1.0)
    assert damping_rate(100.0, params) == pytest.approx(4.605220, abs=1e-6)


def test_factor_semigroup_property(rng):
    params = DecoherenceParams(tau1=0.3, tau2=0.7)
    freqs = bohr_frequencies(diagonalize_hamiltonian(random_hermitian(rng, 4)), params)
    a = propagator_factor(freqs, params, 0.37).factors
    b = propagator_factor(freqs, params, 1.91).factors
    assert_allclose(a * b, propagator_factor(freqs, params, 2.28).factors, atol=1e-12)


# ─── Closed Form ───────────────────────────────────────────────────────────────
def test_zero_time_returns_initial_state(two_level, params):
    spec, rho0 = two_level
    assert propagate_closed_form(rho0, spec, params, 0.0) is rho0


def test_negative_time_is_rejected(two_level, params):
    spec, rho0 = two_level
    with pytest.raises(DomainError):
        propagate_closed_form(rho0, spec, params, -1.0)


def test_two_level_coherence_decays(two_level, params):
    spec, rho0 = two_level
    gamma = damping_rate(1.0, params)
    for t in (0.05, 0.5, 2.0):
        rho = propagate_closed_form(rho0, spec, params, t)
        assert abs(rho.entries[0, 1]) == pytest.approx(0.5 * math.exp(-gamma * t), abs=1e-12)


def test_invariants_hold_on_random_systems(rng):
    params = DecoherenceParams(tau1=0.2, tau2=0.5)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 5))
    rho0 = random_density_matrix(rng, 5)
    before = to_energy_basis(rho0, spec).entries
    for t in (0.01, 0.3, 4.0, 40.0):
        rho = propagate_closed_form(rho0, spec, params, t)
        assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-12)
        after = to_energy_basis(rho, spec).entries
        assert_allclose(np.diag(after), np.diag(before), atol=1e-12)
        assert np.all(np.abs(after) <= np.abs(before) + 1e-12)


def test_purity_falls_unless_the_state_is_stationary(rng):
    params = DecoherenceParams(tau1=0.2, tau2=0.5)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 4))
    moving = pure_state(rng.standard_normal(4) + 1j * rng.standard_normal(4))
    times = (0.0, 0.2, 1.0, 3.0, 10.0)
    purities = [propagate_closed_form(moving, spec, params, t).purity() for t in times]
    assert purities[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(purities) < 0)

    eigenstate = pure_state(spec.unitary[:, 1])
    for t in times:
        assert propagate_closed_form(eigenstate, spec, params, t).purity() == pytest.approx(1.0, abs=1e-12)


def test_liouville_limit_is_approached_linearly():
    spec = SpectralHamiltonian.from_eigenvalues([0.0, 1.0, 2.5])
    rho0 = pure_state([1.0, 1.0, 1.0])
    exact = propagate_unitary(rho0, spec, 1.0).entries
    errors = []
    tau = 0.01
    for _ in range(6):
        params = DecoherenceParams(tau1=tau, tau2=tau)
        errors.append(np.max(np.abs(propagate_closed_form(rho0, spec, params, 1.0).entries - exact)))
        tau /= 2.0
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))


# ─── Quadrature Oracle ─────────────────────────────────────────────────────────
def test_quadrature_matches_closed_form(rng):
    params = DecoherenceParams(tau1=0.1, tau2=0.25)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 3))
    rho0 = random_density_matrix(rng, 3)
    oracle = propagate_quadrature(rho0, spec, params, 1.3)
    closed = propagate_closed_form(rho0, spec, params, 1.3)
    assert_allclose(oracle.entries, closed.entries, atol=1e-8)


def test_quadrature_needs_a_full_cronon(two_level, params):
    spec, rho0 = two_level
    with pytest.raises(DomainError, match="t >= tau2"):
        propagate_quadrature(rho0, spec, params, 0.5 * params.tau2)


@pytest.mark.slow
def test_quadrature_sweep(rng):
    for _ in range(200):
        tau2 = 10.0 ** rng.uniform(-1.0, 0.0)
        params = DecoherenceParams(tau1=tau2 * rng.uniform(0.05, 1.0), tau2=tau2)
        spec = diagonalize_hamiltonian(random_hermitian(rng, 3))
        rho0 = random_density_matrix(rng, 3)
        t = tau2 * rng.uniform(1.0, 20.0)
        oracle = propagate_quadrature(rho0, spec, params, t)
        closed = propagate_closed_form(rho0, spec, params, t)
        assert_allclose(oracle.entries, closed.entries, atol=1e-8)


# ─── Cronon Stepper ────────────────────────────────────────────────────────────
@pytest.mark.parametrize("k", [1, 7, 100])
def test_stepper_agrees_at_cronon_multiples(rng, k):
    params = DecoherenceParams(tau1=0.04, tau2=0.1)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 4))
    rho0 = random_density_matrix(rng, 4)
    stepped = propagate_steps(rho0, spec, params, k)
    closed = propagate_closed_form(rho0, spec, params, k * params.tau2)
    assert_allclose(stepped.entries, closed.entries, atol=1e-12)


def test_step_requires_energy_basis(two_level, params):
    spec, rho0 = two_level
    with pytest.raises(ValidationError, match="energy-basis"):
        finite_difference_step(rho0, spec, params)
    stepped = finite_difference_step(to_energy_basis(rho0, spec), spec, params)
    assert stepped.basis == BASIS_ENERGY


def test_one_cronon_difference_obeys_the_difference_equation(rng):
    params = DecoherenceParams(tau1=0.04, tau2=0.1)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 4))
    rho0 = random_density_matrix(rng, 4)
    H = spec.matrix
    for t in (0.1, 0.37, 2.0):
        now = propagate_closed_form(rho0, spec, params, t).entries
        before = propagate_closed_form(rho0, spec, params, t - params.tau2).entries
        residual = (now - before) / params.tau1 + (1j / params.hbar) * (H @ now - now @ H)
        assert np.linalg.norm(residual) <= 1e-10
        stepped = finite_difference_step(to_energy_basis(DensityMatrix(entries=before), spec), spec, params)
        assert_allclose(stepped.entries, to_energy_basis(DensityMatrix(entries=now), spec).entries, atol=1e-12)


def test_step_count_must_be_an_integer(two_level, params):
    spec, rho0 = two_level
    with pytest.raises(DomainError):
        propagate_steps(rho0, spec, params, 2.5)


# ─── Generators ────────────────────────────────────────────────────────────────
def test_generator_is_the_time_derivative(rng):
    params = DecoherenceParams(tau1=0.2, tau2=0.3)
    spec = diagonalize_hamiltonian(random_hermitian(rng, 3))
    rho0 = random_density_matrix(rng, 3)
    t, h = 0.8, 1e-5
    ahead = propagate_closed_form(rho0, spec, params, t + h).entries
    behind = propagate_closed_form(rho0, spec, params, t - h).entries
    now = propagate_closed_form(rho0, spec, params, t)
    assert_allclose(generator_apply(now, spec, params), (ahead - behind) / (2.0 * h), atol=1e-7)


def _master_equation_coherence(tau, omega, t, steps):
    params = DecoherenceParams(tau1=tau, tau2=tau)
    spec = SpectralHamiltonian.from_eigenvalues([0.0, omega])
    rho0 = to_energy_basis(pure_state([1.0, 1.0]), spec)

    def rhs(y):
        return phase_destroying_rhs(DensityMatrix(entries=y, basis=BASIS_ENERGY), spec, params)

    integrated = rk4(rhs, rho0.entries, t, steps)
    closed = propagate_closed_form(rho0, spec, params, t).entries
    return abs(integrated[0, 1] - closed[0, 1]) / abs(closed[0, 1])


def test_master_equation_agrees_for_small_product():
    assert _master_equation_coherence(tau=0.01, omega=1.0, t=10.0, steps=1000) < 0.01


def test_master_equation_fails_for_large_product():
    assert _master_equation_coherence(tau=1.0, omega=2.0, t=1.0, steps=200) > 0.2


def test_liouvillian_acts_as_commutator(rng):
    spec = SpectralHamiltonian.from_eigenvalues([0.0, 0.7, 1.9], hbar=0.5)
    rho = random_density_matrix(rng, 3).entries
    H = np.diag(spec.eigenvalues)
    vec = liouvillian(spec).matrix @ vectorize(rho)
    assert_allclose(unvectorize(vec), (H @ rho - rho @ H) / spec.hbar, atol=1e-12)


# ─── Milburn ───────────────────────────────────────────────────────────────────
def test_milburn_leaves_frozen_frequencies_untouched():
    tau = 0.3
    assert abs(milburn_factor(2.0 * math.pi / tau, tau, 50.0)) == pytest.approx(1.0, abs=1e-12)
    spec = SpectralHamiltonian.from_eigenvalues([0.0, 4.0 * math.pi / tau])
    rho0 = pure_state([1.0, 1.0])
    rho = milburn_propagate(rho0, spec, tau, 50.0)
    assert abs(rho.entries[0, 1]) == pytest.approx(0.5, abs=1e-12)


def test_milburn_approaches_unitary_for_short_kicks(two_level):
    spec, rho0 = two_level
    exact = propagate_unitary(rho0, spec, 1.0).entries
    kicked = milburn_propagate(rho0, spec, 1e-6, 1.0).entries
    assert_allclose(kicked, exact, atol=1e-5)


def test_milburn_rejects_bad_arguments(two_level):
    spec, rho0 = two_level
    with pytest.raises(DomainError):
        milburn_propagate(rho0, spec, 0.0, 1.0)
    with pytest.raises(DomainError):
        milburn_propagate(rho0, spec, 0.1, -1.0)


# ─── Map Semigroups ────────────────────────────────────────────────────────────
def _unitary_map(energies, tau1):
    return Superoperator.from_unitary(expm(-1j * np.diag(energies) * tau1))


def test_gamma_semigroup_of_unitary_map_is_the_closed_form(rng):
    energies = [0.0, 1.0, 2.5]
    params = DecoherenceParams(tau1=0.5, tau2=1.0)
    spec = SpectralHamiltonian.from_eigenvalues(energies)
    rho0 = random_density_matrix(rng, 3)
    out = map_semigroup_propagate(_unitary_map(energies, params.tau1), rho0, params, 3.3)
    assert_allclose(out.entries, propagate_closed_form(rho0, spec, params, 3.3).entries, atol=1e-10)


def test_regular_semigroup_of_unitary_map_is_rescaled_liouville(rng):
    energies = [0.0, 1.0, 2.5]
    params = DecoherenceParams(tau1=0.5, tau2=1.0)
    spec = SpectralHamiltonian.from_eigenvalues(energies)
    rho0 = random_density_matrix(rng, 3)
    out = map_semigroup_propagate(_unitary_map(energies, params.tau1), rho0, params, 3.3, mode="regular")
    expected = propagate_unitary(rho0, spec, 3.3 * params.ratio).entries
    assert_allclose(out.entries, expected, atol=1e-10)


def test_semigroup_rejects_branch_cut():
    params = DecoherenceParams(tau1=0.5, tau2=1.0)
    with pytest.raises(DomainError, match="branch cut"):
        map_semigroup_propagate(Superoperator(matrix=-np.eye(4)), pure_state([1.0, 0.0]), params, 1.0)


def test_semigroup_rejects_unknown_mode(two_level, params):
    _, rho0 = two_level
    with pytest.raises(ValidationError, match="mode"):
        map_semigroup_propagate(Superoperator.identity(2), rho0, params, 1.0, mode="poisson")
