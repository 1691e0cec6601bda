# evolution.py
"""
Propagators of the averaged density matrix.

Every propagator works elementwise in the energy basis: coherence (n, m) with Bohr
frequency ω is multiplied by a scalar factor and populations never change. The
closed form is (1 + iωtau1)^(-t/tau2); the other routines are the one-cronon
stepper, the logarithmic generator, the second-order phase-destroying master
equation, Milburn's Poisson propagator, the defining-integral quadrature oracle
and the semigroup built from an arbitrary map M.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from core import (
    BASIS_ENERGY,
    BASIS_INPUT,
    DecoherenceParams,
    DensityMatrix,
    DomainError,
    FrequencyMatrix,
    NumericError,
    SpectralHamiltonian,
    Superoperator,
    ValidationError,
    bohr_frequencies,
    from_energy_basis,
    to_energy_basis,
    unvectorize,
    validate_density_matrix,
    vectorize,
)
from waiting_time import gamma_phase_average

logger = logging.getLogger(__name__)

EIGVEC_CONDITION_LIMIT = 1e8
BRANCH_CUT_TOL = 1e-12


# ─── Rates ─────────────────────────────────────────────────────────────────────
def damping_rate(omega, params: DecoherenceParams):
    """γ = ln(1 + ω²tau1²) / (2 tau2)."""
    x = np.asarray(omega, dtype=float) * params.tau1
    out = np.log1p(x * x) / (2.0 * params.tau2)
    return float(out) if out.ndim == 0 else out


def frequency_shift(omega, params: DecoherenceParams):
    """ν = arctan(ω tau1) / tau2."""
    out = np.arctan(np.asarray(omega, dtype=float) * params.tau1) / params.tau2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class PropagatorFactor:
    """Elementwise factors f_nm(t) = e^{-γ_nm t} e^{-iν_nm t} and the rates behind them."""

    t: float
    factors: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray


def propagator_factor(freqs: FrequencyMatrix, params: DecoherenceParams, t: float) -> PropagatorFactor:
    if t < 0:
        raise DomainError(f"propagation time must be non-negative, got {t!r}")
    gamma = damping_rate(freqs.omegas, params)
    nu = frequency_shift(freqs.omegas, params)
    factors = np.exp(-t * gamma - 1j * t * nu)
    return PropagatorFactor(t=float(t), factors=factors, gamma=gamma, nu=nu)


# ─── Basis Plumbing ────────────────────────────────────────────────────────────
def _check_dims(rho: DensityMatrix, spec: SpectralHamiltonian):
    if rho.dim != spec.dim:
        raise ValidationError(f"state dimension {rho.dim} does not match Hamiltonian dimension {spec.dim}")


def _energy_entries(rho: DensityMatrix, spec: SpectralHamiltonian):
    _check_dims(rho, spec)
    if rho.basis == BASIS_ENERGY:
        return rho.entries
    return to_energy_basis(rho.entries, spec)


def _restore(entries, rho: DensityMatrix, spec: SpectralHamiltonian, validate=True):
    if rho.basis == BASIS_INPUT:
        entries = from_energy_basis(entries, spec)
    if not validate:
        return entries
    return validate_density_matrix(entries, basis=rho.basis)


def _elementwise(rho0: DensityMatrix, spec: SpectralHamiltonian, factors) -> DensityMatrix:
    return _restore(_energy_entries(rho0, spec) * factors, rho0, spec)


# ─── Propagators ───────────────────────────────────────────────────────────────
def propagate_closed_form(rho0: DensityMatrix, spec: SpectralHamiltonian,
                          params: DecoherenceParams, t: float) -> DensityMatrix:
    """ρ̄_nm(t) = (1 + iω_nm tau1)^(-t/tau2) ρ_nm(0), defined for every real t >= 0."""
    if t < 0:
        raise DomainError(f"propagation time must be non-negative, got {t!r}")
    _check_dims(rho0, spec)
    if t == 0:
        return rho0
    factor = propagator_factor(bohr_frequencies(spec, params), params, t)
    return _elementwise(rho0, spec, factor.factors)


def propagate_unitary(rho0: DensityMatrix, spec: SpectralHamiltonian, t: float) -> DensityMatrix:
    """Ordinary Liouville evolution e^{-iHt/ħ} ρ e^{iHt/ħ} using the spectrum's own ħ."""
    _check_dims(rho0, spec)
    omegas = bohr_frequencies(spec, DecoherenceParams(1.0, 1.0, spec.hbar)).omegas
    return _elementwise(rho0, spec, np.exp(-1j * omegas * t))


def propagate_quadrature(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                         t: float, tol: float = 1e-10) -> DensityMatrix:
    """
    Oracle: every element is ∫ P(t, t') e^{-iω_nm t'} dt' ρ_nm(0) computed by
    adaptive quadrature. Restricted to t >= tau2, where the density is bounded.
    """
    if t < params.tau2:
        raise DomainError(f"quadrature oracle needs t >= tau2={params.tau2!r}, got t={t!r}")
    freqs = bohr_frequencies(spec, params)
    n = freqs.dim
    cache = {}

    def averaged(omega):
        if omega not in cache:
            cache[omega] = gamma_phase_average(omega, t, params, tol)
        return cache[omega]

    factors = np.empty((n, n), dtype=complex)
    for i in range(n):
        factors[i, i] = averaged(0.0).real
    for i, j, omega in freqs.unique_pairs():
        factors[i, j] = averaged(omega)
        factors[j, i] = np.conj(factors[i, j])
    logger.debug("[QUADRATURE] %d distinct frequencies averaged at t=%g", len(cache), t)
    return _elementwise(rho0, spec, factors)


def finite_difference_step(rho_bar: DensityMatrix, spec: SpectralHamiltonian,
                           params: DecoherenceParams) -> DensityMatrix:
    """One cronon: ρ̄_nm(t) = ρ̄_nm(t - tau2) / (1 + iω_nm tau1). Energy-basis input only."""
    if rho_bar.basis != BASIS_ENERGY:
        raise ValidationError("finite_difference_step expects an energy-basis DensityMatrix")
    _check_dims(rho_bar, spec)
    omegas = bohr_frequencies(spec, params).omegas
    return validate_density_matrix(rho_bar.entries / (1.0 + 1j * omegas * params.tau1), basis=BASIS_ENERGY)


def propagate_steps(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                    k: int) -> DensityMatrix:
    """k cronon steps from rho0, returned in rho0's basis."""
    if int(k) != k or k < 0:
        raise DomainError(f"step count must be a non-negative integer, got {k!r}")
    state = DensityMatrix(entries=_energy_entries(rho0, spec), basis=BASIS_ENERGY)
    for _ in range(int(k)):
        state = finite_difference_step(state, spec, params)
    return _restore(state.entries, rho0, spec)


# ─── Generators ────────────────────────────────────────────────────────────────
def generator_apply(rho: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams) -> np.ndarray:
    """dρ̄/dt = -(γ_nm + iν_nm) ρ_nm, returned in rho's basis."""
    omegas = bohr_frequencies(spec, params).omegas
    rates = damping_rate(omegas, params) + 1j * frequency_shift(omegas, params)
    return _restore(-rates * _energy_entries(rho, spec), rho, spec, validate=False)


def phase_destroying_rhs(rho: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams) -> np.ndarray:
    """Second-order master equation -iLρ - (tau1²/2tau2) L²ρ, elementwise."""
    omegas = bohr_frequencies(spec, params).omegas
    coefficient = 1j * omegas + omegas ** 2 * params.tau1 ** 2 / (2.0 * params.tau2)
    return _restore(-coefficient * _energy_entries(rho, spec), rho, spec, validate=False)


def liouvillian(spec: SpectralHamiltonian) -> Superoperator:
    """(1/ħ)[H, ·] in the energy basis, column-stacked."""
    n = spec.dim
    H = np.diag(spec.eigenvalues).astype(complex)
    identity = np.eye(n)
    return Superoperator(matrix=(np.kron(identity, H) - np.kron(H.T, identity)) / spec.hbar)


# ─── Milburn Propagator ────────────────────────────────────────────────────────
def _milburn_exponent(omega_tau):
    # e^{-ix} - 1 with x reduced mod 2π so the frozen frequencies give exactly 0
    r = np.remainder(np.asarray(omega_tau, dtype=float), 2.0 * math.pi)
    return -2.0 * np.sin(0.5 * r) ** 2 - 1j * np.sin(r)


def milburn_propagate(rho0: DensityMatrix, spec: SpectralHamiltonian, tau: float, t: float,
                      hbar: float = None) -> DensityMatrix:
    """Elementwise exp[(t/tau)(e^{-iωtau} - 1)]: Poisson-distributed unitary kicks of length tau."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    if t < 0:
        raise DomainError(f"propagation time must be non-negative, got {t!r}")
    hbar = spec.hbar if hbar is None else hbar
    omegas = bohr_frequencies(spec, DecoherenceParams(tau, tau, hbar)).omegas
    return _elementwise(rho0, spec, np.exp((t / tau) * _milburn_exponent(omegas * tau)))


def milburn_factor(omega: float, tau: float, t: float) -> complex:
    return complex(np.exp((t / tau) * _milburn_exponent(omega * tau)))


# ─── Map Semigroups ────────────────────────────────────────────────────────────
MODE_GAMMA = "gamma"
MODE_REGULAR = "regular"


def _check_branch(values, label):
    for value in values:
        scale = max(abs(value), 1.0)
        if abs(value) <= BRANCH_CUT_TOL * scale:
            raise DomainError(f"{label} has an eigenvalue at 0 ({value!r}); no logarithm exists")
        if abs(value.imag) <= BRANCH_CUT_TOL * scale and value.real < 0:
            raise DomainError(f"{label} has eigenvalue {value!r} on the negative real axis (branch cut)")


def map_semigroup_propagate(M: Superoperator, rho0: DensityMatrix, params: DecoherenceParams,
                            t: float, mode: str = MODE_GAMMA) -> DensityMatrix:
    """
    Semigroup generated by an arbitrary map M acting on rho0's vectorized entries.

    ``regular`` mode: exp[(t/tau2) ln M], one application of M per cronon.
    ``gamma`` mode:  (I - ln M)^(-t/tau2), the Γ-averaged form.
    """
    if mode not in (MODE_GAMMA, MODE_REGULAR):
        raise ValidationError(f"mode must be {MODE_GAMMA!r} or {MODE_REGULAR!r}, got {mode!r}")
    if M.dim != rho0.dim:
        raise ValidationError(f"superoperator dimension {M.dim} does not match state dimension {rho0.dim}")
    if t < 0:
        raise DomainError(f"propagation time must be non-negative, got {t!r}")

    try:
        eigenvalues, vectors = np.linalg.eig(M.matrix)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"eigendecomposition of M failed: {e}") from e
    condition = float(np.linalg.cond(vectors))
    if not np.isfinite(condition) or condition > EIGVEC_CONDITION_LIMIT:
        raise NumericError(
            f"M is not safely diagonalizable: eigenvector condition number {condition:.3e}",
            residual=condition,
        )

    _check_branch(eigenvalues, "M")
    log_m = np.log(eigenvalues)
    k = t / params.tau2
    if mode == MODE_REGULAR:
        spectrum = np.exp(k * log_m)
    else:
        base = 1.0 - log_m
        _check_branch(base, "I - ln M")
        spectrum = np.exp(-k * np.log(base))

    coefficients = np.linalg.solve(vectors, vectorize(rho0))
    out = unvectorize(vectors @ (spectrum * coefficients))
    logger.debug("[SEMIGROUP] %s mode, t=%g, cond(V)=%.2e", mode, t, condition)
    return validate_density_matrix(out, basis=rho0.basis)
