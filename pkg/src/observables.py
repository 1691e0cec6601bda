# observables.py
"""
Averaged expectation values and signals, position densities through the
defining time integral, and the finite-difference time-energy inequality.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from core import (
    BASIS_INPUT,
    DecoherenceParams,
    DensityMatrix,
    DomainError,
    NumericError,
    SpectralHamiltonian,
    ValidationError,
    diagonalize_hamiltonian,
    random_density_matrix,
    random_hermitian,
)
from evolution import damping_rate, frequency_shift, propagate_closed_form
from waiting_time import TAIL_EPS, gamma_average, gamma_average_vec

logger = logging.getLogger(__name__)

IMAGINARY_TOL = 1e-12
TM_TOL = 1e-10
# relative spread below which σ cannot be told apart from rounding
SIGMA_FLOOR = 64.0 * math.sqrt(np.finfo(float).eps)


def _entries(rho):
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _hamiltonian_in(rho, spec: SpectralHamiltonian):
    if rho.basis == BASIS_INPUT:
        return spec.matrix
    return np.diag(spec.eigenvalues).astype(complex)


def commutator(A, B):
    return A @ B - B @ A


# ─── Expectation Values ────────────────────────────────────────────────────────
def trace_product(rho, A) -> complex:
    """Tr(ρA) for any operator A, e.g. the annihilation operator."""
    M = _entries(rho)
    A = np.asarray(A, dtype=complex)
    if A.shape != M.shape:
        raise ValidationError(f"operator of shape {A.shape} does not match state of shape {M.shape}")
    return complex(np.sum(M * A.T))


def expectation(rho, A) -> float:
    """Tr(ρA) of a Hermitian A; the imaginary residual is checked, never silently dropped."""
    A = np.asarray(A, dtype=complex)
    value = trace_product(rho, A)
    scale = max(1.0, float(np.max(np.abs(A))))
    if abs(value.imag) > IMAGINARY_TOL * scale:
        raise NumericError(
            f"Tr(rho A) has imaginary part {value.imag:.3e}; state or observable is corrupted",
            residual=abs(value.imag),
        )
    return value.real


def variance(rho, A) -> float:
    """σ²(A) = Tr(ρ (A - ⟨A⟩)²), centred before squaring."""
    A = np.asarray(A, dtype=complex)
    shifted = A - expectation(rho, A) * np.eye(A.shape[0])
    return max(expectation(rho, shifted @ shifted), 0.0)


def _sigma_floor(A) -> float:
    return SIGMA_FLOOR * max(1.0, float(np.max(np.abs(A))))


def averaged_expectation(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                         A, t: float) -> float:
    return expectation(propagate_closed_form(rho0, spec, params, t), A)


def averaged_phase_factor(omega: float, params: DecoherenceParams, t: float) -> complex:
    """⟨e^{iωt'}⟩ = (1 - iω tau1)^(-t/tau2) = e^{-γt} e^{iνt}."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    return complex(np.exp(-damping_rate(omega, params) * t + 1j * frequency_shift(omega, params) * t))


def averaged_signal(f: Callable[[float], float], t: float, params: DecoherenceParams,
                    tol: float = 1e-10, bound: Optional[float] = None) -> float:
    """
    ∫ P(t, t') f(t') dt'. ``bound`` is an upper bound on |f|; it tightens the
    truncation so the discarded tails stay below ``tol``.
    """
    if t < params.tau2:
        raise DomainError(f"averaged_signal needs t >= tau2={params.tau2!r}, got t={t!r}")
    eps = TAIL_EPS if bound is None else min(TAIL_EPS, tol / max(abs(bound), 1.0))
    return gamma_average(f, t, params, tol=tol, eps=eps)


def averaged_position_density(psi_t: Callable[[float, float], complex], x: float, t: float,
                              params: DecoherenceParams, tol: float = 1e-10) -> float:
    """P(x, t) = ∫ P(t, t') |ψ(x, t')|² dt'."""
    if t < params.tau2:
        raise DomainError(f"averaged_position_density needs t >= tau2={params.tau2!r}, got t={t!r}")
    value = gamma_average(lambda s: abs(psi_t(x, s)) ** 2, t, params, tol=tol)
    return max(value, 0.0)


def averaged_position_profile(psi_t: Callable[[np.ndarray, float], np.ndarray], grid, t: float,
                              params: DecoherenceParams, tol: float = 1e-9) -> np.ndarray:
    """averaged_position_density on a whole grid at once."""
    if t < params.tau2:
        raise DomainError(f"averaged_position_profile needs t >= tau2={params.tau2!r}, got t={t!r}")
    grid = np.asarray(grid, dtype=float)
    values = gamma_average_vec(lambda s: np.abs(psi_t(grid, s)) ** 2, t, params, tol=tol)
    return np.maximum(values, 0.0)


# ─── Finite-Difference Drift ───────────────────────────────────────────────────
def finite_difference_drift(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                            A, t: float):
    """
    (Ā(t) - Ā(t - tau2)) / tau1 and -(i/ħ) Tr(ρ̄(t)[A, H]); the two agree
    exactly on the cronon grid and its interpolation.
    """
    if t < params.tau2:
        raise DomainError(f"drift needs t >= tau2={params.tau2!r}, got t={t!r}")
    A = np.asarray(A, dtype=complex)
    now = propagate_closed_form(rho0, spec, params, t)
    before = propagate_closed_form(rho0, spec, params, t - params.tau2)
    lhs = (expectation(now, A) - expectation(before, A)) / params.tau1
    H = _hamiltonian_in(rho0, spec)
    rhs = (-1j / params.hbar) * trace_product(now, commutator(A, H))
    return lhs, rhs.real


# ─── Time-Energy Inequality ────────────────────────────────────────────────────
@dataclass(frozen=True)
class TmReport:
    """
    |ΔĀ| / σ(A) <= tau1 / tau_E with tau_E = ħ / (2σ(H)), all moments taken on ρ̄(t).
    ``tau_e_infinite`` flags σ(H) = 0; ``degenerate`` flags σ(A) = 0.
    """

    t: float
    delta_A_bar: float
    sigma_A: float
    sigma_H: float
    tau_E: float
    lhs: float
    rhs: float
    satisfied: bool
    slack: float
    tau_e_infinite: bool = False
    degenerate: bool = False

    def as_row(self):
        return {
            "t": self.t,
            "delta_A_bar": self.delta_A_bar,
            "sigma_A": self.sigma_A,
            "sigma_H": self.sigma_H,
            "tau_E": self.tau_E,
            "tau_E_infinite": int(self.tau_e_infinite),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": int(self.satisfied),
            "slack": self.slack,
            "degenerate": int(self.degenerate),
        }


def tm_check(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
             A, t: float) -> TmReport:
    """
    Evaluate the one-cronon time-energy inequality. It is a theorem, so a
    violation beyond TM_TOL is raised as a NumericError.
    """
    if t < params.tau2:
        raise DomainError(f"tm_check needs t >= tau2={params.tau2!r}, got t={t!r}")
    A = np.asarray(A, dtype=complex)
    H = _hamiltonian_in(rho0, spec)
    now = propagate_closed_form(rho0, spec, params, t)
    before = propagate_closed_form(rho0, spec, params, t - params.tau2)
    delta = expectation(now, A) - expectation(before, A)
    sigma_a = math.sqrt(variance(now, A))
    sigma_h = math.sqrt(variance(now, H))
    a_scale = max(1.0, float(np.max(np.abs(A))))
    a_floor, h_floor = _sigma_floor(A), _sigma_floor(H)

    tau_e_infinite = sigma_h <= h_floor
    tau_e = math.inf if tau_e_infinite else params.hbar / (2.0 * sigma_h)
    rhs = 0.0 if tau_e_infinite else params.tau1 / tau_e

    degenerate = sigma_a <= a_floor
    flagged = degenerate or tau_e_infinite
    if flagged:
        # a spread under its floor may still be nonzero, so bound the drift by the floors
        allowed = 2.0 * params.tau1 / params.hbar * max(sigma_a, a_floor) * max(sigma_h, h_floor)
        if abs(delta) > allowed + TM_TOL * a_scale:
            raise NumericError(
                f"observable changed by {delta:.3e} over one cronon although "
                f"{'sigma(A)' if degenerate else 'sigma(H)'} vanishes",
                residual=abs(delta),
            )
    lhs = 0.0 if degenerate else abs(delta) / sigma_a
    satisfied = flagged or abs(delta) <= sigma_a * rhs + TM_TOL * a_scale
    report = TmReport(
        t=t, delta_A_bar=delta, sigma_A=sigma_a, sigma_H=sigma_h, tau_E=tau_e, lhs=lhs, rhs=rhs,
        satisfied=satisfied, slack=rhs - lhs, tau_e_infinite=tau_e_infinite, degenerate=degenerate,
    )
    if not satisfied:
        raise NumericError(f"time-energy inequality violated: lhs={lhs!r} > rhs={rhs!r}", residual=lhs - rhs)
    logger.debug("[TM] t=%g lhs=%.6g rhs=%.6g", t, lhs, rhs)
    return report


def max_quasi_continuous_tau1(rho: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams) -> float:
    """Largest tau1 for which evolution still looks continuous: ħ / (2σ(H))."""
    H = _hamiltonian_in(rho, spec)
    sigma_h = math.sqrt(variance(rho, H))
    if sigma_h <= _sigma_floor(H):
        raise DomainError("sigma(H) vanishes on this state; there is no finite bound on tau1")
    return params.hbar / (2.0 * sigma_h)


def tm_sweep(rng: np.random.Generator, trials: int, dim: int, params: Optional[DecoherenceParams] = None):
    """Randomized (H, ρ, A, t) checks; every report must come back satisfied."""
    reports = []
    for _ in range(int(trials)):
        trial_params = params
        if trial_params is None:
            tau2 = float(10 ** rng.uniform(-3, 0))
            trial_params = DecoherenceParams(tau1=tau2 * float(rng.uniform(0.05, 1.0)), tau2=tau2)
        spec = diagonalize_hamiltonian(random_hermitian(rng, dim), hbar=trial_params.hbar)
        rho = random_density_matrix(rng, dim, rank=int(rng.integers(1, dim + 1)))
        A = random_hermitian(rng, dim)
        t = trial_params.tau2 * float(rng.uniform(1.0, 20.0))
        reports.append(tm_check(rho, spec, trial_params, A, t))
    return reports
