# models.py
"""
Concrete physical scenarios built on the generic propagators: a driven
oscillator in a coherent state, a free Gaussian packet, a two-packet
Schrödinger cat, a spin crossing a magnetic field, Rabi oscillation of an atom
in a cavity and an EPR singlet whose first particle crosses a field.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from core import (
    DecoherenceParams,
    DensityMatrix,
    DomainError,
    NumericError,
    SpectralHamiltonian,
    ValidationError,
    diagonalize_hamiltonian,
    pure_state,
)
from evolution import damping_rate, frequency_shift, propagate_closed_form
from observables import expectation

logger = logging.getLogger(__name__)

TRUNCATION_TAIL = 1e-10
UNDERFLOW_LOG = math.log(1e-300)

KIND_SPIN = "spin-larmor"
KIND_RABI = "rabi-fock"
KIND_EPR = "epr-singlet"
TWO_LEVEL_KINDS = (KIND_SPIN, KIND_RABI, KIND_EPR)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# ─── Oscillator ────────────────────────────────────────────────────────────────
def default_truncation(alpha0: complex) -> int:
    a = abs(alpha0)
    return int(math.ceil(a * a + 10.0 * a + 20.0))


def truncation_tail(alpha0: complex, dim: int) -> float:
    """Poisson weight of the Fock levels >= dim, i.e. P(n >= dim) for mean |α|²."""
    nbar = abs(alpha0) ** 2
    if nbar == 0.0:
        return 0.0
    return float(special.gammainc(dim, nbar))


@dataclass(frozen=True)
class OscillatorScenario:
    alpha0: complex
    omega: float
    dim: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha0", complex(self.alpha0))
        if not np.isfinite(self.omega):
            raise ValidationError(f"omega must be finite, got {self.omega!r}")
        if self.dim is None:
            object.__setattr__(self, "dim", default_truncation(self.alpha0))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError(f"dim must be a positive integer, got {self.dim!r}")
        tail = truncation_tail(self.alpha0, self.dim)
        if tail > TRUNCATION_TAIL:
            raise DomainError(
                f"truncation at N={self.dim} drops Fock weight {tail:.3e} > {TRUNCATION_TAIL:g}; "
                f"use N >= {default_truncation(self.alpha0)}",
                residual=tail,
            )

    @property
    def mean_photons(self):
        return abs(self.alpha0) ** 2


def annihilation_operator(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def _coherent_log_weights(alpha0: complex, dim: int):
    n = np.arange(dim, dtype=float)
    log_modulus = -0.5 * abs(alpha0) ** 2 + special.xlogy(n, abs(alpha0)) - 0.5 * special.gammaln(n + 1.0)
    return n, log_modulus


def coherent_state(sc: OscillatorScenario) -> DensityMatrix:
    """|α₀⟩⟨α₀| on the truncated Fock ladder, renormalized."""
    n, log_modulus = _coherent_log_weights(sc.alpha0, sc.dim)
    amplitudes = np.exp(log_modulus) * np.exp(1j * n * np.angle(sc.alpha0))
    return pure_state(amplitudes)


def oscillator_hamiltonian(sc: OscillatorScenario, hbar: float = 1.0) -> SpectralHamiltonian:
    return SpectralHamiltonian.from_eigenvalues(hbar * sc.omega * (np.arange(sc.dim) + 0.5), hbar=hbar)


def coherent_amplitude(sc: OscillatorScenario, params: DecoherenceParams, t: float) -> complex:
    """⟨a(t)⟩ = α₀ (1 + iω tau1)^(-t/tau2); the photon number stays constant."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    return complex(sc.alpha0 * np.exp(-damping_rate(sc.omega, params) * t
                                      - 1j * frequency_shift(sc.omega, params) * t))


class FrozenComparison(NamedTuple):
    ours: float
    milburn: float


def milburn_frozen_compare(omega: float, params: DecoherenceParams, t: float) -> FrozenComparison:
    """
    Decay exponents of a single coherence: ours is γt, Milburn's is
    (t/tau2)(1 - cos ωtau2), which vanishes at the frozen frequencies ωtau2 = 2nπ.
    """
    if omega == 0:
        raise DomainError("the frozen-frequency comparison needs omega != 0")
    r = math.remainder(omega * params.tau2, 2.0 * math.pi)
    milburn = (t / params.tau2) * 2.0 * math.sin(0.5 * r) ** 2
    return FrozenComparison(ours=damping_rate(omega, params) * t, milburn=milburn)


def fock_matrix_decoherence(sc: OscillatorScenario, params: DecoherenceParams, t: float,
                            n: int, m: int) -> complex:
    """ρ̄_nm(t) of the coherent state, evaluated in log space and clamped to 0 below 1e-300."""
    for name, index in (("n", n), ("m", m)):
        if int(index) != index or not 0 <= index < sc.dim:
            raise ValidationError(f"index {name}={index!r} outside [0, {sc.dim})")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    omega = (n - m) * sc.omega
    a = abs(sc.alpha0)
    log_modulus = (-a * a + special.xlogy(n + m, a)
                   - 0.5 * (special.gammaln(n + 1.0) + special.gammaln(m + 1.0))
                   - damping_rate(omega, params) * t)
    if log_modulus < UNDERFLOW_LOG:
        return 0j
    phase = (n - m) * np.angle(sc.alpha0) - frequency_shift(omega, params) * t
    return complex(np.exp(log_modulus + 1j * phase))


# ─── Free Particle ─────────────────────────────────────────────────────────────
def free_particle_spread(sigma_x: float, sigma_v: float, params: DecoherenceParams, t: float) -> float:
    """σ_t² = σ_x² + σ_v²(t̄² + t̄ tau1) with the reduced time t̄ = t tau1/tau2."""
    if not (sigma_x > 0 and sigma_v > 0):
        raise ValidationError(f"widths must be positive, got sigma_x={sigma_x!r}, sigma_v={sigma_v!r}")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    reduced = t * params.ratio
    return sigma_x ** 2 + sigma_v ** 2 * (reduced ** 2 + reduced * params.tau1)


@dataclass(frozen=True)
class GaussianPacket:
    """Free Gaussian packet of initial width sigma_x and velocity spread sigma_v."""

    sigma_x: float
    sigma_v: float
    x0: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_v > 0):
            raise ValidationError(f"widths must be positive, got {self.sigma_x!r}, {self.sigma_v!r}")

    def psi(self, x, t_prime):
        # plane-wave factor of the drift omitted; |ψ|² is unaffected
        y = np.asarray(x, dtype=float) - self.x0 - self.v * t_prime
        spread = 1.0 + 1j * self.sigma_v * t_prime / self.sigma_x
        norm = (2.0 * math.pi * self.sigma_x ** 2) ** -0.25
        return norm * spread ** -0.5 * np.exp(-y * y / (4.0 * self.sigma_x ** 2 * spread))

    def density(self, x, t_prime):
        width2 = self.sigma_x ** 2 + (self.sigma_v * t_prime) ** 2
        y = np.asarray(x, dtype=float) - self.x0 - self.v * t_prime
        return np.exp(-y * y / (2.0 * width2)) / math.sqrt(2.0 * math.pi * width2)


def position_variance(density, grid) -> float:
    """Variance of a density sampled on a grid (Simpson rule)."""
    density = np.asarray(density, dtype=float)
    grid = np.asarray(grid, dtype=float)
    norm = integrate.simpson(density, x=grid)
    if not norm > 0:
        raise NumericError("density integrates to zero on the grid")
    mean = integrate.simpson(grid * density, x=grid) / norm
    return float(integrate.simpson((grid - mean) ** 2 * density, x=grid) / norm)


# ─── Schrödinger Cat ───────────────────────────────────────────────────────────
@dataclass(frozen=True)
class CatScenario:
    """
    Two static minimum-width packets at ±D/2. ``omega_of_x`` gives the local
    interference frequency; the default is m σ_v² D x / (ħ σ_x²).
    """

    sigma_x: float
    D: float
    m: float
    hbar: float = 1.0
    sigma_v: Optional[float] = None
    minimum_uncertainty: bool = True
    omega_of_x: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("sigma_x", "D", "m", "hbar"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive, got {value!r}")
        if self.minimum_uncertainty:
            bound = self.hbar / (2.0 * self.m * self.sigma_x)
            if self.sigma_v is not None and not math.isclose(self.sigma_v, bound, rel_tol=1e-12):
                raise ValidationError(
                    f"sigma_v={self.sigma_v!r} contradicts the minimum-uncertainty value {bound!r}"
                )
            object.__setattr__(self, "sigma_v", bound)
        elif self.sigma_v is None or not self.sigma_v > 0:
            raise ValidationError("sigma_v must be given and positive without minimum uncertainty")

    def omega(self, x):
        if self.omega_of_x is not None:
            return self.omega_of_x(x)
        return self.m * self.sigma_v ** 2 * self.D * np.asarray(x, dtype=float) / (self.hbar * self.sigma_x ** 2)

    def envelopes(self, x):
        x = np.asarray(x, dtype=float)
        norm = (2.0 * math.pi * self.sigma_x ** 2) ** -0.25
        psi1 = norm * np.exp(-(x - 0.5 * self.D) ** 2 / (4.0 * self.sigma_x ** 2))
        psi2 = norm * np.exp(-(x + 0.5 * self.D) ** 2 / (4.0 * self.sigma_x ** 2))
        return psi1, psi2


def cat_density(sc: CatScenario, params: DecoherenceParams, x, t: float):
    """½(ψ₁² + ψ₂²) + ψ₁ψ₂ e^{-γ(x)t} cos ν(x)t with static envelopes."""
    if t < params.tau2:
        raise DomainError(f"cat_density needs t >= tau2={params.tau2!r}, got t={t!r}")
    psi1, psi2 = sc.envelopes(x)
    omega = sc.omega(x)
    interference = np.exp(-damping_rate(omega, params) * t) * np.cos(frequency_shift(omega, params) * t)
    out = 0.5 * (psi1 ** 2 + psi2 ** 2) + psi1 * psi2 * interference
    return float(out) if np.ndim(out) == 0 else out


def cat_interference_rate(sc: CatScenario, params: DecoherenceParams, x):
    return damping_rate(sc.omega(x), params)


def undamped_half_width(sc: CatScenario, params: DecoherenceParams, t: float, level: float = 0.5) -> float:
    """Distance x > 0 at which the interference envelope e^{-γ(x)t} has fallen to ``level``."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level!r}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    target = -math.log(level) / t

    def excess(x):
        return float(cat_interference_rate(sc, params, x)) - target

    hi = sc.sigma_x
    for _ in range(400):
        if excess(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NumericError("interference never decays to the requested level")
    return float(optimize.brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=1e-12))


# ─── Two-Level Systems ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class TwoLevelScenario:
    kind: str
    splitting: Optional[float] = None
    g: Optional[float] = None
    n_photons: Optional[int] = None
    L: Optional[float] = None
    v: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TWO_LEVEL_KINDS:
            raise ValidationError(f"kind must be one of {TWO_LEVEL_KINDS}, got {self.kind!r}")
        if self.kind == KIND_RABI:
            if self.g is None or not self.g > 0:
                raise ValidationError(f"rabi scenario needs g > 0, got {self.g!r}")
            if self.n_photons is None or int(self.n_photons) != self.n_photons or self.n_photons < 0:
                raise ValidationError(f"n_photons must be a non-negative integer, got {self.n_photons!r}")
            rabi = self.g * math.sqrt(self.n_photons + 1)
            if self.splitting is not None and not math.isclose(self.splitting, rabi, rel_tol=1e-12):
                raise ValidationError(f"splitting {self.splitting!r} contradicts g*sqrt(n+1) = {rabi!r}")
            object.__setattr__(self, "splitting", rabi)
        if self.splitting is None or not np.isfinite(self.splitting):
            raise ValidationError(f"splitting must be a finite number, got {self.splitting!r}")
        if (self.L is None) != (self.v is None):
            raise ValidationError("transit geometry needs both L and v")
        if self.L is not None and not (self.L > 0 and self.v > 0):
            raise ValidationError(f"transit time L/v must be positive, got L={self.L!r}, v={self.v!r}")

    @property
    def transit_time(self) -> float:
        if self.L is None:
            raise DomainError(f"{self.kind} scenario has no transit geometry (L, v)")
        return self.L / self.v

    def elapsed(self, t: Optional[float] = None) -> float:
        """Time spent in the field: ``t`` when given, else the transit time L/v."""
        if t is None:
            return self.transit_time
        if t < 0:
            raise DomainError(f"t must be non-negative, got {t!r}")
        return float(t)


class CoherenceReport(NamedTuple):
    gamma: float
    nu: float
    survival: float


def two_level_coherence(sc: TwoLevelScenario, params: DecoherenceParams,
                        t: Optional[float] = None) -> CoherenceReport:
    gamma = damping_rate(sc.splitting, params)
    nu = frequency_shift(sc.splitting, params)
    return CoherenceReport(gamma=gamma, nu=nu, survival=math.exp(-gamma * sc.elapsed(t)))


def stern_gerlach_probabilities(sc: TwoLevelScenario, params: DecoherenceParams, t: Optional[float] = None):
    """
    Outcome probabilities of an x-direction measurement on a spin prepared along +x
    after the transit: (1 ± e^{-γT} cos νT) / 2.
    """
    report = two_level_coherence(sc, params, t)
    contrast = report.survival * math.cos(report.nu * sc.elapsed(t))
    return 0.5 * (1.0 + contrast), 0.5 * (1.0 - contrast)


def spin_state_after_transit(sc: TwoLevelScenario, params: DecoherenceParams,
                             t: Optional[float] = None) -> DensityMatrix:
    """Spin prepared along +x, Zeeman Hamiltonian (ħω₀/2)σ_z, propagated over L/v."""
    spec = SpectralHamiltonian.from_eigenvalues([0.5 * params.hbar * sc.splitting,
                                                 -0.5 * params.hbar * sc.splitting], hbar=params.hbar)
    return propagate_closed_form(pure_state([1.0, 1.0]), spec, params, sc.elapsed(t))


def rabi_hamiltonian(sc: TwoLevelScenario, hbar: float = 1.0) -> SpectralHamiltonian:
    return diagonalize_hamiltonian(0.5 * hbar * sc.splitting * SIGMA_X, hbar=hbar)


def rabi_population_difference(sc: TwoLevelScenario, params: DecoherenceParams, t: float) -> float:
    """d(t) = ⟨σ_z⟩ for an atom starting in the upper level; equals e^{-γt} cos νt."""
    if sc.kind != KIND_RABI:
        raise ValidationError(f"rabi_population_difference needs kind={KIND_RABI!r}, got {sc.kind!r}")
    rho0 = DensityMatrix(entries=np.diag([1.0, 0.0]))
    state = propagate_closed_form(rho0, rabi_hamiltonian(sc, params.hbar), params, t)
    return expectation(state, SIGMA_Z)


class RabiDampingTable(NamedTuple):
    rows: List[tuple]
    exponent: float


def rabi_damping_vs_n(g: float, n_list: Sequence[int], params: DecoherenceParams) -> RabiDampingTable:
    """
    γ_n = ln(1 + g²(n+1)tau1²) / (2tau2) for each photon number, plus the slope of
    a least-squares power law γ_n ∝ (n+1)^p (NaN with fewer than two distinct n).
    """
    if not g > 0:
        raise DomainError(f"g must be positive, got {g!r}")
    rows = []
    for n in n_list:
        if int(n) != n or n < 0:
            raise ValidationError(f"photon numbers must be non-negative integers, got {n!r}")
        rows.append((int(n), damping_rate(g * math.sqrt(n + 1), params)))
    distinct = sorted({n for n, _ in rows})
    exponent = math.nan
    if len(distinct) >= 2:
        n_arr = np.array([n for n, _ in rows], dtype=float)
        gammas = np.array([gamma for _, gamma in rows])
        exponent = float(np.polyfit(np.log(n_arr + 1.0), np.log(gammas), 1)[0])
    return RabiDampingTable(rows=rows, exponent=exponent)


# ─── EPR Singlet ───────────────────────────────────────────────────────────────
def epr_singlet_state() -> DensityMatrix:
    """(|+−⟩ − |−+⟩)/√2 in the product basis |++⟩, |+−⟩, |−+⟩, |−−⟩."""
    return pure_state([0.0, 1.0, -1.0, 0.0])


class EprReport(NamedTuple):
    state: DensityMatrix
    coherence: complex
    survival: float
    populations: tuple


def epr_transit(sc: TwoLevelScenario, params: DecoherenceParams, t: Optional[float] = None) -> EprReport:
    """
    Particle 1 crosses a field of extent L at speed v, H = (ħω₀/2)σ_z ⊗ I; the
    |+−⟩⟨−+| coherence carrying the correlation decays by e^{-γL/v}.
    """
    rho0 = epr_singlet_state()
    half = 0.5 * params.hbar * sc.splitting
    spec = SpectralHamiltonian.from_eigenvalues([half, half, -half, -half], hbar=params.hbar)
    elapsed = sc.elapsed(t)
    state = propagate_closed_form(rho0, spec, params, elapsed)
    coherence = complex(state.entries[1, 2])
    survival = abs(coherence) / abs(rho0.entries[1, 2])
    logger.debug("[EPR] transit %g: surviving coherence %.6g", elapsed, survival)
    return EprReport(state=state, coherence=coherence, survival=survival,
                     populations=tuple(np.real(np.diag(state.entries)).tolist()))
