# trajectories.py
"""
Monte-Carlo reading of the averaged dynamics: draw the effective evolution time
t' from the Γ law, evolve unitarily for t', and average. Serves as an
independent oracle for every propagator in ``evolution``.

Reproducibility: samples are grouped in fixed blocks of MC_BLOCK_SIZE; block b
draws from its own Philox stream keyed by SeedSequence(seed, spawn_key=(b,)).
Blocks may run on any number of threads; partial sums are merged in block order,
so estimates are bit-identical for a given seed regardless of parallelism.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from core import (
    BASIS_INPUT,
    DecoherenceParams,
    DensityMatrix,
    DomainError,
    SpectralHamiltonian,
    ValidationError,
    bohr_frequencies,
    thread_setting,
    to_energy_basis,
)
from observables import expectation

logger = logging.getLogger(__name__)

MC_BLOCK_SIZE = 4096
MC_SLICE = 512
RNG_NAME = "numpy Philox4x32-10, SeedSequence(entropy=seed, spawn_key=(block,)), block=4096"


# ─── Configuration ─────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int
    worker_hint: int = 0

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise ValidationError(f"samples must be a positive integer, got {self.samples!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if int(self.worker_hint) != self.worker_hint or self.worker_hint < 0:
            raise ValidationError(f"worker_hint must be a non-negative integer, got {self.worker_hint!r}")

    @property
    def blocks(self):
        return [(b, min(MC_BLOCK_SIZE, self.samples - b * MC_BLOCK_SIZE))
                for b in range(math.ceil(self.samples / MC_BLOCK_SIZE))]


def rng_metadata(cfg: McConfig) -> str:
    return f"{RNG_NAME}; seed={cfg.seed}; samples={cfg.samples}"


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def _worker_count(cfg: McConfig) -> int:
    if cfg.worker_hint:
        return cfg.worker_hint
    return thread_setting() or os.cpu_count() or 1


def _map_blocks(cfg: McConfig, task):
    workers = min(_worker_count(cfg), len(cfg.blocks))
    if workers <= 1:
        return [task(block) for block in cfg.blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, cfg.blocks))


# ─── Γ Sampling ────────────────────────────────────────────────────────────────
def standard_gamma(rng: np.random.Generator, shape: float, size: int) -> np.ndarray:
    """
    Unit-scale Γ(shape) variates by the Marsaglia-Tsang squeeze method; shapes
    below one use the boost Γ(shape + 1) · U^{1/shape}.
    """
    if shape < 1.0:
        boosted = standard_gamma(rng, shape + 1.0, size)
        return boosted * rng.random(size) ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    pending = np.arange(size)
    while pending.size:
        x = rng.standard_normal(pending.size)
        u = rng.random(pending.size)
        v = 1.0 + c * x
        positive = v > 0
        v = np.where(positive, v, 1.0) ** 3
        with np.errstate(divide="ignore"):
            accept = positive & ((u < 1.0 - 0.0331 * x ** 4)
                                 | (np.log(u) < 0.5 * x * x + d * (1.0 - v + np.log(v))))
        out[pending[accept]] = d * v[accept]
        pending = pending[~accept]
    return out


def sample_effective_time(rng: np.random.Generator, t: float, params: DecoherenceParams, size=None):
    """Draw t' from the Γ law with shape t/tau2 and scale tau1."""
    if not t > 0:
        raise DomainError(f"sampling needs t > 0, got {t!r}")
    draws = params.tau1 * standard_gamma(rng, t / params.tau2, 1 if size is None else int(size))
    return float(draws[0]) if size is None else draws


def sample_effective_times(cfg: McConfig, t: float, params: DecoherenceParams) -> np.ndarray:
    """All cfg.samples draws, block-ordered."""
    def task(block):
        index, size = block
        return sample_effective_time(block_generator(cfg.seed, index), t, params, size)

    return np.concatenate(_map_blocks(cfg, task))


# ─── Estimators ────────────────────────────────────────────────────────────────
def _accumulate(cfg, t, params, per_draw):
    """
    Sum per_draw(t') (shifted values, zero at t'=0) and their squared moduli
    over all blocks; returns (count, sum, sum of squares).
    """
    def task(block):
        index, size = block
        draws = sample_effective_time(block_generator(cfg.seed, index), t, params, size)
        s1 = s2 = 0.0
        for start in range(0, size, MC_SLICE):
            y = per_draw(draws[start:start + MC_SLICE])
            s1 = s1 + y.sum(axis=0)
            s2 = s2 + (np.abs(y) ** 2).sum(axis=0)
        return s1, s2

    total1 = total2 = 0.0
    for s1, s2 in _map_blocks(cfg, task):
        total1 = total1 + s1
        total2 = total2 + s2
    return cfg.samples, total1, total2


def _stderr(n, s1, s2):
    variance = np.maximum(s2 - np.abs(s1) ** 2 / n, 0.0) / (n - 1)
    return np.sqrt(variance / n)


def mc_estimate_density(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                        t: float, cfg: McConfig):
    """
    Sample mean of e^{-iω_nm t'} ρ_nm(0) over Γ-distributed t', in rho0's basis,
    with per-element standard errors (unbiased n-1 variance).
    """
    if cfg.samples < 2:
        raise DomainError(f"Monte-Carlo estimates need at least 2 samples, got {cfg.samples}")
    if not t > 0:
        raise DomainError(f"sampling needs t > 0, got {t!r}")
    if rho0.dim != spec.dim:
        raise ValidationError(f"state dimension {rho0.dim} does not match Hamiltonian dimension {spec.dim}")
    rho_e = rho0.entries if rho0.basis != BASIS_INPUT else to_energy_basis(rho0.entries, spec)
    omegas = bohr_frequencies(spec, params).omegas
    transform = rho0.basis == BASIS_INPUT and spec.basis_transform is not None
    U = spec.basis_transform

    def per_draw(draws):
        y = np.expm1(-1j * omegas[None, :, :] * draws[:, None, None]) * rho_e[None, :, :]
        if transform:
            return U[None, :, :] @ y @ U.conj().T[None, :, :]
        if rho0.basis == BASIS_INPUT:
            out = np.empty_like(y)
            out[:, spec.permutation[:, None], spec.permutation[None, :]] = y
            return out
        return y

    n, s1, s2 = _accumulate(cfg, t, params, per_draw)
    estimate = rho0.entries + s1 / n
    estimate = 0.5 * (estimate + estimate.conj().T)
    logger.info("[MC] density estimate at t=%g from %d samples (%s)", t, n, rng_metadata(cfg))
    return estimate, _stderr(n, s1, s2)


def mc_estimate_observable(rho0: DensityMatrix, spec: SpectralHamiltonian, params: DecoherenceParams,
                           A, t: float, cfg: McConfig):
    """Mean of Tr(ρ(t') A) over Γ-distributed t' and its standard error."""
    if cfg.samples < 2:
        raise DomainError(f"Monte-Carlo estimates need at least 2 samples, got {cfg.samples}")
    if not t > 0:
        raise DomainError(f"sampling needs t > 0, got {t!r}")
    A = np.asarray(A, dtype=complex)
    if A.shape != (spec.dim, spec.dim):
        raise ValidationError(f"observable of shape {A.shape} does not match dimension {spec.dim}")
    residual = float(np.max(np.abs(A - A.conj().T)))
    if residual > 1e-10:
        raise ValidationError(f"observable is not Hermitian: max|A - A†| = {residual:.3e}", residual=residual)
    if rho0.basis == BASIS_INPUT:
        rho_e, a_e = to_energy_basis(rho0.entries, spec), to_energy_basis(A, spec)
    else:
        rho_e, a_e = rho0.entries, A
    omegas = bohr_frequencies(spec, params).omegas
    weights = rho_e * a_e.T

    def per_draw(draws):
        phases = np.expm1(-1j * omegas[None, :, :] * draws[:, None, None])
        return np.real(np.sum(phases * weights[None, :, :], axis=(1, 2)))

    n, s1, s2 = _accumulate(cfg, t, params, per_draw)
    value = expectation(rho0, A) + float(s1) / n
    return value, float(_stderr(n, s1, s2))
