# core.py
"""
Shared domain types for the intrinsic-decoherence toolkit: Hamiltonian spectra,
validated density matrices, decoherence parameters, Bohr frequencies and
superoperators, plus the error hierarchy every other module raises.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LIBRARY_VERSION = "0.1.0"

# ─── Runtime Settings ──────────────────────────────────────────────────────────
DECOHERE_THREADS = os.environ.get("DECOHERE_THREADS", "0")
DECOHERE_LOG_LEVEL = os.environ.get("DECOHERE_LOG_LEVEL", "WARNING")

# ─── Tolerances ────────────────────────────────────────────────────────────────
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
UNITARY_TOL = 1e-12
INPUT_HERMITIAN_TOL = 1e-10
RECONSTRUCTION_RTOL = 1e-9
DEGENERACY_RTOL = 1e-12
TRACE_PRESERVING_TOL = 1e-10

BASIS_INPUT = "input"
BASIS_ENERGY = "energy"


# ─── Errors ────────────────────────────────────────────────────────────────────
class DecoherenceError(Exception):
    """Base class for every error raised by the toolkit."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ValidationError(DecoherenceError, ValueError):
    """An input violates one of its invariants."""

    def __init__(self, message, residual=None, violations=None):
        super().__init__(message, residual)
        self.violations = list(violations or [])


class DomainError(DecoherenceError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(DecoherenceError, ArithmeticError):
    """A numerical procedure failed or produced an inconsistent result."""


class ConfigError(ValidationError):
    """A run configuration is malformed; ``path`` names the offending field."""

    def __init__(self, message, path="", residual=None):
        super().__init__(f"{path}: {message}" if path else message, residual)
        self.path = path


def thread_setting() -> int:
    """DECOHERE_THREADS as a worker count; 0 means one thread per CPU."""
    try:
        value = int(DECOHERE_THREADS)
    except (TypeError, ValueError):
        value = -1
    if value < 0:
        raise ConfigError(f"expected a non-negative integer, got {DECOHERE_THREADS!r}", "DECOHERE_THREADS")
    return value


def _frozen(array, dtype=None):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# ─── Decoherence Parameters ────────────────────────────────────────────────────
@dataclass(frozen=True)
class DecoherenceParams:
    """The event width tau1, the cronon tau2 and the action constant hbar."""

    tau1: float
    tau2: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("tau1", "tau2", "hbar"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
        if self.tau1 > self.tau2:
            raise ValidationError(
                f"tau1 <= tau2 violated: tau1={self.tau1!r}, tau2={self.tau2!r}",
                residual=self.tau1 - self.tau2,
            )

    @classmethod
    def from_mapping(cls, values):
        try:
            return cls(
                tau1=float(values["tau1"]),
                tau2=float(values["tau2"]),
                hbar=float(values.get("hbar", 1.0)),
            )
        except KeyError as e:
            raise ValidationError(f"missing decoherence parameter {e.args[0]!r}") from e

    @property
    def ratio(self):
        """tau1 / tau2, the factor turning wall time into mean effective time."""
        return self.tau1 / self.tau2


# ─── Spectral Hamiltonian ──────────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class SpectralHamiltonian:
    """
    Eigenvalues in non-decreasing order plus the map from the input basis to the
    energy basis.

    ``basis_transform`` is the unitary U whose columns are the energy eigenvectors
    written in the input basis (H = U diag(E) U†). When it is None the input basis
    is already an eigenbasis and ``permutation`` carries the sort order, i.e.
    ``eigenvalues == input_values[permutation]``.
    """

    eigenvalues: np.ndarray
    permutation: np.ndarray
    basis_transform: Optional[np.ndarray] = None
    hbar: float = 1.0

    def __post_init__(self):
        energies = np.asarray(self.eigenvalues, dtype=float)
        if energies.ndim != 1 or energies.size == 0:
            raise ValidationError("eigenvalues must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(energies)):
            raise ValidationError("eigenvalues must be finite")
        if np.any(np.diff(energies) < 0):
            raise ValidationError("eigenvalues must be stored in non-decreasing order")
        perm = np.asarray(self.permutation, dtype=int)
        if sorted(perm.tolist()) != list(range(energies.size)):
            raise ValidationError("permutation must be a permutation of range(dim)")
        if not np.isfinite(self.hbar) or self.hbar <= 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar!r}")
        object.__setattr__(self, "eigenvalues", _frozen(energies))
        object.__setattr__(self, "permutation", _frozen(perm))
        if self.basis_transform is not None:
            u = np.asarray(self.basis_transform, dtype=complex)
            if u.shape != (energies.size, energies.size):
                raise ValidationError(
                    f"basis_transform has shape {u.shape}, expected {(energies.size,) * 2}"
                )
            residual = float(np.max(np.abs(u.conj().T @ u - np.eye(energies.size))))
            if residual > UNITARY_TOL:
                raise ValidationError(
                    f"basis_transform is not unitary: max|U†U - I| = {residual:.3e}",
                    residual=residual,
                )
            object.__setattr__(self, "basis_transform", _frozen(u))

    @classmethod
    def from_eigenvalues(cls, values: Sequence[float], hbar: float = 1.0):
        """Spectrum of a Hamiltonian that is diagonal in the input basis."""
        values = np.asarray(values, dtype=float)
        perm = np.argsort(values, kind="stable")
        return cls(eigenvalues=values[perm], permutation=perm, hbar=hbar)

    @property
    def dim(self):
        return int(self.eigenvalues.size)

    @property
    def unitary(self):
        """The input→energy transform as a matrix (a permutation matrix when diagonal)."""
        if self.basis_transform is not None:
            return np.array(self.basis_transform)
        u = np.zeros((self.dim, self.dim), dtype=complex)
        u[self.permutation, np.arange(self.dim)] = 1.0
        return u

    @property
    def matrix(self):
        """The Hamiltonian written in the input basis."""
        return from_energy_basis(np.diag(self.eigenvalues).astype(complex), self)


def diagonalize_hamiltonian(H, hbar: float = 1.0) -> SpectralHamiltonian:
    """
    Diagonalize a Hermitian matrix into a SpectralHamiltonian.

    Exactly diagonal input keeps the input basis (U is a permutation) so
    degenerate levels stay exactly degenerate.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] == 0:
        raise ValidationError(f"Hamiltonian must be a non-empty square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValidationError("Hamiltonian has non-finite entries")
    residual = float(np.max(np.abs(H - H.conj().T)))
    if residual > INPUT_HERMITIAN_TOL:
        raise ValidationError(
            f"Hamiltonian is not Hermitian: max|H - H†| = {residual:.3e}", residual=residual
        )
    if not np.any(H - np.diag(np.diag(H))):
        return SpectralHamiltonian.from_eigenvalues(np.diag(H).real, hbar=hbar)

    try:
        energies, vectors = np.linalg.eigh(0.5 * (H + H.conj().T))
    except np.linalg.LinAlgError as e:
        raise NumericError(f"eigensolver did not converge: {e}") from e

    scale = max(float(np.linalg.norm(H, 2)), np.finfo(float).tiny)
    rebuilt = (vectors * energies) @ vectors.conj().T
    gap = float(np.linalg.norm(rebuilt - H, 2))
    if gap > RECONSTRUCTION_RTOL * scale:
        raise NumericError(
            f"eigendecomposition does not reconstruct H: |UDU† - H| = {gap:.3e}", residual=gap
        )
    logger.debug("[SPECTRUM] diagonalized %dx%d Hamiltonian, range [%g, %g]",
                 H.shape[0], H.shape[0], energies[0], energies[-1])
    return SpectralHamiltonian(
        eigenvalues=energies, permutation=np.arange(energies.size), basis_transform=vectors, hbar=hbar
    )


# ─── Bohr Frequencies ──────────────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class FrequencyMatrix:
    """Antisymmetric matrix of Bohr frequencies ω_nm = (E_n - E_m)/ħ in the energy basis."""

    omegas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omegas", _frozen(self.omegas, dtype=float))

    @property
    def dim(self):
        return int(self.omegas.shape[0])

    def unique_pairs(self):
        """(n, m, ω) for the strict upper triangle."""
        n, m = np.triu_indices(self.dim, k=1)
        return list(zip(n.tolist(), m.tolist(), self.omegas[n, m].tolist()))


def bohr_frequencies(spec: SpectralHamiltonian, params: DecoherenceParams) -> FrequencyMatrix:
    energies = spec.eigenvalues
    gaps = energies[:, None] - energies[None, :]
    magnitude = np.maximum(1.0, np.maximum(np.abs(energies)[:, None], np.abs(energies)[None, :]))
    gaps[np.abs(gaps) <= DEGENERACY_RTOL * magnitude] = 0.0
    return FrequencyMatrix(omegas=gaps / params.hbar)


# ─── Density Matrices ──────────────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A Hermitian, trace-one, positive semidefinite matrix tagged with its basis."""

    entries: np.ndarray
    basis: str = BASIS_INPUT

    def __post_init__(self):
        if self.basis not in (BASIS_INPUT, BASIS_ENERGY):
            raise ValidationError(f"unknown basis tag {self.basis!r}")
        object.__setattr__(self, "entries", _frozen(self.entries, dtype=complex))

    @property
    def dim(self):
        return int(self.entries.shape[0])

    def purity(self):
        return float(np.real(np.sum(self.entries * self.entries.T)))


def validate_density_matrix(M, basis: str = BASIS_INPUT) -> DensityMatrix:
    """
    Check Hermiticity, unit trace and positivity; raise a ValidationError listing
    every violated invariant with its measured residual.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValidationError(f"density matrix must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError("density matrix has non-finite entries")

    violations = []
    hermitian_residual = float(np.max(np.abs(M - M.conj().T)))
    if hermitian_residual > HERMITIAN_TOL:
        violations.append(("hermitian", hermitian_residual))
    trace_residual = float(abs(np.trace(M) - 1.0))
    if trace_residual > TRACE_TOL:
        violations.append(("trace", float(np.real(np.trace(M)))))
    min_eig = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
    if min_eig < -POSITIVITY_TOL:
        violations.append(("positivity", min_eig))

    if violations:
        labels = {
            "hermitian": "Hermiticity violated: max|rho - rho†| = {:.3e}",
            "trace": "trace violated: Tr rho = {:.12g}",
            "positivity": "positivity violated: min eigenvalue = {:.6g}",
        }
        message = "; ".join(labels[name].format(value) for name, value in violations)
        raise ValidationError(message, residual=violations[0][1], violations=violations)
    return DensityMatrix(entries=M, basis=basis)


def pure_state(vector, basis: str = BASIS_INPUT) -> DensityMatrix:
    """Projector onto the normalized ``vector``."""
    psi = np.asarray(vector, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if psi.size == 0 or norm == 0 or not np.isfinite(norm):
        raise ValidationError("pure state vector must be non-zero and finite")
    psi = psi / norm
    return validate_density_matrix(np.outer(psi, psi.conj()), basis=basis)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (z + z.conj().T)


def random_density_matrix(rng: np.random.Generator, n: int, rank: Optional[int] = None) -> DensityMatrix:
    """V diag(p) V† with V Haar-random and p drawn from a flat Dirichlet law."""
    rank = n if rank is None else rank
    if not 1 <= rank <= n:
        raise ValidationError(f"rank must lie in [1, {n}], got {rank}")
    p = np.zeros(n)
    p[:rank] = rng.dirichlet(np.ones(rank))
    v = random_unitary(rng, n)
    rho = (v * p) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return validate_density_matrix(rho / np.trace(rho).real)


# ─── Basis Handling ────────────────────────────────────────────────────────────
def _entries(rho):
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def to_energy_basis(rho, spec: SpectralHamiltonian):
    """Express an input-basis matrix in the energy basis (same container type as given)."""
    M = _entries(rho)
    if M.shape != (spec.dim, spec.dim):
        raise ValidationError(f"matrix of shape {M.shape} does not match dimension {spec.dim}")
    if spec.basis_transform is not None:
        U = spec.basis_transform
        out = U.conj().T @ M @ U
    else:
        out = M[np.ix_(spec.permutation, spec.permutation)]
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(entries=out, basis=BASIS_ENERGY)
    return out


def from_energy_basis(rho, spec: SpectralHamiltonian):
    """Inverse of :func:`to_energy_basis`."""
    M = _entries(rho)
    if M.shape != (spec.dim, spec.dim):
        raise ValidationError(f"matrix of shape {M.shape} does not match dimension {spec.dim}")
    if spec.basis_transform is not None:
        U = spec.basis_transform
        out = U @ M @ U.conj().T
    else:
        out = np.empty_like(M)
        out[np.ix_(spec.permutation, spec.permutation)] = M
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(entries=out, basis=BASIS_INPUT)
    return out


# ─── Superoperators ────────────────────────────────────────────────────────────
def vectorize(rho):
    """Column-stacking vectorization."""
    return np.asarray(_entries(rho)).flatten(order="F")


def unvectorize(vec):
    vec = np.asarray(vec)
    n = int(round(np.sqrt(vec.size)))
    if n * n != vec.size:
        raise ValidationError(f"vector of length {vec.size} is not a vectorized square matrix")
    return vec.reshape((n, n), order="F")


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on column-stacked density matrices."""

    matrix: np.ndarray
    trace_preserving: bool = field(default=False)

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=complex)
        n = int(round(np.sqrt(S.shape[0]))) if S.ndim == 2 else 0
        if S.ndim != 2 or S.shape[0] != S.shape[1] or n * n != S.shape[0] or n == 0:
            raise ValidationError(f"superoperator must be N²×N², got shape {S.shape}")
        object.__setattr__(self, "matrix", _frozen(S))
        if self.trace_preserving:
            residual = self.trace_residual()
            if residual > TRACE_PRESERVING_TOL:
                raise ValidationError(
                    f"superoperator flagged trace-preserving but vec(I)†S differs by {residual:.3e}",
                    residual=residual,
                )

    @property
    def dim(self):
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, n):
        return cls(matrix=np.eye(n * n), trace_preserving=True)

    @classmethod
    def from_unitary(cls, U):
        """ρ ↦ U ρ U†, i.e. conj(U) ⊗ U under column stacking."""
        U = np.asarray(U, dtype=complex)
        return cls(matrix=np.kron(U.conj(), U), trace_preserving=True)

    def trace_residual(self):
        vec_identity = vectorize(np.eye(self.dim))
        return float(np.max(np.abs(vec_identity.conj() @ self.matrix - vec_identity.conj())))

    def is_trace_preserving(self, tol: float = TRACE_PRESERVING_TOL):
        return self.trace_residual() <= tol

    def apply(self, rho):
        return unvectorize(self.matrix @ vectorize(rho))

    def compose(self, first: "Superoperator") -> "Superoperator":
        """The map applying ``first`` and then ``self``."""
        if first.dim != self.dim:
            raise ValidationError(f"cannot compose superoperators of dimensions {self.dim} and {first.dim}")
        return Superoperator(
            matrix=self.matrix @ first.matrix,
            trace_preserving=self.trace_preserving and first.trace_preserving,
        )
