# waiting_time.py
"""
The Γ waiting-time law of the effective evolution time t' after a wall time t:
shape t/tau2 (number of evolution events), scale tau1 (event width). Also the
Poisson event law used for the Milburn comparison and the quadrature engine
every oracle averages through.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate, special

from core import DecoherenceParams, DomainError, NumericError, ValidationError

logger = logging.getLogger(__name__)

TAIL_EPS = 1e-14
QUAD_LIMIT = 500


# ─── Γ Law ─────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class GammaLaw:
    shape: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise ValidationError(f"shape must be positive, got {self.shape!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"scale must be positive, got {self.scale!r}")

    @classmethod
    def at(cls, t: float, params: DecoherenceParams) -> "GammaLaw":
        if not t > 0:
            raise DomainError(
                f"the waiting-time density needs t > 0, got t={t!r} (t -> 0 is a point mass at t'=0)"
            )
        return cls(shape=t / params.tau2, scale=params.tau1)

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def variance(self):
        return self.shape * self.scale ** 2

    @property
    def singular_at_origin(self):
        """True when the density diverges (integrably) at t' = 0."""
        return self.shape < 1.0

    @property
    def mode(self):
        return max(self.shape - 1.0, 0.0) * self.scale

    def logpdf(self, t_prime):
        x = np.asarray(t_prime, dtype=float) / self.scale
        with np.errstate(divide="ignore"):
            return (special.xlogy(self.shape - 1.0, x) - x
                    - special.gammaln(self.shape) - math.log(self.scale))

    def pdf(self, t_prime):
        t_prime = np.asarray(t_prime, dtype=float)
        if np.any(t_prime < 0):
            raise DomainError("the waiting-time density is defined for t' >= 0 only")
        out = np.exp(self.logpdf(t_prime))
        if self.singular_at_origin:
            out = np.where(t_prime == 0.0, np.inf, out)
        return out[()] if out.ndim == 0 else out

    def cdf(self, t_prime):
        return special.gammainc(self.shape, np.asarray(t_prime, dtype=float) / self.scale)

    def support(self, eps: float = TAIL_EPS):
        """Interval [lo, hi] outside which each tail carries at most ``eps`` probability."""
        hi = self.scale * float(special.gammainccinv(self.shape, eps))
        lo = 0.0 if self.shape < 1.0 else self.scale * float(special.gammaincinv(self.shape, eps))
        return lo, hi


def gamma_pdf(t_prime, t: float, params: DecoherenceParams):
    """
    P(t, t') = e^{-t'/tau1} (t'/tau1)^{t/tau2 - 1} / (tau1 Γ(t/tau2)).

    For shape < 1 the value at t' = 0 is ``inf``: the singularity is integrable
    and quadrature callers handle it through an algebraic weight.
    """
    return GammaLaw.at(t, params).pdf(t_prime)


def gamma_cdf(t_prime, t: float, params: DecoherenceParams):
    return GammaLaw.at(t, params).cdf(t_prime)


def gamma_support(t: float, params: DecoherenceParams, eps: float = TAIL_EPS):
    return GammaLaw.at(t, params).support(eps)


def gamma_moments(t: float, params: DecoherenceParams):
    """(mean, dispersion) of the effective time: t̄ = t tau1/tau2, σ = sqrt(t̄ tau1)."""
    if not t > 0:
        raise DomainError(f"moments need t > 0, got {t!r}")
    mean = t * params.ratio
    return mean, math.sqrt(mean * params.tau1)


class GaussianSurrogate(NamedTuple):
    mean: float
    sigma: float

    def pdf(self, t_prime):
        z = (np.asarray(t_prime, dtype=float) - self.mean) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    @property
    def relative_dispersion(self):
        return self.sigma / self.mean


def gaussian_approximation(t: float, params: DecoherenceParams) -> GaussianSurrogate:
    """Gaussian surrogate of the Γ law, valid once many events have occurred (t/tau2 > 1)."""
    if not t / params.tau2 > 1.0:
        raise DomainError(
            f"Gaussian approximation needs t/tau2 > 1, got {t / params.tau2!r}"
        )
    return GaussianSurrogate(*gamma_moments(t, params))


def gamma_grid(t: float, params: DecoherenceParams, start: float, stop: float, count: int):
    """Rows (t', P(t, t')) on an inclusive linear grid."""
    if count < 2 or not stop > start or start < 0:
        raise ValidationError(f"grid needs 0 <= start < stop and count >= 2, got {start}:{stop}:{count}")
    law = GammaLaw.at(t, params)
    grid = np.linspace(start, stop, count)
    return list(zip(grid.tolist(), np.atleast_1d(law.pdf(grid)).tolist()))


# ─── Poisson Event Law ─────────────────────────────────────────────────────────
def milburn_poisson_pmf(n: int, t: float, tau: float) -> float:
    """p_n = e^{-t/tau} (t/tau)^n / n!."""
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a non-negative integer, got {n!r}")
    if t < 0 or not tau > 0:
        raise DomainError(f"need t >= 0 and tau > 0, got t={t!r}, tau={tau!r}")
    lam = t / tau
    return float(np.exp(special.xlogy(n, lam) - lam - special.gammaln(n + 1)))


def poisson_tail_bound(t: float, tau: float) -> int:
    lam = t / tau
    return int(math.ceil(lam + 20.0 * math.sqrt(lam) + 30.0))


def milburn_poisson_mean(t: float, tau: float) -> float:
    """Mean event count summed out to the tail bound."""
    n = np.arange(poisson_tail_bound(t, tau) + 1)
    lam = t / tau
    p = np.exp(special.xlogy(n, lam) - lam - special.gammaln(n + 1))
    return float(np.sum(n * p))


# ─── Quadrature Engine ─────────────────────────────────────────────────────────
def _quad(func, lo, hi, tol, label, **kwargs):
    result = integrate.quad(func, lo, hi, epsabs=tol, epsrel=tol, limit=QUAD_LIMIT,
                            full_output=1, **kwargs)
    value, abserr = result[0], result[1]
    if len(result) > 3 and abserr > max(tol, 1e-8):
        raise NumericError(
            f"quadrature for {label} did not converge: estimated error {abserr:.3e} ({result[3].splitlines()[0]})",
            residual=abserr,
        )
    logger.debug("[QUADRATURE] %s on [%g, %g]: %r ± %.2e", label, lo, hi, value, abserr)
    return value


def gamma_average(f: Callable[[float], float], t: float, params: DecoherenceParams,
                  tol: float = 1e-10, eps: Optional[float] = None) -> float:
    """
    ∫ P(t, t') f(t') dt' over the truncated support of the law.

    Shapes below one are integrated with an algebraic weight so the density's
    singularity at the origin never gets sampled.
    """
    law = GammaLaw.at(t, params)
    lo, hi = law.support(TAIL_EPS if eps is None else eps)
    if law.shape < 1.0:
        norm = -special.gammaln(law.shape) - law.shape * math.log(law.scale)

        def regular(s):
            return f(s) * math.exp(norm - s / law.scale)

        return _quad(regular, 0.0, hi, tol, "gamma average", weight="alg", wvar=(law.shape - 1.0, 0.0))

    def integrand(s):
        return f(s) * math.exp(float(law.logpdf(s)))

    points = [law.mode] if lo < law.mode < hi else None
    return _quad(integrand, lo, hi, tol, "gamma average", points=points)


def gamma_phase_average(omega: float, t: float, params: DecoherenceParams, tol: float = 1e-10) -> complex:
    """
    ∫ P(t, t') e^{-iωt'} dt' for shape >= 1, using QUADPACK's oscillatory weight.
    """
    law = GammaLaw.at(t, params)
    if law.shape < 1.0:
        raise DomainError(f"phase quadrature needs t >= tau2 (shape >= 1), got shape {law.shape!r}")
    lo, hi = law.support(TAIL_EPS)

    def density(s):
        return math.exp(float(law.logpdf(s)))

    if omega == 0.0:
        return complex(_quad(density, lo, hi, tol, "normalization"))
    w = abs(float(omega))
    re = _quad(density, lo, hi, tol, f"cos average (omega={omega:g})", weight="cos", wvar=w)
    im = _quad(density, lo, hi, tol, f"sin average (omega={omega:g})", weight="sin", wvar=w)
    return complex(re, -im if omega > 0 else im)


def gamma_average_vec(f: Callable[[float], np.ndarray], t: float, params: DecoherenceParams,
                      tol: float = 1e-10) -> np.ndarray:
    """Vector-valued gamma_average for shape >= 1 (bounded density), e.g. a whole position grid."""
    law = GammaLaw.at(t, params)
    if law.shape < 1.0:
        raise DomainError(f"vector quadrature needs t >= tau2 (shape >= 1), got shape {law.shape!r}")
    lo, hi = law.support(TAIL_EPS)

    def integrand(s):
        return np.asarray(f(s), dtype=float) * math.exp(float(law.logpdf(s)))

    points = (law.mode,) if lo < law.mode < hi else None
    value, abserr = integrate.quad_vec(integrand, lo, hi, epsabs=tol, epsrel=tol, norm="max",
                                       limit=QUAD_LIMIT * 4, points=points)
    if abserr > max(tol, 1e-8) * max(1.0, float(np.max(np.abs(value)))):
        raise NumericError(f"vector quadrature did not converge: estimated error {abserr:.3e}", residual=abserr)
    logger.debug("[QUADRATURE] vector average of %d values on [%g, %g]", np.size(value), lo, hi)
    return value
