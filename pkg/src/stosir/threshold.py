"""Boundary stationary law, threshold quadrature, and the classification report.

With the infected class absent, the susceptible dynamics reduce to

    d phi = (a1 - b1*phi) dt + sigma1*phi dB1,

whose stationary density is inverse gamma,

    f*(x) = b^a / Gamma(a) * x^(-(a+1)) * exp(-b/x),   x > 0,

with a = 2*c1/sigma1^2 and b = 2*a1/sigma1^2.  Averaging the log-infection
drift against f* gives the growth exponent

    lambda = -c2 + int_0^inf (f(x,0) - g(x,0)^2 / 2) f*(x) dx

and the equivalent dimensionless threshold

    R = int f(x,0) f* dx / (c2 + int g(x,0)^2/2 f* dx),

with lambda < 0 iff R < 1.  Both half-line integrals are evaluated after the
substitution y = b/x, which turns the weight into the standard Gamma(a)
density and removes the essential singularity at the origin; an independent
Monte Carlo average over exact inverse-gamma draws cross-checks the result.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.random import Generator, Philox
from scipy import integrate, special

from .model import (
    IncidenceModel,
    ModelParams,
    ParameterError,
    derive_constants,
)

# Gamma tail mass discarded when truncating the transformed integral; the
# corresponding bound on the lost integral is folded into quad_error.
_TAIL_MASS = 1e-12

# Second Philox key word marking threshold Monte Carlo streams; keeps them
# disjoint from the trajectory streams of the engine module.
_MC_STREAM_BASE = 1 << 62


class Classification(str, enum.Enum):
    EXTINCTION = "Extinction"
    PERMANENCE = "Permanence"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class StationaryLaw:
    """Inverse-gamma law of the boundary process: X = b/G, G ~ Gamma(a, 1)."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and self.a > 1.0):
            raise ParameterError(f"shape a must be finite and > 1, got {self.a!r}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ParameterError(f"scale b must be finite and positive, got {self.b!r}")

    @classmethod
    def from_params(cls, params: ModelParams) -> "StationaryLaw":
        d = derive_constants(params)
        return cls(a=d.a, b=d.b)

    def pdf(self, x):
        """Density b^a/Gamma(a) * x^-(a+1) * e^(-b/x); log-space internally."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr <= 0.0):
            raise ValueError("pdf requires x > 0")
        logp = (self.a * math.log(self.b) - special.gammaln(self.a)
                - (self.a + 1.0) * np.log(arr) - self.b / arr)
        out = np.exp(logp)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        """P(X <= x) = Q(a, b/x), the regularized upper incomplete gamma.

        Returns 0 for x <= 0 by convention.
        """
        arr = np.asarray(x, dtype=float)
        out = np.where(arr > 0.0,
                       special.gammaincc(self.a, self.b / np.maximum(arr, 1e-300)),
                       0.0)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: Generator, size: int):
        """Draw `size` variates as b / Gamma(a, scale=1)."""
        return self.b / rng.gamma(self.a, 1.0, size)

    def mean(self) -> float:
        """E[X] = b/(a-1); finite since a > 1."""
        return self.b / (self.a - 1.0)


@dataclass(frozen=True)
class ThresholdReport:
    """Threshold computation result; lam and r carry the same sign information.

    classification is Extinction iff lam + quad_error < 0, Permanence iff
    lam - quad_error > 0, and Indeterminate otherwise (including quadrature
    non-convergence, flagged in `diagnostic`).
    """

    lam: float
    r: float
    quad_error: float
    mc_lambda: float
    mc_halfwidth: float
    classification: Classification
    diagnostic: str = ""

    CSV_HEADER = "lambda,quad_error,mc_lambda,mc_halfwidth,r,classification"

    def to_csv_row(self) -> str:
        vals = [self.lam, self.quad_error, self.mc_lambda, self.mc_halfwidth, self.r]
        return ",".join(repr(v) for v in vals) + f",{self.classification.value}"

    def to_text(self) -> str:
        lines = [
            f"lambda          = {self.lam!r}",
            f"quad_error      = {self.quad_error!r}",
            f"mc_lambda       = {self.mc_lambda!r}",
            f"mc_halfwidth    = {self.mc_halfwidth!r}",
            f"R               = {self.r!r}",
            f"classification  = {self.classification.value}",
        ]
        if self.diagnostic:
            lines.append(f"diagnostic      = {self.diagnostic}")
        return "\n".join(lines)


def _boundary_values(fn: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate fn(x, 0) tolerating scalar-only callables."""
    try:
        out = np.asarray(fn(x, 0.0), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(v, 0.0)) for v in x])


def _gamma_weighted_integral(h: Callable[[float], float], a: float, b: float,
                             abs_tol: float, tail_sup: float):
    """Integrate h(x) f*(x) dx over (0, inf) for nonnegative h.

    Transformed to int h(b/y) Gamma(a).pdf(y) dy and truncated at
    y_max = Q^-1(a, tail_mass); tail_sup must bound |h| on (0, b/y_max],
    so tail_mass * tail_sup bounds the discarded piece.

    Returns (value, error_bound, converged).
    """
    lg = special.gammaln(a)
    y_max = float(special.gammainccinv(a, _TAIL_MASS))

    def integrand(y: float) -> float:
        hv = h(b / y)
        if not math.isfinite(hv):
            raise ValueError(
                f"incidence evaluation failed on the boundary at x={b / y!r}"
            )
        if hv <= 0.0:
            return 0.0
        return math.exp(math.log(hv) + (a - 1.0) * math.log(y) - y - lg)

    converged = True
    note = ""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, 0.0, y_max,
                                  epsabs=abs_tol, epsrel=1e-10, limit=200)
        for w in caught:
            if issubclass(w.category, integrate.IntegrationWarning):
                converged = False
                note = str(w.message)
    return val, err + _TAIL_MASS * tail_sup, converged, note


def boundary_integrals(params: ModelParams, model: IncidenceModel,
                       abs_tol: float = 1e-6):
    """Compute I_f = int f(x,0) f* dx and I_g = int g(x,0)^2/2 f* dx.

    Returns (i_f, i_g, error_bound, converged, note).
    """
    law = StationaryLaw.from_params(params)
    a, b = law.a, law.b
    y_max = float(special.gammainccinv(a, _TAIL_MASS))
    x_tail = b / y_max  # x is below this on the discarded tail
    # |f(x,0)| <= F*x and g(x,0) <= min(K, G*x) from the declared constants
    sup_f = model.lipschitz_f * x_tail
    sup_g2 = 0.5 * min(model.bound_k, model.lipschitz_g * x_tail) ** 2

    i_f, e_f, ok_f, note_f = _gamma_weighted_integral(
        lambda x: float(model.f(x, 0.0)), a, b, abs_tol, sup_f)
    i_g, e_g, ok_g, note_g = _gamma_weighted_integral(
        lambda x: 0.5 * float(model.g(x, 0.0)) ** 2, a, b, abs_tol, sup_g2)
    note = "; ".join(n for n in (note_f, note_g) if n)
    return i_f, i_g, e_f + e_g, ok_f and ok_g, note


def _mc_cross_check(params: ModelParams, model: IncidenceModel, c2: float,
                    n_samples: int, n_batches: int, seed: int):
    """Average the boundary integrand over exact stationary draws.

    Sampling is sharded into counter-derived Philox streams (one per batch,
    reduced in batch order), and the 95% halfwidth comes from batch means.
    """
    law = StationaryLaw.from_params(params)
    batch = n_samples // n_batches
    means = np.empty(n_batches)
    for j in range(n_batches):
        key = np.array([seed & (2 ** 64 - 1), _MC_STREAM_BASE + j], dtype=np.uint64)
        rng = Generator(Philox(key=key))
        x = law.sample(rng, batch)
        vals = _boundary_values(model.f, x) - 0.5 * _boundary_values(model.g, x) ** 2
        means[j] = float(np.mean(vals))
    mc_lambda = -c2 + float(np.mean(means))
    halfwidth = 1.96 * float(np.std(means, ddof=1)) / math.sqrt(n_batches)
    return mc_lambda, halfwidth


def lambda_threshold(
    params: ModelParams,
    model: IncidenceModel,
    *,
    quad_abs_tol: float = 1e-6,
    mc_samples: int = 1_000_000,
    mc_batches: int = 100,
    seed: int = 0,
) -> ThresholdReport:
    """Compute the growth exponent lambda, the threshold R, and classify.

    Set mc_samples=0 to skip the Monte Carlo cross-check (mc fields NaN);
    useful for bulk property sweeps.
    """
    if not model.satisfies_assumption:
        warnings.warn(
            f"incidence model {model.kind!r} does not satisfy the regularity "
            "assumptions; threshold values may be unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    d = derive_constants(params)
    i_f, i_g, quad_error, converged, note = boundary_integrals(
        params, model, abs_tol=quad_abs_tol)
    lam = -d.c2 + i_f - i_g
    r = i_f / (d.c2 + i_g)

    if mc_samples > 0:
        mc_lambda, mc_halfwidth = _mc_cross_check(
            params, model, d.c2, mc_samples, mc_batches, seed)
    else:
        mc_lambda, mc_halfwidth = math.nan, math.nan

    if not converged:
        classification = Classification.INDETERMINATE
        diagnostic = f"quadrature did not converge: {note}"
    elif lam + quad_error < 0.0:
        classification = Classification.EXTINCTION
        diagnostic = ""
    elif lam - quad_error > 0.0:
        classification = Classification.PERMANENCE
        diagnostic = ""
    else:
        classification = Classification.INDETERMINATE
        diagnostic = "lambda not separated from 0 at quadrature accuracy"

    return ThresholdReport(
        lam=lam,
        r=r,
        quad_error=quad_error,
        mc_lambda=mc_lambda,
        mc_halfwidth=mc_halfwidth,
        classification=classification,
        diagnostic=diagnostic,
    )


def r_threshold(params: ModelParams, model: IncidenceModel,
                quad_abs_tol: float = 1e-6) -> float:
    """The dimensionless threshold R = I_f / (c2 + I_g); R >= 0 always."""
    d = derive_constants(params)
    i_f, i_g, _, converged, note = boundary_integrals(
        params, model, abs_tol=quad_abs_tol)
    if not converged:
        raise RuntimeError(f"quadrature did not converge: {note}")
    return i_f / (d.c2 + i_g)
