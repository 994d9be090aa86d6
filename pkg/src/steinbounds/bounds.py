"""Non-asymptotic bounds on ln beta(alpha) and the threshold test behind the upper bound.

For a level ``alpha`` the optimal type-II error satisfies

    -(D + h(alpha)) / (1 - alpha)  <=  ln beta(alpha)  <=  -D + mu0(alpha)  <=  -D + r1 / sqrt(alpha)

where D is the KL divergence, r1 the LLR standard deviation under P, and
mu0 the smallest offset with P{LLR <= D - mu0} <= alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError, ExactUnavailable, InvalidInput, TooFewSamples
from .models import LlrAtomDistribution, is_discrete, llr_atoms_under_p, q_masses, sample_llr
from .rng import RngStream

EXACT_TOL = 1e-9


def check_alpha(alpha) -> float:
    a = float(alpha)
    if not (0.0 < a < 1.0):
        raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    return a


def binary_entropy(alpha) -> float:
    a = check_alpha(alpha)
    return -a * math.log(a) - (1.0 - a) * math.log1p(-a)


def lower_bound_ln_beta(d, alpha) -> float:
    a = check_alpha(alpha)
    if d < 0:
        raise DomainError(f"divergence must be non-negative, got {d!r}")
    return -(d + binary_entropy(a)) / (1.0 - a)


def upper_bound_mu0(d, mu0) -> float:
    return min(0.0, -d + mu0)


def upper_bound_chebyshev(d, r1, alpha) -> float:
    a = check_alpha(alpha)
    return min(0.0, -d + r1 / math.sqrt(a))


def mu0_exact(atoms: LlrAtomDistribution, d, alpha) -> float:
    """Infimum of mu >= 0 with P{LLR <= d - mu} <= alpha, read off the atom CDF.

    With v* the smallest atom whose CDF exceeds alpha, every mu > d - v* is
    admissible and none below it is, so the infimum is max(0, d - v*).
    """
    a = check_alpha(alpha)
    mean = atoms.mean()
    if abs(mean - d) > EXACT_TOL * max(1.0, abs(d)):
        raise InvalidInput(f"d={d!r} does not match the atom mean {mean!r}")
    j, _ = kernels.first_exceeding(atoms.p_masses, a)
    return max(0.0, d - float(atoms.values[j]))


def mu0_mc(model, d, alpha, n_samples, seed, stream=0, workers=1) -> float:
    """Conservative empirical (1 - alpha)-quantile of eta = d - LLR under P, clamped at 0."""
    a = check_alpha(alpha)
    need = math.ceil(10.0 / a)
    if n_samples < need:
        raise TooFewSamples(f"mu0_mc at alpha={a} needs at least {need} samples, got {n_samples}")
    eta = d - sample_llr(model, True, RngStream(seed, stream), n_samples, workers)
    k = math.ceil(round((1.0 - a) * n_samples, 9))
    return max(0.0, float(np.partition(eta, k - 1)[k - 1]))


def threshold_test_eval(
    model, mu, mode="exact", n_samples=100_000, seed=42, stream=0, d=None, workers=1
):
    """Type-I and type-II errors of the deterministic region {LLR >= D - mu}.

    Type-I error counts P{LLR < D - mu} (strict), so alpha_mu + P(region) = 1.
    """
    from .divergence import kl_closed_form

    if d is None:
        d = model.mean() if isinstance(model, LlrAtomDistribution) else kl_closed_form(model)
    cut = d - mu
    if mode == "exact":
        if not (is_discrete(model) or isinstance(model, LlrAtomDistribution)):
            raise ExactUnavailable(f"no exact LLR law for {type(model).__name__}")
        atoms = model if isinstance(model, LlrAtomDistribution) else llr_atoms_under_p(model)
        # d - (d - v) need not round back to v; atoms within merge tolerance sit on the cut
        inside = atoms.values >= cut - kernels.MERGE_RTOL * max(1.0, abs(cut))
        alpha_mu = float(np.sum(atoms.p_masses[~inside]))
        beta_mu = float(np.sum(q_masses(atoms)[inside]))
        return alpha_mu, beta_mu
    if mode != "mc":
        raise InvalidInput(f"mode must be 'exact' or 'mc', got {mode!r}")
    rs = RngStream(seed, stream)
    under_p = sample_llr(model, True, rs.substream(0), n_samples, workers)
    under_q = sample_llr(model, False, rs.substream(1), n_samples, workers)
    return float(np.mean(under_p < cut)), float(np.mean(under_q >= cut))


@dataclass(frozen=True)
class BoundsReport:
    alpha: float
    d: float
    r1: float
    mu0: Optional[float]
    ln_beta_lower: float
    ln_beta_upper_mu0: Optional[float]
    ln_beta_upper_cheb: float
    clamped_mu0: bool
    clamped_cheb: bool

    @property
    def best_upper(self) -> float:
        if self.ln_beta_upper_mu0 is None:
            return self.ln_beta_upper_cheb
        return min(self.ln_beta_upper_mu0, self.ln_beta_upper_cheb)


def bounds_report(d, r1, alpha, mu0=None) -> BoundsReport:
    a = check_alpha(alpha)
    if r1 < 0:
        raise DomainError(f"r1 must be non-negative, got {r1!r}")
    up_mu0 = None if mu0 is None else upper_bound_mu0(d, mu0)
    raw_cheb = -d + r1 / math.sqrt(a)
    return BoundsReport(
        alpha=a,
        d=d,
        r1=r1,
        mu0=mu0,
        ln_beta_lower=lower_bound_ln_beta(d, a),
        ln_beta_upper_mu0=up_mu0,
        ln_beta_upper_cheb=min(0.0, raw_cheb),
        clamped_mu0=mu0 is not None and -d + mu0 >= 0.0,
        clamped_cheb=raw_cheb >= 0.0,
    )
