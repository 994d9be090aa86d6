"""Optimal type-II error beta(alpha) via the randomized Neyman-Pearson test.

The optimal level-alpha test rejects H0 on the lowest LLR values first,
randomizing on the single boundary atom so the type-I error is exactly alpha.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .bounds import check_alpha
from .divergence import McEstimate
from .errors import CapExceeded, TooFewSamples, ZeroCount
from .models import FiniteDistPair, LlrAtomDistribution, q_masses, sample_llr
from .rng import RngStream

BRUTEFORCE_CAP = 4096


@dataclass(frozen=True)
class OperatingPoint:
    alpha: float
    ln_beta: float
    threshold: float
    gamma: float  # probability of accepting H0 when LLR == threshold

    @property
    def beta(self) -> float:
        return math.exp(self.ln_beta)


def beta_exact(atoms: LlrAtomDistribution, alpha) -> OperatingPoint:
    a = check_alpha(alpha)
    j, gamma, beta = kernels.np_fill(atoms.p_masses, q_masses(atoms), a)
    return OperatingPoint(a, math.log(beta), float(atoms.values[j]), gamma)


@dataclass(frozen=True)
class OperatingCurve:
    """Vertices of the piecewise-linear, convex curve alpha -> beta(alpha)."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def ln_beta(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.beta)

    def interpolate(self, alpha) -> float:
        return float(np.interp(alpha, self.alpha, self.beta))


def beta_curve(atoms: LlrAtomDistribution) -> OperatingCurve:
    qm = q_masses(atoms)
    alpha = np.concatenate(([0.0], np.cumsum(atoms.p_masses)))
    beta = np.concatenate((np.cumsum(qm[::-1])[::-1], [0.0]))
    alpha[-1] = 1.0
    return OperatingCurve(alpha, beta)


def beta_bruteforce(pair: FiniteDistPair, n: int, alpha) -> float:
    """ln beta(alpha) by direct enumeration of all K**n outcomes of the product.

    Deliberately shares nothing with the atom pipeline: outcome probabilities
    are plain products, ties are grouped on the likelihood ratio, and the
    greedy fill runs on outcome space.
    """
    a = check_alpha(alpha)
    k = pair.size
    if k**n > BRUTEFORCE_CAP:
        raise CapExceeded(f"{k}**{n} outcomes exceed the brute-force cap {BRUTEFORCE_CAP}")
    outcomes = []
    for word in itertools.product(range(k), repeat=n):
        pw = math.prod(pair.p[i] for i in word)
        qw = math.prod(pair.q[i] for i in word)
        outcomes.append((math.log(pw) - math.log(qw), pw, qw))
    outcomes.sort(key=lambda t: t[0])

    groups = []
    for llr, pw, qw in outcomes:
        if groups and llr - groups[-1][0] <= 1e-12 * max(1.0, abs(groups[-1][0])):
            groups[-1][1] += pw
            groups[-1][2] += qw
        else:
            groups.append([llr, pw, qw])

    rejected_p = 0.0
    beta = 0.0
    boundary_seen = False
    for _, pw, qw in groups:
        if boundary_seen:
            beta += qw
        elif rejected_p + pw <= a:
            rejected_p += pw
        else:
            frac_rejected = (a - rejected_p) / pw
            beta += (1.0 - frac_rejected) * qw
            boundary_seen = True
    return math.log(beta)


def beta_mc(model, alpha, n_cal, n_eval, seed, stream=0, workers=1) -> McEstimate:
    """Monte Carlo ln beta(alpha) for a model without exact atoms.

    The threshold t is calibrated on ``n_cal`` LLR draws under P as a
    conservative alpha-quantile; ties at t (lattice LLRs) get the usual NP
    randomization, estimated from the calibration draws. beta is then the
    average acceptance weight over ``n_eval`` independent draws under Q.
    """
    a = check_alpha(alpha)
    need = math.ceil(100.0 / a)
    if n_cal < need:
        raise TooFewSamples(f"beta_mc at alpha={a} needs n_cal >= {need}, got {n_cal}")
    if n_eval < 1000:
        raise TooFewSamples(f"beta_mc needs n_eval >= 1000, got {n_eval}")
    rs = RngStream(seed, stream)
    cal = np.sort(sample_llr(model, True, rs.substream(0), n_cal, workers))
    t = cal[int(math.floor(a * n_cal))]
    below = np.searchsorted(cal, t, side="left") / n_cal
    at = np.searchsorted(cal, t, side="right") / n_cal - below
    reject_at_t = min(1.0, max(0.0, (a - below) / at))

    ev = sample_llr(model, False, rs.substream(1), n_eval, workers)
    weights = np.where(ev > t, 1.0, 0.0) + np.where(ev == t, 1.0 - reject_at_t, 0.0)
    beta_hat = float(weights.mean())
    if beta_hat <= 0.0:
        raise ZeroCount(n_eval)
    se = float(weights.std(ddof=1) / math.sqrt(n_eval))
    return McEstimate(math.log(beta_hat), se / beta_hat, n_eval, seed, stream)
