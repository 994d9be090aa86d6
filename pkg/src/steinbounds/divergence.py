"""KL divergence D(P||Q) and the LLR dispersion r1, closed form and Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModel, InvalidModel, NumericalError, TooFewSamples
from .models import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    IndependentProductModel,
    PoissonPiecewiseModel,
    sample_llr,
)
from .rng import RngStream


@dataclass(frozen=True)
class LlrMoments:
    d: float
    r1: float

    @property
    def second_moment(self) -> float:
        return self.d * self.d + self.r1 * self.r1


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int
    stream: int


def _finite(x, what):
    if not np.isfinite(x):
        raise NumericalError(f"{what} is not finite ({x!r})")
    return float(x)


def _pair_kl(pair: FiniteDistPair) -> float:
    return float(np.dot(pair.p, pair.symbol_llr()))


def _pair_var(pair: FiniteDistPair) -> float:
    # centered form; avoids cancellation in E[llr^2] - D^2
    llr = pair.symbol_llr()
    return float(np.dot(pair.p, (llr - np.dot(pair.p, llr)) ** 2))


def kl_closed_form(model) -> float:
    if isinstance(model, FiniteDistPair):
        d = _pair_kl(model)
    elif isinstance(model, IidProductModel):
        d = model.n * _pair_kl(model.base)
    elif isinstance(model, IndependentProductModel):
        d = sum(_pair_kl(c) for c in model.components)
    elif isinstance(model, GaussianScaleModel):
        lam = model.eigenvalues
        d = 0.5 * float(np.sum(np.log(lam) + 1.0 / lam - 1.0))
    elif isinstance(model, PoissonPiecewiseModel):
        p, q, ell = model.p_rates, model.q_rates, model.lengths
        d = float(np.sum(ell * (p * model.piece_llr() - (p - q))))
    else:
        raise InvalidModel(f"unknown model type {type(model).__name__}")
    # rounding can leave a tiny negative value for nearly identical measures
    return max(0.0, _finite(d, "KL divergence"))


def r1_squared(model) -> float:
    """Variance of the LLR under P."""
    if isinstance(model, FiniteDistPair):
        v = _pair_var(model)
    elif isinstance(model, IidProductModel):
        v = model.n * _pair_var(model.base)
    elif isinstance(model, IndependentProductModel):
        v = sum(_pair_var(c) for c in model.components)
    elif isinstance(model, GaussianScaleModel):
        v = 0.5 * float(np.sum((1.0 / model.eigenvalues - 1.0) ** 2))
    elif isinstance(model, PoissonPiecewiseModel):
        v = float(np.sum(model.lengths * model.p_rates * model.piece_llr() ** 2))
    else:
        raise InvalidModel(f"unknown model type {type(model).__name__}")
    return max(0.0, _finite(v, "r1^2"))


def r1_closed_form(model) -> float:
    return float(np.sqrt(r1_squared(model)))


def moments(model) -> LlrMoments:
    return LlrMoments(kl_closed_form(model), r1_closed_form(model))


def condition_ratio(model) -> float:
    """Smallest C^2 with r1^2 <= C^2 * D, i.e. r1^2 / D."""
    d = kl_closed_form(model)
    if d <= 0.0:
        raise DegenerateModel("condition ratio undefined: D(P||Q) = 0")
    return r1_squared(model) / d


def _mc_estimate(x, stream: RngStream) -> McEstimate:
    n = x.size
    return McEstimate(
        value=float(np.mean(x)),
        std_error=float(np.std(x, ddof=1) / np.sqrt(n)),
        n_samples=n,
        seed=stream.seed,
        stream=stream.stream,
    )


def moments_mc(model, n_samples: int, seed: int, stream: int = 0, workers: int = 1):
    """Sample mean of the LLR and of its square under P, with standard errors."""
    if n_samples < 100:
        raise TooFewSamples(f"moments_mc needs at least 100 samples, got {n_samples}")
    rs = RngStream(seed, stream)
    x = sample_llr(model, True, rs, n_samples, workers)
    return _mc_estimate(x, rs), _mc_estimate(x * x, rs)
