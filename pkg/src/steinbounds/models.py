"""Hypothesis-pair families, exact LLR atom distributions and seeded LLR samplers.

Convention throughout: P is the null (H0) measure, Q the alternative, and
"LLR" is ln(dP/dQ) in nats. All families require strictly positive masses,
intensities and eigenvalues so that P and Q are mutually equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, lgamma
from typing import Union

import numpy as np

from . import kernels
from .errors import CapExceeded, InvalidModel, NumericalError
from .rng import RngStream, chunked

DEFAULT_CAP = 10_000_000
SUM_TOL = 1e-12
ATOM_SUM_TOL = 1e-9


def _prob_vector(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidModel(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{name} has non-finite entries")
    if np.any(arr <= 0):
        raise InvalidModel(
            f"{name} has a non-positive mass; P and Q must be equivalent (strictly positive masses)"
        )
    if abs(arr.sum() - 1.0) > SUM_TOL:
        raise InvalidModel(f"{name} sums to {arr.sum()!r}, not 1")
    return arr


@dataclass(frozen=True, eq=False)
class FiniteDistPair:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = _prob_vector(self.p, "p")
        q = _prob_vector(self.q, "q")
        if p.size != q.size:
            raise InvalidModel(f"p and q lengths differ ({p.size} vs {q.size})")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def size(self) -> int:
        return self.p.size

    def symbol_llr(self) -> np.ndarray:
        # difference of logs avoids overflow of p/q for extreme masses
        return np.log(self.p) - np.log(self.q)


@dataclass(frozen=True, eq=False)
class IidProductModel:
    base: FiniteDistPair
    n: int

    def __post_init__(self):
        if not isinstance(self.base, FiniteDistPair):
            raise InvalidModel("base must be a FiniteDistPair")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidModel(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True, eq=False)
class IndependentProductModel:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidModel("independent product needs at least one component")
        if not all(isinstance(c, FiniteDistPair) for c in comps):
            raise InvalidModel("every component must be a FiniteDistPair")
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True, eq=False)
class GaussianScaleModel:
    """H0: x_i ~ N(0, 1); H1: x_i ~ N(0, lambda_i), independent coordinates."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        if lam.ndim != 1 or lam.size < 1:
            raise InvalidModel("eigenvalues must be a non-empty 1-d vector")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidModel("eigenvalues must be finite and strictly positive")
        object.__setattr__(self, "eigenvalues", lam)


@dataclass(frozen=True, eq=False)
class PoissonPiecewiseModel:
    """Poisson process with piecewise-constant intensity p_k (H0) or q_k (H1) on pieces of length len_k."""

    lengths: np.ndarray
    p_rates: np.ndarray
    q_rates: np.ndarray

    def __post_init__(self):
        arrs = []
        for name in ("lengths", "p_rates", "q_rates"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 1 or a.size < 1:
                raise InvalidModel(f"{name} must be a non-empty 1-d vector")
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise InvalidModel(f"{name} must be finite and strictly positive")
            arrs.append(a)
        if not arrs[0].size == arrs[1].size == arrs[2].size:
            raise InvalidModel("lengths, p_rates and q_rates must have equal length")
        for name, a in zip(("lengths", "p_rates", "q_rates"), arrs):
            object.__setattr__(self, name, a)

    @classmethod
    def from_pieces(cls, pieces):
        pieces = list(pieces)
        if not pieces:
            raise InvalidModel("at least one piece is required")
        arr = np.asarray(pieces, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise InvalidModel("pieces must be (length, p, q) triples")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    @property
    def total_time(self) -> float:
        return float(self.lengths.sum())

    def scaled_to(self, total_time: float) -> "PoissonPiecewiseModel":
        return PoissonPiecewiseModel(
            self.lengths * (total_time / self.total_time), self.p_rates, self.q_rates
        )

    def piece_llr(self) -> np.ndarray:
        return np.log(self.p_rates) - np.log(self.q_rates)


DiscreteModel = Union[FiniteDistPair, IidProductModel, IndependentProductModel]
Model = Union[DiscreteModel, GaussianScaleModel, PoissonPiecewiseModel]

DISCRETE_TYPES = (FiniteDistPair, IidProductModel, IndependentProductModel)


def is_discrete(model) -> bool:
    return isinstance(model, DISCRETE_TYPES)


def scale_of(model) -> float:
    """Natural size parameter: sample count, coordinate count, or total time."""
    if isinstance(model, FiniteDistPair):
        return 1
    if isinstance(model, IidProductModel):
        return model.n
    if isinstance(model, IndependentProductModel):
        return len(model.components)
    if isinstance(model, GaussianScaleModel):
        return model.eigenvalues.size
    if isinstance(model, PoissonPiecewiseModel):
        return model.total_time
    raise InvalidModel(f"unknown model type {type(model).__name__}")


# --------------------------------------------------------------------------- #
# exact atoms
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class LlrAtomDistribution:
    """Exact law of the LLR under P: strictly ascending values with P-masses."""

    values: np.ndarray
    p_masses: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = np.asarray(self.p_masses, dtype=np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "p_masses", m)
        if v.ndim != 1 or v.shape != m.shape or v.size < 1:
            raise InvalidModel("atoms need matching non-empty value and mass vectors")
        if np.any(np.diff(v) <= 0):
            raise InvalidModel("atom values must be strictly increasing")
        if np.any(m <= 0):
            raise InvalidModel("atom masses must be positive")
        if abs(m.sum() - 1.0) > ATOM_SUM_TOL:
            raise InvalidModel(f"P-masses sum to {m.sum()!r}")
        if abs(q_masses(self).sum() - 1.0) > ATOM_SUM_TOL:
            raise InvalidModel("implied Q-masses do not sum to 1")

    @classmethod
    def from_unsorted(cls, values, masses, rtol=kernels.MERGE_RTOL):
        values = np.asarray(values, dtype=np.float64).ravel()
        masses = np.asarray(masses, dtype=np.float64).ravel()
        # atoms whose P-mass underflowed are dropped; fatal only if they held Q-mass
        keep = masses > 0
        dropped = not keep.all()
        values, masses = values[keep], masses[keep]
        order = np.argsort(values, kind="stable")
        v, m = kernels.merge_sorted(values[order], masses[order], rtol)
        try:
            return cls(v, m)
        except InvalidModel as exc:
            if dropped:
                raise NumericalError(
                    f"P-masses underflowed at extreme LLR values and the Q-law lost mass ({exc})"
                ) from exc
            raise

    def __len__(self):
        return self.values.size

    def mean(self) -> float:
        return float(np.dot(self.values, self.p_masses))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.p_masses)


def q_masses(atoms: LlrAtomDistribution) -> np.ndarray:
    """Q-mass of each atom, dQ = exp(-LLR) dP."""
    return np.exp(np.log(atoms.p_masses) - atoms.values)


def _pair_atoms(pair: FiniteDistPair) -> LlrAtomDistribution:
    return LlrAtomDistribution.from_unsorted(pair.symbol_llr(), pair.p)


def _iid_atoms(model: IidProductModel, cap: int) -> LlrAtomDistribution:
    base = _pair_atoms(model.base)
    k = len(base)
    n = model.n
    count = comb(n + k - 1, k - 1)
    if count > cap:
        raise CapExceeded(f"{count} count vectors exceed the enumeration cap {cap}")
    counts = kernels.compositions(n, k)
    log_fact = np.array([lgamma(i + 1) for i in range(n + 1)])
    log_mass = lgamma(n + 1) - log_fact[counts].sum(axis=1) + counts @ np.log(base.p_masses)
    values = counts @ base.values
    return LlrAtomDistribution.from_unsorted(values, np.exp(log_mass))


def convolve_atoms(a: LlrAtomDistribution, b: LlrAtomDistribution, cap: int = DEFAULT_CAP):
    """Law of the sum of independent LLRs with laws ``a`` and ``b``."""
    size = len(a) * len(b)
    if size > cap:
        raise CapExceeded(f"convolution would produce {size} atoms (cap {cap})")
    values = np.add.outer(a.values, b.values)
    masses = np.multiply.outer(a.p_masses, b.p_masses)
    return LlrAtomDistribution.from_unsorted(values, masses)


def llr_atoms_under_p(model: DiscreteModel, cap: int = DEFAULT_CAP) -> LlrAtomDistribution:
    if isinstance(model, FiniteDistPair):
        if model.size > cap:
            raise CapExceeded(f"{model.size} atoms exceed cap {cap}")
        return _pair_atoms(model)
    if isinstance(model, IidProductModel):
        return _iid_atoms(model, cap)
    if isinstance(model, IndependentProductModel):
        acc = _pair_atoms(model.components[0])
        for comp in model.components[1:]:
            acc = convolve_atoms(acc, _pair_atoms(comp), cap)
        return acc
    raise InvalidModel(f"exact LLR atoms are only available for discrete families, not {type(model).__name__}")


# --------------------------------------------------------------------------- #
# sampling
# --------------------------------------------------------------------------- #


def _draw_discrete(model, under_p):
    if isinstance(model, FiniteDistPair):
        llr = model.symbol_llr()
        probs = model.p if under_p else model.q

        def draw(gen, size):
            return llr[gen.choice(llr.size, size=size, p=probs)]

        return draw
    if isinstance(model, IidProductModel):
        llr = model.base.symbol_llr()
        probs = model.base.p if under_p else model.base.q

        def draw(gen, size):
            return gen.multinomial(model.n, probs, size=size) @ llr

        return draw
    comps = model.components

    def draw(gen, size):
        out = np.zeros(size)
        for c in comps:
            probs = c.p if under_p else c.q
            out += c.symbol_llr()[gen.choice(c.size, size=size, p=probs)]
        return out

    return draw


def _draw_gaussian(model: GaussianScaleModel, under_p):
    lam = model.eigenvalues
    coef = 0.5 * (1.0 / lam - 1.0)
    offset = 0.5 * float(np.sum(np.log(lam)))
    scale2 = np.ones_like(lam) if under_p else lam

    def draw(gen, size):
        xi = gen.standard_normal((size, lam.size))
        return offset + (xi * xi) @ (coef * scale2)

    return draw


def _draw_poisson(model: PoissonPiecewiseModel, under_p):
    llr = model.piece_llr()
    drift = float(np.sum((model.p_rates - model.q_rates) * model.lengths))
    mean_counts = (model.p_rates if under_p else model.q_rates) * model.lengths

    def draw(gen, size):
        counts = gen.poisson(mean_counts, size=(size, mean_counts.size))
        return counts @ llr - drift

    return draw


def sample_llr(model: Model, under_p: bool, stream: RngStream, count: int, workers: int = 1):
    """i.i.d. draws of ln(dP/dQ)(x) with x ~ P (``under_p``) or x ~ Q."""
    if int(count) != count or count < 1:
        raise InvalidModel(f"count must be a positive integer, got {count!r}")
    if is_discrete(model):
        draw = _draw_discrete(model, under_p)
    elif isinstance(model, GaussianScaleModel):
        draw = _draw_gaussian(model, under_p)
    elif isinstance(model, PoissonPiecewiseModel):
        draw = _draw_poisson(model, under_p)
    else:
        raise InvalidModel(f"unknown model type {type(model).__name__}")
    return chunked(draw, stream, int(count), workers)
