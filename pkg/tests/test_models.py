import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinbounds import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    IndependentProductModel,
    LlrAtomDistribution,
    PoissonPiecewiseModel,
    RngStream,
    kl_closed_form,
    llr_atoms_under_p,
    q_masses,
    sample_llr,
)
from steinbounds.errors import CapExceeded, InvalidModel, NumericalError
from steinbounds.models import convolve_atoms

# mpmath, 30 digits
LN_2_3 = -0.405465108108164381978013115464
LN_2 = 0.693147180559945309417232121458
GAUSS_D_LAMBDA2 = 0.0965735902799726547086160607291
GAUSS_Q_MEAN_LAMBDA2 = -0.153426409720027345291383939271


def _pairs(max_k=4):
    masses = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=max_k)

    @st.composite
    def build(draw):
        p = np.array(draw(masses))
        q = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=p.size, max_size=p.size)))
        return FiniteDistPair(p / p.sum(), q / q.sum())

    return build()


# ------------------------------------------------------------------ #
# construction
# ------------------------------------------------------------------ #


class TestValidation:
    def test_zero_mass_rejected(self):
        with pytest.raises(InvalidModel, match="positive"):
            FiniteDistPair([0.5, 0.5], [1.0, 0.0])

    def test_not_normalized(self):
        with pytest.raises(InvalidModel, match="sums"):
            FiniteDistPair([0.5, 0.6], [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(InvalidModel):
            FiniteDistPair([0.5, 0.5], [0.2, 0.3, 0.5])

    def test_iid_needs_positive_n(self, bernoulli):
        with pytest.raises(InvalidModel):
            IidProductModel(bernoulli, 0)

    def test_empty_product(self):
        with pytest.raises(InvalidModel):
            IndependentProductModel([])

    def test_gaussian_positive(self):
        with pytest.raises(InvalidModel):
            GaussianScaleModel([1.0, 0.0])

    def test_poisson_positive(self):
        with pytest.raises(InvalidModel):
            PoissonPiecewiseModel.from_pieces([(1.0, 2.0, -1.0)])

    def test_atoms_must_increase(self):
        with pytest.raises(InvalidModel):
            LlrAtomDistribution([0.1, 0.1], [0.5, 0.5])


# ------------------------------------------------------------------ #
# exact atoms
# ------------------------------------------------------------------ #


class TestAtoms:
    def test_identical_measures(self):
        atoms = llr_atoms_under_p(FiniteDistPair([0.5, 0.5], [0.5, 0.5]))
        assert atoms.values.tolist() == [0.0]
        assert atoms.p_masses.tolist() == [1.0]

    def test_bernoulli_pair(self, bernoulli):
        atoms = llr_atoms_under_p(bernoulli)
        np.testing.assert_allclose(atoms.values, [LN_2_3, LN_2], rtol=0, atol=1e-15)
        np.testing.assert_allclose(atoms.p_masses, [0.5, 0.5])

    def test_bernoulli_n2_bruteforce(self, bernoulli):
        atoms = llr_atoms_under_p(IidProductModel(bernoulli, 2))
        expected = {}
        for i in range(2):
            for j in range(2):
                v = math.log(bernoulli.p[i] * bernoulli.p[j] / (bernoulli.q[i] * bernoulli.q[j]))
                expected[round(v, 12)] = expected.get(round(v, 12), 0) + bernoulli.p[i] * bernoulli.p[j]
        keys = sorted(expected)
        np.testing.assert_allclose(atoms.values, keys, atol=1e-12)
        np.testing.assert_allclose(atoms.p_masses, [expected[k] for k in keys], atol=1e-15)
        np.testing.assert_allclose(atoms.values, [2 * LN_2_3, LN_2_3 + LN_2, 2 * LN_2], atol=1e-15)
        np.testing.assert_allclose(atoms.p_masses, [0.25, 0.5, 0.25])

    def test_equal_llr_symbols_merge(self):
        pair = FiniteDistPair([0.2, 0.3, 0.5], [0.1, 0.15, 0.75])
        atoms = llr_atoms_under_p(pair)
        assert len(atoms) == 2
        np.testing.assert_allclose(atoms.p_masses, [0.5, 0.5])

    def test_iid_collisions_merge(self):
        # symbol LLRs -v, 0, v make many count vectors collide
        pair = FiniteDistPair([0.25, 0.5, 0.25], [0.5, 0.25, 0.25])
        atoms = llr_atoms_under_p(IidProductModel(pair, 6))
        assert np.all(np.diff(atoms.values) > 0)
        assert abs(atoms.p_masses.sum() - 1) < 1e-12

    def test_cap(self, bernoulli):
        with pytest.raises(CapExceeded):
            llr_atoms_under_p(IidProductModel(bernoulli, 100), cap=50)
        rng = np.random.default_rng(0)
        comps = []
        for _ in range(6):
            p, q = rng.uniform(0.1, 1, 3), rng.uniform(0.1, 1, 3)
            comps.append(FiniteDistPair(p / p.sum(), q / q.sum()))
        with pytest.raises(CapExceeded):
            llr_atoms_under_p(IndependentProductModel(comps), cap=100)

    def test_continuous_has_no_atoms(self):
        with pytest.raises(InvalidModel):
            llr_atoms_under_p(GaussianScaleModel([2.0]))

    def test_q_masses_examples(self, bernoulli):
        assert q_masses(llr_atoms_under_p(FiniteDistPair([0.5, 0.5], [0.5, 0.5]))).tolist() == [1.0]
        np.testing.assert_allclose(q_masses(llr_atoms_under_p(bernoulli)), [0.75, 0.25], rtol=1e-15)

    def test_large_iid(self):
        pair = FiniteDistPair([0.2, 0.8], [0.6, 0.4])
        atoms = llr_atoms_under_p(IidProductModel(pair, 400))
        assert abs(atoms.p_masses.sum() - 1) < 1e-9
        assert abs(q_masses(atoms).sum() - 1) < 1e-9
        assert abs(atoms.mean() - kl_closed_form(IidProductModel(pair, 400))) < 1e-9 * 400

    def test_underflow_losing_q_mass_is_reported(self):
        pair = FiniteDistPair([0.01, 0.99], [0.9, 0.1])
        with pytest.raises(NumericalError, match="underflow"):
            llr_atoms_under_p(IidProductModel(pair, 400))


@settings(max_examples=60, deadline=None)
@given(pair=_pairs(), n=st.integers(1, 4))
def test_iid_equals_repeated_convolution(pair, n):
    atoms = llr_atoms_under_p(IidProductModel(pair, n))
    base = llr_atoms_under_p(pair)
    acc = base
    for _ in range(n - 1):
        acc = convolve_atoms(acc, base)
    assert len(acc) == len(atoms)
    np.testing.assert_allclose(acc.values, atoms.values, atol=1e-12)
    np.testing.assert_allclose(acc.p_masses, atoms.p_masses, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(pairs=st.lists(_pairs(3), min_size=1, max_size=4), data=st.data())
def test_normalization_and_permutation(pairs, data):
    model = IndependentProductModel(pairs)
    atoms = llr_atoms_under_p(model)
    assert abs(atoms.p_masses.sum() - 1) <= 1e-9
    assert abs(q_masses(atoms).sum() - 1) <= 1e-9
    assert abs(atoms.mean() - kl_closed_form(model)) <= 1e-9
    perm = data.draw(st.permutations(range(len(pairs))))
    other = llr_atoms_under_p(IndependentProductModel([pairs[i] for i in perm]))
    assert len(other) == len(atoms)
    np.testing.assert_allclose(other.values, atoms.values, atol=1e-12)
    np.testing.assert_allclose(other.p_masses, atoms.p_masses, atol=1e-12)


# ------------------------------------------------------------------ #
# sampling
# ------------------------------------------------------------------ #


class TestSampling:
    def test_gaussian_identity_is_zero(self):
        x = sample_llr(GaussianScaleModel([1.0]), True, RngStream(7), 1000)
        assert np.all(x == 0.0)
        x = sample_llr(GaussianScaleModel([1.0, 1.0]), False, RngStream(7), 1000)
        assert np.all(x == 0.0)

    def test_poisson_equal_rates_zero(self):
        m = PoissonPiecewiseModel.from_pieces([(1.0, 2.0, 2.0)])
        assert np.all(sample_llr(m, True, RngStream(3), 500) == 0.0)
        assert np.all(sample_llr(m, False, RngStream(3), 500) == 0.0)

    def test_gaussian_mean_under_p(self):
        x = sample_llr(GaussianScaleModel([2.0]), True, RngStream(42), 100_000)
        se = x.std(ddof=1) / np.sqrt(x.size)
        assert abs(x.mean() - GAUSS_D_LAMBDA2) <= 4 * se

    def test_gaussian_mean_under_q(self):
        x = sample_llr(GaussianScaleModel([2.0]), False, RngStream(42), 100_000)
        se = x.std(ddof=1) / np.sqrt(x.size)
        assert abs(x.mean() - GAUSS_Q_MEAN_LAMBDA2) <= 4 * se

    def test_discrete_sampler_matches_atoms(self, bernoulli):
        model = IidProductModel(bernoulli, 3)
        x = sample_llr(model, True, RngStream(1), 50_000)
        atoms = llr_atoms_under_p(model)
        idx = np.abs(x[:, None] - atoms.values[None, :]).argmin(axis=1)
        freq = np.bincount(idx, minlength=len(atoms)) / x.size
        se = np.sqrt(atoms.p_masses * (1 - atoms.p_masses) / x.size)
        assert np.all(np.abs(freq - atoms.p_masses) <= 4 * se)

    def test_discrete_sampler_under_q(self, bernoulli):
        model = IndependentProductModel([bernoulli, bernoulli])
        x = sample_llr(model, False, RngStream(1), 50_000)
        atoms = llr_atoms_under_p(model)
        idx = np.abs(x[:, None] - atoms.values[None, :]).argmin(axis=1)
        freq = np.bincount(idx, minlength=len(atoms)) / x.size
        qm = q_masses(atoms)
        assert np.all(np.abs(freq - qm) <= 4 * np.sqrt(qm * (1 - qm) / x.size))

    def test_deterministic_per_seed_and_stream(self):
        m = GaussianScaleModel([0.5, 2.0, 3.0])
        a = sample_llr(m, True, RngStream(5, 2), 70_000)
        b = sample_llr(m, True, RngStream(5, 2), 70_000)
        c = sample_llr(m, True, RngStream(5, 3), 70_000)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_workers_do_not_change_draws(self):
        m = PoissonPiecewiseModel.from_pieces([(1, 2, 1), (2, 0.5, 1.5)])
        a = sample_llr(m, False, RngStream(9), 200_000, workers=1)
        b = sample_llr(m, False, RngStream(9), 200_000, workers=4)
        assert np.array_equal(a, b)

    def test_count_must_be_positive(self):
        with pytest.raises(InvalidModel):
            sample_llr(GaussianScaleModel([2.0]), True, RngStream(0), 0)
