import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinbounds import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    LlrAtomDistribution,
    PoissonPiecewiseModel,
    beta_bruteforce,
    beta_curve,
    beta_exact,
    beta_mc,
    kl_closed_form,
    llr_atoms_under_p,
    lower_bound_ln_beta,
    r1_closed_form,
    upper_bound_chebyshev,
)
from steinbounds.errors import CapExceeded, TooFewSamples, ZeroCount
from steinbounds.selftest import random_pair


class TestBetaExact:
    def test_identical(self):
        op = beta_exact(LlrAtomDistribution([0.0], [1.0]), 0.3)
        assert op.ln_beta == pytest.approx(math.log(0.7), abs=1e-15)
        assert op.threshold == 0.0
        assert op.gamma == pytest.approx(0.7)

    def test_bernoulli(self, bernoulli):
        atoms = llr_atoms_under_p(bernoulli)
        assert beta_exact(atoms, 0.5).beta == pytest.approx(0.25, abs=1e-15)
        op = beta_exact(atoms, 0.25)
        assert op.beta == pytest.approx(0.625, abs=1e-15)
        assert op.gamma == pytest.approx(0.5)

    def test_neutrality_and_monotone(self):
        rng = np.random.default_rng(3)
        grid = np.linspace(0.005, 0.995, 100)
        for _ in range(25):
            atoms = llr_atoms_under_p(IidProductModel(random_pair(rng, 4), 3))
            b = np.array([beta_exact(atoms, a).beta for a in grid])
            assert np.all(b <= 1 - grid + 1e-12)
            assert np.all(np.diff(b) <= 1e-15)


class TestCurve:
    def test_identical(self):
        c = beta_curve(LlrAtomDistribution([0.0], [1.0]))
        assert c.alpha.tolist() == [0.0, 1.0]
        assert c.beta.tolist() == [1.0, 0.0]

    def test_bernoulli(self, bernoulli):
        c = beta_curve(llr_atoms_under_p(bernoulli))
        np.testing.assert_allclose(c.alpha, [0, 0.5, 1])
        np.testing.assert_allclose(c.beta, [1, 0.25, 0], atol=1e-15)

    def test_interpolation_reproduces_exact_and_convex(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            atoms = llr_atoms_under_p(IidProductModel(random_pair(rng, 3), 4))
            c = beta_curve(atoms)
            slopes = np.diff(c.beta) / np.diff(c.alpha)
            assert np.all(np.diff(slopes) >= -1e-9)
            for a in rng.uniform(0.001, 0.999, 20):
                assert c.interpolate(a) == pytest.approx(beta_exact(atoms, a).beta, abs=1e-12)


class TestBruteForce:
    def test_identical(self):
        pair = FiniteDistPair([0.5, 0.5], [0.5, 0.5])
        assert beta_bruteforce(pair, 1, 0.4) == pytest.approx(math.log(0.6), abs=1e-15)

    def test_bernoulli_n2(self, bernoulli):
        ex = beta_exact(llr_atoms_under_p(IidProductModel(bernoulli, 2)), 0.25).ln_beta
        assert abs(beta_bruteforce(bernoulli, 2, 0.25) - ex) <= 1e-12

    def test_cap(self, bernoulli):
        with pytest.raises(CapExceeded):
            beta_bruteforce(bernoulli, 13, 0.1)

    def test_three_symbol_sandwich(self):
        for seed in range(50):
            pair = random_pair(np.random.default_rng(seed), 3)
            m = IidProductModel(pair, 2)
            d, r1 = kl_closed_form(m), r1_closed_form(m)
            for a in (0.05, 0.25):
                lb = beta_bruteforce(pair, 2, a)
                assert lower_bound_ln_beta(d, a) <= lb + 1e-9
                assert lb <= upper_bound_chebyshev(d, r1, a) + 1e-9


@st.composite
def small_pair(draw):
    k = draw(st.integers(2, 4))
    p = np.array(draw(st.lists(st.floats(0.02, 1), min_size=k, max_size=k)))
    q = np.array(draw(st.lists(st.floats(0.02, 1), min_size=k, max_size=k)))
    return FiniteDistPair(p / p.sum(), q / q.sum())


@settings(max_examples=60, deadline=None)
@given(pair=small_pair(), n=st.integers(1, 3), alpha=st.floats(0.001, 0.999))
def test_bruteforce_equals_exact(pair, n, alpha):
    ex = beta_exact(llr_atoms_under_p(IidProductModel(pair, n)), alpha).ln_beta
    assert abs(beta_bruteforce(pair, n, alpha) - ex) <= 1e-9


class TestBetaMonteCarlo:
    def test_identical(self):
        est = beta_mc(GaussianScaleModel([1.0] * 5), 0.3, 10_000, 10_000, seed=1)
        # LLR is identically 0, so the randomized test hits beta = 1 - alpha exactly
        assert abs(math.exp(est.value) - 0.7) <= 4 * est.std_error * 0.7 + 1e-12

    def test_gaussian_sandwich(self):
        m = GaussianScaleModel([2.0] * 100)
        d, r1 = kl_closed_form(m), r1_closed_form(m)
        est = beta_mc(m, 0.25, 100_000, 100_000, seed=42)
        assert lower_bound_ln_beta(d, 0.25) - 4 * est.std_error <= est.value
        assert est.value <= upper_bound_chebyshev(d, r1, 0.25) + 4 * est.std_error

    def test_poisson_sandwich(self):
        m = PoissonPiecewiseModel.from_pieces([(10.0, 2.0, 1.0)])
        d, r1 = kl_closed_form(m), r1_closed_form(m)
        est = beta_mc(m, 0.1, 100_000, 100_000, seed=42)
        assert lower_bound_ln_beta(d, 0.1) - 4 * est.std_error <= est.value
        assert est.value <= upper_bound_chebyshev(d, r1, 0.1) + 4 * est.std_error

    def test_lattice_randomization_matches_exact(self, bernoulli):
        # a discrete model through the MC path: ties at t must be randomized
        m = IidProductModel(bernoulli, 8)
        exact = beta_exact(llr_atoms_under_p(m), 0.2).ln_beta
        est = beta_mc(m, 0.2, 200_000, 200_000, seed=7)
        assert abs(est.value - exact) <= 4 * est.std_error + 0.02

    def test_zero_count(self):
        with pytest.raises(ZeroCount) as info:
            beta_mc(GaussianScaleModel([8.0] * 200), 0.5, 1000, 1000, seed=0)
        assert info.value.upper_bound == pytest.approx(3e-3)

    def test_sample_minimums(self):
        m = GaussianScaleModel([2.0])
        with pytest.raises(TooFewSamples):
            beta_mc(m, 0.1, 999, 1000, seed=0)
        with pytest.raises(TooFewSamples):
            beta_mc(m, 0.1, 1000, 999, seed=0)
