"""Built-in invariant suites, runnable as ``steinbounds selftest``.

Random discrete models come from a fixed generator seed, so exact-mode checks
are identical run to run; ``seed`` only feeds the Monte Carlo suites.
"""

from __future__ import annotations

import io
import math
import sys
import time
from contextlib import ExitStack
from dataclasses import dataclass, field
from unittest import mock

import numpy as np

from . import bounds, harness, models, np_oracle
from .bounds import (
    binary_entropy,
    lower_bound_ln_beta,
    mu0_exact,
    threshold_test_eval,
    upper_bound_chebyshev,
    upper_bound_mu0,
)
from .divergence import kl_closed_form, moments_mc, r1_closed_form
from .models import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    IndependentProductModel,
    PoissonPiecewiseModel,
    convolve_atoms,
    llr_atoms_under_p,
)
from .np_oracle import beta_bruteforce, beta_curve, beta_exact
from .rng import DEFAULT_SEED

MODEL_SEED = 20_240_601
ALPHAS = (0.01, 0.05, 0.1, 0.25, 0.5)
TOL = 1e-9


def random_pair(rng, k) -> FiniteDistPair:
    p = rng.uniform(0.05, 1.0, k)
    q = rng.uniform(0.05, 1.0, k)
    return FiniteDistPair(p / p.sum(), q / q.sum())


def random_discrete_model(rng, max_k=6, max_n=8):
    """An i.i.d. product, or (one time in four) an independent product.

    Independent products keep at most 2**17 raw atoms so a suite of a few hundred stays quick.
    """
    k = int(rng.integers(2, max_k + 1))
    n = int(rng.integers(1, max_n + 1))
    if rng.random() < 0.25:
        sizes = rng.integers(2, k + 1, size=n)
        while np.prod(sizes.astype(float)) > 2**17:
            sizes[np.argmax(sizes)] -= 1
        return IndependentProductModel([random_pair(rng, int(s)) for s in sizes])
    return IidProductModel(random_pair(rng, k), n)


def random_gaussian(rng, n=32) -> GaussianScaleModel:
    return GaussianScaleModel(np.exp(rng.uniform(math.log(0.25), math.log(4.0), n)))


def random_poisson(rng, pieces=3) -> PoissonPiecewiseModel:
    return PoissonPiecewiseModel(
        rng.uniform(0.5, 3.0, pieces), rng.uniform(0.5, 4.0, pieces), rng.uniform(0.5, 4.0, pieces)
    )


def sandwich_violations(model, alphas=ALPHAS, tol=TOL):
    """Messages for every failed bound ordering on one discrete model."""
    bad = []
    atoms = llr_atoms_under_p(model)
    d = kl_closed_form(model)
    r1 = r1_closed_form(model)
    for a in alphas:
        ln_beta = beta_exact(atoms, a).ln_beta
        mu0 = mu0_exact(atoms, d, a)
        lo = lower_bound_ln_beta(d, a)
        up0 = upper_bound_mu0(d, mu0)
        upc = upper_bound_chebyshev(d, r1, a)
        if not lo <= ln_beta + tol:
            bad.append(f"alpha={a}: lower {lo} > ln beta {ln_beta}")
        if not ln_beta <= up0 + tol:
            bad.append(f"alpha={a}: ln beta {ln_beta} > mu0 bound {up0}")
        if not ln_beta <= upc + tol:
            bad.append(f"alpha={a}: ln beta {ln_beta} > Chebyshev bound {upc}")
        if not mu0 <= r1 / math.sqrt(a) + tol:
            bad.append(f"alpha={a}: mu0 {mu0} > r1/sqrt(alpha)")
    return bad


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    messages: list = field(default_factory=list)

    def check(self, cond, msg):
        if cond:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.messages) < 5:
                self.messages.append(msg)


@dataclass
class SelftestResult:
    suites: list

    @property
    def ok(self) -> bool:
        return all(s.failed == 0 for s in self.suites)


# --------------------------------------------------------------------------- #
# suites
# --------------------------------------------------------------------------- #


def _iid_q_law(model: IidProductModel):
    """Q-law of the LLR built straight from the model's q vector (no change of measure)."""
    base = model.base
    k = base.size
    counts = np.array(list(_compositions(model.n, k)))
    llr = counts @ base.symbol_llr()
    log_coef = math.lgamma(model.n + 1) - np.array(
        [sum(math.lgamma(c + 1) for c in row) for row in counts]
    )
    return llr, np.exp(log_coef + counts @ np.log(base.q))


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def suite_models(rng):
    s = SuiteResult("models")
    for _ in range(100):
        m = random_discrete_model(rng)
        atoms = llr_atoms_under_p(m)
        qm = models.q_masses(atoms)
        s.check(abs(atoms.p_masses.sum() - 1) <= TOL, "P-masses do not sum to 1")
        s.check(abs(qm.sum() - 1) <= TOL, "Q-masses do not sum to 1")
        s.check(
            abs(np.sum(qm * np.exp(atoms.values)) - 1) <= TOL, "change of measure does not invert"
        )
        if isinstance(m, IidProductModel) and m.n <= 4 and m.base.size <= 4:
            base = llr_atoms_under_p(m.base)
            acc = base
            for _ in range(m.n - 1):
                acc = convolve_atoms(acc, base)
            s.check(
                len(acc) == len(atoms)
                and np.allclose(acc.values, atoms.values, atol=1e-12)
                and np.allclose(acc.p_masses, atoms.p_masses, atol=1e-12),
                "i.i.d. enumeration differs from repeated convolution",
            )
        if isinstance(m, IidProductModel):
            llr, qlaw = _iid_q_law(m)
            # aggregate the direct Q-law per atom via the merged atom grid
            lookup = llr - 1e-9 * np.maximum(1, np.abs(llr))
            idx = np.clip(np.searchsorted(atoms.values, lookup), 0, len(atoms) - 1)
            agg = np.bincount(idx, weights=qlaw, minlength=len(atoms))
            s.check(np.allclose(agg, qm, atol=1e-12), "Q-masses disagree with the direct Q-law")
        if isinstance(m, IndependentProductModel):
            rev = IndependentProductModel(m.components[::-1])
            a2 = llr_atoms_under_p(rev)
            s.check(
                len(a2) == len(atoms) and np.allclose(a2.values, atoms.values, atol=1e-12),
                "component order changes the atoms",
            )
    return s


def suite_divergence(rng, seed):
    s = SuiteResult("divergence")
    for _ in range(40):
        m = random_discrete_model(rng)
        atoms = llr_atoms_under_p(m)
        d = kl_closed_form(m)
        r1 = r1_closed_form(m)
        s.check(d >= 0 and r1 >= 0, "negative moment")
        s.check(abs(atoms.mean() - d) <= TOL * max(1, d), "atom mean differs from closed-form D")
        second = float(np.dot(atoms.p_masses, atoms.values**2))
        s.check(abs(second - (d * d + r1 * r1)) <= TOL * max(1, second), "second moment mismatch")
    for i in range(20):
        for m in (random_gaussian(rng), random_poisson(rng)):
            dh, sh = moments_mc(m, 100_000, seed, stream=i)
            d, r1 = kl_closed_form(m), r1_closed_form(m)
            s.check(abs(dh.value - d) <= 4 * dh.std_error, f"MC mean off for {type(m).__name__}")
            s.check(
                abs(sh.value - (d * d + r1 * r1)) <= 4 * sh.std_error,
                f"MC second moment off for {type(m).__name__}",
            )
    return s


def suite_bounds(rng):
    s = SuiteResult("bounds")
    for _ in range(200):
        m = random_discrete_model(rng)
        bad = sandwich_violations(m)
        s.check(not bad, "; ".join(bad[:2]))
        atoms = llr_atoms_under_p(m)
        d = kl_closed_form(m)
        for mu in np.linspace(0.0, 3.0 * max(r1_closed_form(m), 0.1), 20):
            _, beta_mu = threshold_test_eval(atoms, mu, d=d)
            s.check(beta_mu <= math.exp(-d + mu) + 1e-12, f"beta_mu above exp(-d+mu) at mu={mu}")
        for a in ALPHAS:
            mu0 = mu0_exact(atoms, d, a)
            alpha_mu, _ = threshold_test_eval(atoms, mu0, d=d)
            s.check(alpha_mu <= a + TOL, f"alpha_mu0 {alpha_mu} exceeds alpha {a}")
    s.check(abs(binary_entropy(0.5) - math.log(2)) < 1e-15, "h(1/2) != ln 2")
    return s


def suite_oracle(rng):
    s = SuiteResult("np_oracle")
    for _ in range(100):
        k = int(rng.integers(2, 5))
        n = int(rng.integers(1, 4))
        pair = random_pair(rng, k)
        atoms = llr_atoms_under_p(IidProductModel(pair, n))
        for a in ALPHAS:
            bf = beta_bruteforce(pair, n, a)
            ex = beta_exact(atoms, a).ln_beta
            s.check(abs(bf - ex) <= TOL, f"brute force {bf} vs exact {ex}")
            s.check(math.exp(ex) <= 1 - a + 1e-12, "beta above 1 - alpha")
        curve = beta_curve(atoms)
        slopes = np.diff(curve.beta) / np.diff(curve.alpha)
        s.check(np.all(np.diff(slopes) >= -1e-9), "operating characteristic not convex")
    return s


def suite_determinism(seed):
    s = SuiteResult("determinism")
    text = (
        '{"spec_version": 1, "family": "gaussian_scale", "eigenvalues": [2.0], "repeat": 16,'
        ' "alphas": [0.25], "mc": {"n_samples": 5000}}'
    )
    spec = harness.parse_spec(text)
    cfg = harness.RunConfig(seed=seed, n_samples=5000)
    a = harness.rows_to_csv(harness.run_report(spec, cfg))
    b = harness.rows_to_csv(harness.run_report(spec, harness.RunConfig(seed, 5000, jobs=3)))
    s.check(a == b, "MC report depends on thread count or run")
    disc = harness.parse_spec(
        '{"spec_version": 1, "family": "iid_discrete", "p": [0.5, 0.5], "q": [0.25, 0.75], "n": 20}'
    )
    e1 = harness.rows_to_csv(harness.run_report(disc, harness.RunConfig(seed=seed)))
    e2 = harness.rows_to_csv(harness.run_report(disc, harness.RunConfig(seed=seed + 1)))
    strip = lambda t: [line.rsplit(",", 1)[0] for line in t.splitlines()]  # noqa: E731
    s.check(strip(e1) == strip(e2), "exact results depend on the seed")
    same = GaussianScaleModel([1.0, 1.0])
    s.check(kl_closed_form(same) == 0 and r1_closed_form(same) == 0, "P=Q moments not zero")
    return s


def _drop_q_factor(atoms):
    return atoms.p_masses.copy()


FAULTS = {"drop_q_factor": ("q_masses", _drop_q_factor)}


def run_selftest(seed=None, fault=None, out=None) -> SelftestResult:
    out = out or io.StringIO()
    seed = DEFAULT_SEED if seed is None else seed
    with ExitStack() as stack:
        if fault is not None:
            if fault not in FAULTS:
                raise ValueError(f"unknown fault {fault!r}")
            name, repl = FAULTS[fault]
            for mod in (models, bounds, np_oracle, sys.modules[__name__]):
                if hasattr(mod, name):
                    stack.enter_context(mock.patch.object(mod, name, repl))
        rng = np.random.default_rng(MODEL_SEED)
        suites = []
        for label, fn in (
            ("models", lambda: suite_models(rng)),
            ("divergence", lambda: suite_divergence(rng, seed)),
            ("bounds", lambda: suite_bounds(rng)),
            ("np_oracle", lambda: suite_oracle(rng)),
            ("determinism", lambda: suite_determinism(seed)),
        ):
            t0 = time.perf_counter()
            try:
                res = fn()
            except Exception as exc:  # a crash is a failed suite, not a crashed selftest
                res = SuiteResult(label, failed=1, messages=[f"{type(exc).__name__}: {exc}"])
            suites.append(res)
            status = "PASS" if res.failed == 0 else "FAIL"
            out.write(
                f"{status} {res.name:<12} {res.passed:5d} passed {res.failed:5d} failed"
                f"  ({time.perf_counter() - t0:.1f}s)\n"
            )
            for m in res.messages:
                out.write(f"    {m}\n")
    result = SelftestResult(suites)
    out.write("selftest " + ("passed\n" if result.ok else "FAILED\n"))
    return result
