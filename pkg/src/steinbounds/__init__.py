"""Non-asymptotic bounds on the optimal type-II error of simple-vs-simple tests.

Lower bound from the KL divergence and binary entropy, upper bounds from the
LLR quantile offset mu0 and from Chebyshev's inequality, all checked against
an exact randomized Neyman-Pearson oracle (discrete models) or Monte Carlo
(Gaussian scale and piecewise Poisson models).
"""

from .bounds import (
    BoundsReport,
    binary_entropy,
    bounds_report,
    lower_bound_ln_beta,
    mu0_exact,
    mu0_mc,
    threshold_test_eval,
    upper_bound_chebyshev,
    upper_bound_mu0,
)
from .divergence import (
    LlrMoments,
    McEstimate,
    condition_ratio,
    kl_closed_form,
    moments,
    moments_mc,
    r1_closed_form,
)
from .models import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    IndependentProductModel,
    LlrAtomDistribution,
    PoissonPiecewiseModel,
    llr_atoms_under_p,
    q_masses,
    sample_llr,
)
from .np_oracle import OperatingPoint, beta_bruteforce, beta_curve, beta_exact, beta_mc
from .rng import RngStream

__version__ = "0.1.0"
