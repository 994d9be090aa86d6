"""Experiment files, bound reports and scaling sweeps.

An experiment file is a JSON object::

    {
      "spec_version": 1,
      "family": "iid_discrete",
      "p": [0.5, 0.5], "q": [0.25, 0.75], "n": 10,
      "alphas": [0.05, 0.1],
      "sweep": {"n": [10, 20, 50]},
      "mc": {"n_samples": 100000, "seed": 42},
      "output": {"path": "out.csv", "format": "csv"}
    }

Family fields:

* ``iid_discrete``: ``p``, ``q``, ``n``
* ``independent_discrete``: ``components`` (list of ``{"p", "q"}``), optional ``repeat``
* ``gaussian_scale``: ``eigenvalues``, optional ``repeat``
* ``poisson_piecewise``: ``pieces`` (list of ``{"len", "p", "q"}``)

``sweep`` takes ``{"n": [...]}`` (sample count / replication factor) for the
first three families and ``{"T": [...]}`` (total observation time) for Poisson.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import bounds_report, check_alpha, mu0_exact, mu0_mc
from .divergence import kl_closed_form, r1_squared
from .errors import (
    DomainError,
    ExactUnavailable,
    InvalidModel,
    ParseError,
    ValidationError,
    ZeroCount,
)
from .models import (
    FiniteDistPair,
    GaussianScaleModel,
    IidProductModel,
    IndependentProductModel,
    PoissonPiecewiseModel,
    is_discrete,
    llr_atoms_under_p,
    scale_of,
)
from .np_oracle import beta_curve, beta_exact, beta_mc
from .rng import DEFAULT_SEED

SPEC_VERSION = 1
DEFAULT_ALPHAS = (0.01, 0.05, 0.1, 0.25, 0.5)
DEFAULT_SAMPLES = 100_000
SEED_ENV = "STEINBOUNDS_SEED"
SAMPLES_ENV = "STEINBOUNDS_SAMPLES"

FAMILIES = ("iid_discrete", "independent_discrete", "gaussian_scale", "poisson_piecewise")

CSV_COLUMNS = (
    "family",
    "scale",
    "alpha",
    "d",
    "r1",
    "mu0",
    "ln_beta_lower",
    "ln_beta_upper_mu0",
    "ln_beta_upper_cheb",
    "ln_beta_value",
    "value_kind",
    "value_stderr",
    "gap_per_sample",
    "condition_ratio",
    "clamped_mu0",
    "clamped_cheb",
    "seed",
)
SWEEP_EXTRA_COLUMNS = ("per_sample_exponent", "exponent_lo", "exponent_hi")


# --------------------------------------------------------------------------- #
# parsing
# --------------------------------------------------------------------------- #


@dataclass
class ExperimentSpec:
    family: str
    params: dict
    alphas: tuple
    sweep_key: Optional[str] = None
    sweep_values: tuple = ()
    mc_samples: Optional[int] = None
    mc_seed: Optional[int] = None
    output_path: Optional[str] = None
    output_format: str = "csv"
    spec_version: int = SPEC_VERSION
    base_model: object = field(default=None, repr=False)

    def model_at(self, scale=None):
        """The model at a sweep scale, or the base model when ``scale`` is None."""
        if scale is None:
            return self.base_model
        p = self.params
        if self.family == "iid_discrete":
            return IidProductModel(FiniteDistPair(p["p"], p["q"]), int(scale))
        if self.family == "independent_discrete":
            comps = [FiniteDistPair(c["p"], c["q"]) for c in p["components"]]
            return IndependentProductModel(comps * int(scale))
        if self.family == "gaussian_scale":
            return GaussianScaleModel(np.tile(np.asarray(p["eigenvalues"], float), int(scale)))
        return self.base_model.scaled_to(float(scale))

    def scales(self):
        return list(self.sweep_values) if self.sweep_key else [None]


def _get(obj, key, kind, where, required=True, default=None):
    if key not in obj:
        if required:
            raise ParseError("missing required field", field=f"{where}{key}")
        return default
    val = obj[key]
    ok = {
        "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "list": lambda v: isinstance(v, list),
        "object": lambda v: isinstance(v, dict),
        "str": lambda v: isinstance(v, str),
    }[kind](val)
    if not ok:
        raise ParseError(f"expected {kind}, got {type(val).__name__}", field=f"{where}{key}")
    return val


def _numbers(obj, key, where):
    vals = _get(obj, key, "list", where)
    for i, v in enumerate(vals):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ParseError("expected a number", field=f"{where}{key}[{i}]")
    return [float(v) for v in vals]


def _pair(obj, where):
    p = _numbers(obj, "p", where)
    q = _numbers(obj, "q", where)
    for name, vec in (("p", p), ("q", q)):
        if any(x <= 0 for x in vec):
            raise ValidationError(
                f"{where}{name}: every mass must be strictly positive "
                "(P and Q must be equivalent measures)"
            )
    try:
        return FiniteDistPair(p, q)
    except InvalidModel as exc:
        raise ValidationError(f"{where.rstrip('.') or 'model'}: {exc}") from exc


def parse_spec(text: str) -> ExperimentSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", line=1)

    version = _get(doc, "spec_version", "int", "")
    if version != SPEC_VERSION:
        raise ValidationError(f"unsupported spec_version {version}; expected {SPEC_VERSION}")
    family = _get(doc, "family", "str", "")
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")

    params = {}
    try:
        if family == "iid_discrete":
            base = _pair(doc, "")
            n = _get(doc, "n", "int", "", required=False, default=1)
            if n < 1:
                raise ValidationError("n must be a positive integer")
            params = {"p": base.p.tolist(), "q": base.q.tolist()}
            model = IidProductModel(base, n)
        elif family == "independent_discrete":
            comps_raw = _get(doc, "components", "list", "")
            if not comps_raw:
                raise ValidationError("components must be non-empty")
            comps = []
            for i, c in enumerate(comps_raw):
                if not isinstance(c, dict):
                    raise ParseError("expected object", field=f"components[{i}]")
                comps.append(_pair(c, f"components[{i}]."))
            repeat = _get(doc, "repeat", "int", "", required=False, default=1)
            if repeat < 1:
                raise ValidationError("repeat must be a positive integer")
            params = {"components": [{"p": c.p.tolist(), "q": c.q.tolist()} for c in comps]}
            model = IndependentProductModel(comps * repeat)
        elif family == "gaussian_scale":
            lam = _numbers(doc, "eigenvalues", "")
            repeat = _get(doc, "repeat", "int", "", required=False, default=1)
            if repeat < 1:
                raise ValidationError("repeat must be a positive integer")
            params = {"eigenvalues": lam}
            model = GaussianScaleModel(np.tile(lam, repeat))
        else:
            pieces_raw = _get(doc, "pieces", "list", "")
            pieces = []
            for i, pc in enumerate(pieces_raw):
                if not isinstance(pc, dict):
                    raise ParseError("expected object", field=f"pieces[{i}]")
                where = f"pieces[{i}]."
                pieces.append(
                    (
                        float(_get(pc, "len", "number", where)),
                        float(_get(pc, "p", "number", where)),
                        float(_get(pc, "q", "number", where)),
                    )
                )
            model = PoissonPiecewiseModel.from_pieces(pieces)
    except InvalidModel as exc:
        raise ValidationError(str(exc)) from exc

    alphas = doc.get("alphas")
    if alphas is None:
        alphas = list(DEFAULT_ALPHAS)
    else:
        alphas = _numbers(doc, "alphas", "")
        if not alphas:
            raise ValidationError("alphas must list at least one level")
    try:
        alphas = tuple(check_alpha(a) for a in alphas)
    except DomainError as exc:
        raise ValidationError(f"alphas: {exc}") from exc

    spec = ExperimentSpec(family, params, alphas, spec_version=version, base_model=model)

    sweep = _get(doc, "sweep", "object", "", required=False)
    if sweep is not None:
        allowed = "T" if family == "poisson_piecewise" else "n"
        if set(sweep) != {allowed}:
            raise ValidationError(f"sweep for {family} takes exactly one key {allowed!r}")
        vals = _numbers(sweep, allowed, "sweep.")
        if not vals:
            raise ValidationError("sweep list must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("sweep values must be strictly increasing")
        if any(v <= 0 for v in vals):
            raise ValidationError("sweep values must be positive")
        if allowed == "n":
            if any(v != int(v) for v in vals):
                raise ValidationError("sweep n values must be integers")
            vals = [int(v) for v in vals]
        spec.sweep_key = allowed
        spec.sweep_values = tuple(vals)

    mc = _get(doc, "mc", "object", "", required=False)
    if mc is not None:
        spec.mc_samples = _get(mc, "n_samples", "int", "mc.", required=False)
        spec.mc_seed = _get(mc, "seed", "int", "mc.", required=False)
        if spec.mc_samples is not None and spec.mc_samples < 2:
            raise ValidationError("mc.n_samples must be at least 2")
        if spec.mc_seed is not None and spec.mc_seed < 0:
            raise ValidationError("mc.seed must be non-negative")

    out = _get(doc, "output", "object", "", required=False)
    if out is not None:
        spec.output_path = _get(out, "path", "str", "output.", required=False)
        spec.output_format = _get(out, "format", "str", "output.", required=False, default="csv")
        if spec.output_format not in ("csv", "human"):
            raise ValidationError("output.format must be 'csv' or 'human'")
    return spec


def load_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# --------------------------------------------------------------------------- #
# computation
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class RunConfig:
    seed: int = DEFAULT_SEED
    n_samples: int = DEFAULT_SAMPLES
    jobs: int = 1


def resolve_config(spec: ExperimentSpec, seed=None, samples=None, jobs=1, env=None) -> RunConfig:
    """Flag beats spec file beats environment beats built-in default."""
    env = os.environ if env is None else env
    if seed is None:
        seed = spec.mc_seed
    if seed is None and env.get(SEED_ENV):
        seed = int(env[SEED_ENV])
    if samples is None:
        samples = spec.mc_samples
    if samples is None and env.get(SAMPLES_ENV):
        samples = int(env[SAMPLES_ENV])
    return RunConfig(
        DEFAULT_SEED if seed is None else int(seed),
        DEFAULT_SAMPLES if samples is None else int(samples),
        max(1, int(jobs)),
    )


@dataclass(frozen=True)
class SweepRow:
    family: str
    scale: float
    alpha: float
    d: float
    r1: float
    mu0: Optional[float]
    ln_beta_lower: float
    ln_beta_upper_mu0: Optional[float]
    ln_beta_upper_cheb: float
    ln_beta_value: float
    value_kind: str
    value_stderr: float
    gap_per_sample: float
    condition_ratio: Optional[float]
    clamped_mu0: bool
    clamped_cheb: bool
    seed: int
    per_sample_exponent: float
    exponent_lo: float
    exponent_hi: float


def _scale_rows(family, model, alphas, cfg: RunConfig, scale_idx: int, workers: int):
    scale = scale_of(model)
    d = kl_closed_form(model)
    r1sq = r1_squared(model)
    r1 = math.sqrt(r1sq)
    ratio = r1sq / d if d > 0 else None
    atoms = llr_atoms_under_p(model) if is_discrete(model) else None
    rows = []
    for ai, alpha in enumerate(alphas):
        stream = scale_idx * 1000 + ai * 2
        if atoms is not None:
            mu0 = mu0_exact(atoms, d, alpha)
            value = beta_exact(atoms, alpha).ln_beta
            kind, stderr = "exact", 0.0
        else:
            mu0 = mu0_mc(model, d, alpha, cfg.n_samples, cfg.seed, stream, workers)
            try:
                est = beta_mc(
                    model, alpha, cfg.n_samples, cfg.n_samples, cfg.seed, stream + 1, workers
                )
                value, kind, stderr = est.value, "mc", est.std_error
            except ZeroCount as exc:
                value, kind, stderr = math.log(exc.upper_bound), "mc_zero", 0.0
        rep = bounds_report(d, r1, alpha, mu0)
        rows.append(
            SweepRow(
                family=family,
                scale=scale,
                alpha=alpha,
                d=d,
                r1=r1,
                mu0=mu0,
                ln_beta_lower=rep.ln_beta_lower,
                ln_beta_upper_mu0=rep.ln_beta_upper_mu0,
                ln_beta_upper_cheb=rep.ln_beta_upper_cheb,
                ln_beta_value=value,
                value_kind=kind,
                value_stderr=stderr,
                gap_per_sample=abs(value + d) / scale,
                condition_ratio=ratio,
                clamped_mu0=rep.clamped_mu0,
                clamped_cheb=rep.clamped_cheb,
                seed=cfg.seed,
                per_sample_exponent=-value / scale,
                exponent_lo=-rep.best_upper / scale + 0.0,
                exponent_hi=-rep.ln_beta_lower / scale,
            )
        )
    return rows


def _run(spec: ExperimentSpec, cfg: RunConfig, scales):
    models = [spec.model_at(s) for s in scales]
    if len(models) == 1 or cfg.jobs == 1:
        # a single cell spends its parallelism on sample chunks instead
        return [
            r
            for i, m in enumerate(models)
            for r in _scale_rows(spec.family, m, spec.alphas, cfg, i, cfg.jobs)
        ]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [
            pool.submit(_scale_rows, spec.family, m, spec.alphas, cfg, i, 1)
            for i, m in enumerate(models)
        ]
        return [r for f in futures for r in f.result()]


def run_report(spec: ExperimentSpec, cfg: RunConfig = RunConfig()):
    """One row per alpha for the base model."""
    return _run(spec, cfg, [None])


def run_sweep(spec: ExperimentSpec, cfg: RunConfig = RunConfig()):
    if not spec.sweep_key:
        raise ValidationError("sweep requires a 'sweep' directive in the experiment file")
    return _run(spec, cfg, spec.scales())


def np_curve(spec: ExperimentSpec):
    model = spec.model_at(None)
    if not is_discrete(model):
        raise ExactUnavailable(f"np-curve needs a discrete family, not {spec.family}")
    return beta_curve(llr_atoms_under_p(model))


# --------------------------------------------------------------------------- #
# rendering
# --------------------------------------------------------------------------- #


def fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "" if math.isnan(x) else repr(x)
    return str(x)


def rows_to_csv(rows, sweep=False) -> str:
    cols = CSV_COLUMNS + (SWEEP_EXTRA_COLUMNS if sweep else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt_cell(getattr(r, c)) for c in cols])
    return buf.getvalue()


def rows_to_human(rows, sweep=False) -> str:
    cols = ["scale", "alpha", "d", "r1", "mu0", "lower", "upper_mu0", "upper_cheb", "ln_beta", "kind"]
    if sweep:
        cols += ["exponent", "window"]
    lines = []
    table = []
    for r in rows:
        cells = [
            f"{r.scale:g}",
            f"{r.alpha:g}",
            f"{r.d:.6f}",
            f"{r.r1:.6f}",
            "-" if r.mu0 is None else f"{r.mu0:.6f}",
            f"{r.ln_beta_lower:.6f}",
            "-" if r.ln_beta_upper_mu0 is None else f"{r.ln_beta_upper_mu0:.6f}"
            + ("*" if r.clamped_mu0 else ""),
            f"{r.ln_beta_upper_cheb:.6f}" + ("*" if r.clamped_cheb else ""),
            f"{r.ln_beta_value:.6f}"
            + (f" +/- {r.value_stderr:.2g}" if r.value_kind != "exact" else ""),
            r.value_kind,
        ]
        if sweep:
            cells += [
                f"{r.per_sample_exponent:.6f}",
                f"[{r.exponent_lo:.6f}, {r.exponent_hi:.6f}]",
            ]
        table.append(cells)
    widths = [max(len(c), *(len(t[i]) for t in table)) for i, c in enumerate(cols)]
    if rows:
        lines.append(f"family: {rows[0].family}   seed: {rows[0].seed}")
    lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for t in table:
        lines.append("  ".join(c.rjust(w) for c, w in zip(t, widths)))
    lines.append("(* = bound clamped at 0, vacuous)")
    return "\n".join(lines) + "\n"


def curve_to_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("alpha", "beta", "ln_beta"))
    for a, b, lb in zip(curve.alpha, curve.beta, curve.ln_beta):
        w.writerow((fmt_cell(a), fmt_cell(b), repr(float(lb))))
    return buf.getvalue()


def curve_to_human(curve) -> str:
    lines = [f"{'alpha':>22}  {'beta':>22}  {'ln_beta':>22}"]
    for a, b, lb in zip(curve.alpha, curve.beta, curve.ln_beta):
        lines.append(f"{a:22.15g}  {b:22.15g}  {lb:22.15g}")
    return "\n".join(lines) + "\n"


def read_csv_rows(text: str):
    """Parse emitted CSV back into dicts with numeric fields as floats."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            if k in ("family", "value_kind"):
                row[k] = v
            elif k in ("clamped_mu0", "clamped_cheb"):
                row[k] = v == "true"
            elif v == "":
                row[k] = None
            else:
                row[k] = float(v)
        out.append(row)
    return out
