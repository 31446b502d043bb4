"""Simulation studies: scenarios, replicate execution, aggregation and reports.

A scenario fixes a family, the true parameter, the priors to compare, the
sample sizes and the number of replicates. Each replicate draws a dataset,
fits the MLE, runs one chain per prior and summarizes it against the
truth. Every random draw comes from a substream keyed on the scenario seed,
the sample size and the replicate index, so results do not depend on the
order or the process in which replicates run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dist import BaseDensity, Exponential, LocationScale, NormalLinReg, RegressionRow, SkewNormal3
from .errors import DomainError, InvalidStartError, ProprietyError, QuadratureError
from .infer import McmcConfig, make_log_posterior, mcmc_sample, mle_fit, predictive_density, summarize
from .prior import PRIOR_KINDS, check_propriety, make_prior
from .rng import substream

SIM_FAMILIES = ("normal_linreg", "skew_normal", "location_scale", "exponential")
GRID_POINTS = 401
METRICS = ("m_mean", "m_sd", "m_rmse", "coverage", "m_mle", "rmse_mle")


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    """One simulation study.

    For ``normal_linreg`` the truth is ``(beta_0, ..., beta_{p-1}, sigma)`` with
    ``beta_0`` the intercept; the remaining ``p - 1`` covariates are
    equicorrelated standard normals with correlation ``pairwise_corr``.
    ``fix_design`` reuses one design per sample size across replicates
    instead of redrawing it.
    """

    family: str
    truth: tuple
    priors: tuple
    sample_sizes: tuple
    replicates: int
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    seed: int | None = None
    pairwise_corr: float = 0.5
    fix_design: bool = False
    base: str = "normal"
    df: float | None = None
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "truth", tuple(float(v) for v in self.truth))
        object.__setattr__(self, "priors", tuple(self.priors))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if self.family not in SIM_FAMILIES:
            raise DomainError(f"unknown simulation family {self.family!r}; expected one of {SIM_FAMILIES}")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not self.priors:
            raise DomainError("at least one prior is required")
        for kind in self.priors:
            if kind not in PRIOR_KINDS:
                raise DomainError(f"unknown prior kind {kind!r}; expected one of {PRIOR_KINDS}")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise DomainError("sample sizes must be positive")
        if len(set(self.sample_sizes)) != len(self.sample_sizes):
            raise DomainError("sample sizes must be distinct")
        if self.family == "normal_linreg" and len(self.truth) < 2:
            raise DomainError("regression truth needs at least an intercept and sigma")
        self.model_for(np.ones((1, max(len(self.truth) - 1, 1)))).check_params(self.truth)

    @property
    def dim(self) -> int:
        return len(self.truth)

    def model_for(self, design=None):
        if self.family == "normal_linreg":
            return NormalLinReg(design)
        if self.family == "skew_normal":
            return SkewNormal3()
        if self.family == "location_scale":
            return LocationScale(BaseDensity(self.base, self.df))
        return Exponential()

    @property
    def param_names(self) -> tuple:
        if self.family == "normal_linreg":
            return tuple(f"beta_{k}" for k in range(self.dim - 1)) + ("sigma",)
        return self.model_for().param_names

    def to_json(self) -> dict:
        out = {
            "name": self.name, "family": self.family, "truth": list(self.truth),
            "priors": list(self.priors), "sample_sizes": list(self.sample_sizes),
            "replicates": self.replicates, "mcmc": self.mcmc.to_json(), "seed": self.seed,
        }
        if self.family == "normal_linreg":
            out.update(pairwise_corr=self.pairwise_corr, fix_design=self.fix_design)
        if self.family == "location_scale":
            out["base"] = self.base
            if self.df is not None:
                out["df"] = self.df
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        """Parse a scenario object; keys starting with ``_`` are comments and ignored."""
        if not isinstance(obj, dict):
            raise DomainError("scenario must be a JSON object")
        missing = [k for k in ("family", "truth", "priors", "sample_sizes", "replicates") if k not in obj]
        if missing:
            raise DomainError(f"scenario is missing {missing}")
        known = {"name", "family", "truth", "priors", "sample_sizes", "replicates", "mcmc", "seed",
                 "pairwise_corr", "fix_design", "base", "df"}
        extra = sorted(k for k in set(obj) - known if not k.startswith("_"))
        if extra:
            raise DomainError(f"unknown scenario keys {extra}")
        kw = {k: obj[k] for k in known if k in obj and k != "mcmc"}
        if "mcmc" in obj:
            kw["mcmc"] = McmcConfig.from_json(obj["mcmc"])
        return cls(**kw)

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


DESK_MCMC = McmcConfig(iterations=10000, burnin=5000, thinning=5)
FULL_MCMC = McmcConfig(iterations=30000, burnin=5000, thinning=25)
REGRESSION_TRUTH = (1.0, 0.0, 0.5, 1.0, 0.5)
SN_PRIORS = ("independence_wasserstein", "independence_jeffreys")


def preset(name: str, seed: int | None = 1) -> Scenario:
    """Named scenarios.

    ``desk_*`` presets use 50 replicates, ``n in {50, 250}`` and 10000
    iterations (1000 kept draws). ``full_*`` presets use 250 replicates,
    ``n in {50, 250, 500}`` and 30000 iterations (1000 kept draws).
    Skew-normal presets are ``*_sn1``, ``*_sn3`` and ``*_sn5`` for
    ``alpha = 1, 3, 5`` with ``mu = 10``, ``sigma = 1``.
    """
    scale, _, what = name.partition("_")
    if scale not in ("desk", "full"):
        raise DomainError(f"unknown preset {name!r}")
    reps, sizes, mcmc = (50, (50, 250), DESK_MCMC) if scale == "desk" else (250, (50, 250, 500), FULL_MCMC)
    if what == "regression":
        return Scenario("normal_linreg", REGRESSION_TRUTH, ("wasserstein",), sizes, reps, mcmc,
                        seed, name=name)
    if what in ("sn1", "sn3", "sn5"):
        alpha = float(what[2:])
        return Scenario("skew_normal", (10.0, 1.0, alpha), SN_PRIORS, sizes, reps, mcmc, seed, name=name)
    raise DomainError(f"unknown preset {name!r}")


PRESETS = tuple(f"{s}_{w}" for s in ("desk", "full") for w in ("regression", "sn1", "sn3", "sn5"))


def generate_design(n: int, p: int, corr: float, seed) -> np.ndarray:
    """``n x (p + 1)`` design: a column of ones, then ``p`` equicorrelated N(0, 1) covariates."""
    if n < 1 or p < 0:
        raise DomainError("need n >= 1 and p >= 0")
    lower = -1.0 / (p - 1) if p > 1 else -1.0
    if p and not (lower < corr < 1.0):
        raise DomainError(f"pairwise correlation must lie in ({lower:.4g}, 1), got {corr}")
    rng = np.random.default_rng(seed)
    cov = np.full((p, p), float(corr))
    np.fill_diagonal(cov, 1.0)
    z = rng.standard_normal((n, p))
    X = z @ np.linalg.cholesky(cov).T if p else z
    return np.column_stack([np.ones(n), X])


# ---------------------------------------------------------------------------
# one replicate


def _sn_moment_start(x):
    """Method-of-moments start for ``(mu, sigma, alpha)``."""
    m, s = float(np.mean(x)), float(np.std(x))
    g = float(np.mean((x - m) ** 3)) / s ** 3 if s > 0 else 0.0
    g = float(np.clip(g, -0.99, 0.99))
    r = np.cbrt(2.0 * g / (4.0 - math.pi))
    b = r / math.sqrt(1.0 + r * r)  # delta * sqrt(2 / pi)
    delta = float(np.clip(b / math.sqrt(2.0 / math.pi), -0.99, 0.99))
    omega = s / math.sqrt(1.0 - b * b)
    return np.array([m - omega * b, omega, delta / math.sqrt(1.0 - delta * delta)])


def _mle_and_start(scenario, model, data):
    """MLE plus a chain start and initial proposal scales."""
    n = data.size
    if scenario.family == "normal_linreg":
        X = model.design
        beta, *_ = np.linalg.lstsq(X, data, rcond=None)
        sigma = math.sqrt(float(np.sum((data - X @ beta) ** 2)) / n)
        mle = np.append(beta, sigma)
        se = sigma * np.sqrt(np.diag(np.linalg.inv(X.T @ X)))
        return mle, mle.copy(), np.append(se, 1.0 / math.sqrt(2.0 * n))
    if scenario.family == "skew_normal":
        start = _sn_moment_start(data)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = mle_fit(model, data, start)
        mle = fit.params
        init = mle.copy()
        if abs(init[2]) > 10.0:
            init = start
        sd = float(np.std(data))
        return mle, init, np.array([sd / math.sqrt(n), 1.0 / math.sqrt(2.0 * n), 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if scenario.family == "location_scale":
            fit = mle_fit(model, data, [float(np.median(data)), float(np.std(data)) or 1.0])
            scales = np.array([fit.params[1] / math.sqrt(n), 1.0 / math.sqrt(2.0 * n)])
        else:
            fit = mle_fit(model, data, [float(np.mean(data))])
            scales = np.array([1.0 / math.sqrt(n)])
    return fit.params, fit.params.copy(), scales


def _grid(scenario) -> np.ndarray:
    t = scenario.truth
    if scenario.family == "normal_linreg":
        centre, spread = t[0], t[-1]
    elif scenario.family == "exponential":
        return np.linspace(0.0, 25.0 * t[0], GRID_POINTS)[1:]
    else:
        centre, spread = t[0], t[1]
        if scenario.family == "location_scale" and scenario.base != "normal":
            spread *= 4.0
    return np.linspace(centre - 8.0 * spread, centre + 8.0 * spread, GRID_POINTS)


def _plot_model(scenario):
    """Univariate model whose pdf is plotted; regression uses ``x0 = (1, 0, ..., 0)``."""
    if scenario.family == "normal_linreg":
        x0 = np.zeros(scenario.dim - 1)
        x0[0] = 1.0
        return RegressionRow(row=x0)
    return scenario.model_for()


def _data_for(scenario, n, r):
    """Model and dataset for sample size ``n``, replicate ``r``."""
    seed = scenario.seed
    if scenario.family == "normal_linreg":
        key = (n,) if scenario.fix_design else (n, r)
        X = generate_design(n, scenario.dim - 2, scenario.pairwise_corr, substream(seed, "design", *key))
        model = NormalLinReg(X)
    else:
        model = scenario.model_for()
    data = model.sample(scenario.truth, n, np.random.default_rng(substream(seed, "data", n, r)))
    return model, data


def run_replicate(scenario: Scenario, n: int, r: int) -> dict:
    """Run replicate ``r`` at sample size ``n``.

    Returns a dict with the MLE, one :class:`~wprior.infer.PosteriorSummary`
    (or ``None`` on failure) per prior, and predictive densities on the plot
    grid.
    """
    model, data = _data_for(scenario, n, r)
    grid = _grid(scenario)
    pmodel = _plot_model(scenario)
    out = {"n": n, "replicate": r, "mle": None, "summaries": {}, "pred": {}, "pdf_mle": None,
           "failures": {}}
    try:
        mle, init, scales = _mle_and_start(scenario, model, data)
    except (DomainError, QuadratureError, ArithmeticError, ValueError) as exc:
        out["failures"] = {kind: f"MLE failed: {exc}" for kind in scenario.priors}
        return out
    if not np.all(np.isfinite(mle)):
        out["failures"] = {kind: "MLE is not finite" for kind in scenario.priors}
        return out
    out["mle"] = mle
    out["pdf_mle"] = pmodel.pdf(mle, grid)
    config = scenario.mcmc if scenario.mcmc.initial_scale is not None else replace(
        scenario.mcmc, initial_scale=tuple(float(s) for s in scales))
    for k, kind in enumerate(scenario.priors):
        prior = make_prior(kind, model)
        log_post = make_log_posterior(model, prior, data)
        seed = substream(scenario.seed, "mcmc", n, r, k)
        try:
            chain = mcmc_sample(log_post, init, config, np.random.default_rng(seed),
                                positive=model.positive_indices(), param_names=model.param_names)
        except (InvalidStartError, DomainError, FloatingPointError) as exc:
            out["failures"][kind] = f"MCMC failed: {exc}"
            continue
        if len(chain) == 0 or not np.all(np.isfinite(chain.draws)):
            out["failures"][kind] = "chain has no finite draws"
            continue
        out["summaries"][kind] = summarize(chain, scenario.truth)
        out["pred"][kind] = predictive_density(chain, pmodel, grid)
    return out


def _replicate_task(args):
    scenario_json, n, r = args
    return run_replicate(Scenario.from_json(scenario_json), n, r)


# ---------------------------------------------------------------------------
# aggregation and reports


@dataclass(frozen=True)
class ReportRow:
    prior: str
    n: int
    parameter: str
    m_mean: float
    m_sd: float
    m_rmse: float
    coverage: float
    m_mle: float
    rmse_mle: float
    replicates: int
    excluded: int


@dataclass(frozen=True)
class ScenarioReport:
    """Aggregated results; ``plots`` maps ``(prior, n)`` to ``(x, pdf_true, pdf_pred, pdf_mle)``."""

    name: str
    rows: tuple
    plots: dict = field(default_factory=dict, compare=False)

    def excluded(self) -> dict:
        return {(r.prior, r.n): r.excluded for r in self.rows}

    def row(self, prior: str, n: int, parameter: str) -> ReportRow:
        for r in self.rows:
            if (r.prior, r.n, r.parameter) == (prior, n, parameter):
                return r
        raise KeyError((prior, n, parameter))


def aggregate(per_replicate: Sequence[tuple], truth) -> dict:
    """Fold ``(PosteriorSummary, mle_params)`` pairs into per-parameter metrics.

    Means of posterior means, sds and RMSEs; coverage of the credible
    intervals; mean and RMSE of the MLEs. Returns a dict of arrays keyed by
    the metric names in :data:`METRICS`.
    """
    if not per_replicate:
        raise DomainError("nothing to aggregate")
    truth = np.asarray(truth, dtype=float).reshape(-1)
    means = np.array([s.mean for s, _ in per_replicate])
    sds = np.array([s.sd for s, _ in per_replicate])
    rmses = np.array([s.rmse if s.rmse is not None else np.sqrt((s.mean - truth) ** 2)
                      for s, _ in per_replicate])
    cover = np.array([s.covers(truth) for s, _ in per_replicate], dtype=float)
    mles = np.array([np.asarray(m, dtype=float) for _, m in per_replicate])
    return {
        "m_mean": means.mean(axis=0), "m_sd": sds.mean(axis=0), "m_rmse": rmses.mean(axis=0),
        "coverage": cover.mean(axis=0), "m_mle": mles.mean(axis=0),
        "rmse_mle": np.sqrt(np.mean((mles - truth) ** 2, axis=0)),
    }


def _true_pdf(scenario, grid):
    pmodel = _plot_model(scenario)
    return pmodel.pdf(scenario.truth, grid)


def run_scenario(scenario: Scenario, progress: Callable[[dict], None] | None = None,
                 workers: int = 1) -> ScenarioReport:
    """Run every replicate of ``scenario`` and aggregate.

    The propriety conditions are checked on a probe dataset for each sample
    size before anything runs; if they fail a :class:`ProprietyError` is
    raised. Replicates whose MLE or chain fails are excluded from that
    prior's metrics and counted. ``workers > 1`` runs replicates in a
    process pool; results are folded in replicate order either way.
    ``progress``, if given, receives one dict per finished replicate.
    """
    if scenario.seed is None:
        raise DomainError("scenario needs an explicit seed")
    for n in scenario.sample_sizes:
        model, data = _data_for(scenario, n, 0)
        for kind in scenario.priors:
            verdict = check_propriety(model, kind, data)
            if not verdict.proper:
                raise ProprietyError(verdict)

    tasks = [(n, r) for n in scenario.sample_sizes for r in range(scenario.replicates)]
    results = []
    if workers > 1:
        payload = scenario.to_json()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (n, r), res in zip(tasks, pool.map(_replicate_task, [(payload, n, r) for n, r in tasks])):
                results.append(res)
                if progress is not None:
                    progress({"n": n, "replicate": r, "failures": res["failures"]})
    else:
        for n, r in tasks:
            res = run_replicate(scenario, n, r)
            results.append(res)
            if progress is not None:
                progress({"n": n, "replicate": r, "failures": res["failures"]})

    grid = _grid(scenario)
    pdf_true = _true_pdf(scenario, grid)
    names = scenario.param_names
    rows, plots = [], {}
    for n in scenario.sample_sizes:
        at_n = [res for res in results if res["n"] == n]
        mle_ok = [res for res in at_n if res["mle"] is not None]
        truth = np.asarray(scenario.truth)
        if mle_ok:
            # MLE metrics depend only on the data: one value per n, shared by all priors
            mles = np.array([res["mle"] for res in mle_ok])
            m_mle, rmse_mle = mles.mean(axis=0), np.sqrt(np.mean((mles - truth) ** 2, axis=0))
            pdf_mle = np.mean([res["pdf_mle"] for res in mle_ok], axis=0)
        else:
            m_mle = rmse_mle = np.full(scenario.dim, np.nan)
            pdf_mle = np.full(grid.shape, np.nan)
        for kind in scenario.priors:
            ok = [res for res in at_n if kind in res["summaries"]]
            excluded = len(at_n) - len(ok)
            if ok:
                agg = aggregate([(res["summaries"][kind], res["mle"]) for res in ok], truth)
                pred = np.mean([res["pred"][kind] for res in ok], axis=0)
            else:
                agg = {m: np.full(scenario.dim, np.nan) for m in METRICS}
                pred = np.full(grid.shape, np.nan)
            agg["m_mle"], agg["rmse_mle"] = m_mle, rmse_mle
            for j, pname in enumerate(names):
                rows.append(ReportRow(kind, n, pname, *(float(agg[m][j]) for m in METRICS),
                                      len(ok), excluded))
            plots[(kind, n)] = (grid, pdf_true, pred, pdf_mle)
    return ScenarioReport(scenario.name, tuple(rows), plots)


# ---------------------------------------------------------------------------
# output


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


CSV_COLUMNS = ("prior", "n", "parameter") + METRICS + ("replicates", "excluded")


def report_csv(report: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.prior, r.n, r.parameter] + [repr(getattr(r, m)) for m in METRICS]
                   + [r.replicates, r.excluded])
    return buf.getvalue()


def read_report_csv(path, name: str = "scenario") -> ScenarioReport:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise DomainError(f"unexpected report columns {reader.fieldnames}")
        rows = tuple(
            ReportRow(d["prior"], int(d["n"]), d["parameter"], *(float(d[m]) for m in METRICS),
                      int(d["replicates"]), int(d["excluded"]))
            for d in reader
        )
    return ScenarioReport(name, rows)


def report_markdown(report: ScenarioReport) -> str:
    """Table grouped by sample size, one line per (prior, n, parameter).

    The MLE columns depend only on the data, so they are printed in the
    first prior block of each sample size and left blank elsewhere.
    """
    head = ["n", "prior", "parameter", "mMean", "mSD", "mRMSE", "Coverage", "mMLE", "RMSE-MLE"]
    lines = [f"## {report.name}", "", "| " + " | ".join(head) + " |",
             "|" + "|".join(["---"] * len(head)) + "|"]
    first_prior = {}
    for r in report.rows:
        first_prior.setdefault(r.n, r.prior)
    for r in sorted(report.rows, key=lambda r: r.n):
        show_mle = r.prior == first_prior[r.n]
        cells = [str(r.n), r.prior, r.parameter, f"{r.m_mean:.3f}", f"{r.m_sd:.3f}",
                 f"{r.m_rmse:.3f}", f"{r.coverage:.3f}",
                 f"{r.m_mle:.3f}" if show_mle else "", f"{r.rmse_mle:.3f}" if show_mle else ""]
        lines.append("| " + " | ".join(cells) + " |")
    excluded = {(r.prior, r.n): r.excluded for r in report.rows if r.excluded}
    if excluded:
        lines.append("")
        lines.append("Excluded replicates: " + ", ".join(f"{p} n={n}: {c}" for (p, n), c in excluded.items()))
    return "\n".join(lines) + "\n"


def plotdata_csv(x, pdf_true, pdf_pred, pdf_mle) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "pdf_true", "pdf_pred", "pdf_mle"))
    for row in zip(x, pdf_true, pdf_pred, pdf_mle):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


REPORT_FORMATS = ("csv", "markdown", "plotdata")


def emit_report(report: ScenarioReport, fmt: str, outdir) -> list[str]:
    """Write ``report`` in format ``fmt`` under ``outdir``; returns the written paths.

    ``csv`` writes ``report.csv``, ``markdown`` writes ``report.md`` and
    ``plotdata`` writes ``plot_<prior>_n<n>.csv`` per (prior, n).
    """
    if fmt not in REPORT_FORMATS:
        raise DomainError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
    if not report.rows:
        raise DomainError("report is empty")
    outdir = os.fspath(outdir)
    os.makedirs(outdir, exist_ok=True)
    if fmt == "csv":
        path = os.path.join(outdir, "report.csv")
        atomic_write_text(path, report_csv(report))
        return [path]
    if fmt == "markdown":
        path = os.path.join(outdir, "report.md")
        atomic_write_text(path, report_markdown(report))
        return [path]
    if not report.plots:
        raise DomainError("report carries no plot data")
    paths = []
    for (kind, n), cols in report.plots.items():
        path = os.path.join(outdir, f"plot_{kind}_n{n}.csv")
        atomic_write_text(path, plotdata_csv(*cols))
        paths.append(path)
    return paths
