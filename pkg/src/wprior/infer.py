"""Log posteriors, maximum likelihood, adaptive random-walk MCMC and chain summaries."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .dist import NormalLinReg, ParametricModel
from .errors import DomainError, InvalidStartError
from .prior import PriorSpec
from .rng import as_generator


def log_likelihood(model: ParametricModel, data, params) -> float:
    if not model.in_space(params):
        return -math.inf
    with np.errstate(divide="ignore"):
        return float(np.sum(model.logpdf(params, data)))


def log_posterior(model: ParametricModel, prior: PriorSpec, data, params) -> float:
    """Sum of log densities plus the log prior; ``-inf`` outside the support."""
    return make_log_posterior(model, prior, data)(np.asarray(params, dtype=float))


def make_log_posterior(model: ParametricModel, prior: PriorSpec, data) -> Callable[[np.ndarray], float]:
    """Closure ``theta -> log posterior`` for repeated evaluation."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise DomainError("data must be nonempty")
    loglik = model.loglik_fn(data)

    def logpost(theta):
        ll = loglik(theta)
        if not math.isfinite(ll):
            return -math.inf
        lp = prior(theta)
        if not math.isfinite(lp):
            return -math.inf
        return ll + lp

    return logpost


# ---------------------------------------------------------------------------
# maximum likelihood


@dataclass(frozen=True)
class MleFit:
    params: np.ndarray
    loglik: float
    converged: bool
    evaluations: int


def _to_internal(theta, positive):
    eta = np.array(theta, dtype=float)
    for i in positive:
        eta[i] = math.log(eta[i])
    return eta


def _to_natural(eta, positive):
    theta = np.array(eta, dtype=float)
    for i in positive:
        theta[i] = math.exp(theta[i])
    return theta


def mle_fit(model: ParametricModel, data, init, *, xatol: float = 1e-8,
            max_evals: int = 20000, restarts: int = 4) -> MleFit:
    """Nelder-Mead maximisation of the log-likelihood.

    Positive parameters are optimised on the log scale. The search is
    restarted from its own optimum until a restart no longer improves the
    objective, which guards against premature simplex collapse.
    """
    data = np.asarray(data, dtype=float)
    try:
        theta0 = model.check_params(init)
    except DomainError as exc:
        raise DomainError(f"invalid MLE start: {exc}") from exc
    if data.size < model.dim and not isinstance(model, NormalLinReg):
        raise DomainError(f"need at least {model.dim} observations, got {data.size}")
    positive = model.positive_indices()
    loglik = model.loglik_fn(data)

    def negll(eta):
        theta = _to_natural(eta, positive)
        v = -loglik(theta)
        return v if math.isfinite(v) else 1e300

    eta = _to_internal(theta0, positive)
    best = negll(eta)
    used = 0
    converged = False
    for _ in range(restarts + 1):
        res = optimize.minimize(
            negll, eta, method="Nelder-Mead",
            options={"xatol": xatol, "fatol": 1e-12, "maxfev": max(max_evals - used, 50),
                     "adaptive": model.dim > 2},
        )
        used += res.nfev
        improved = res.fun < best - 1e-12 * max(1.0, abs(best))
        if res.fun <= best:
            eta, best = res.x, res.fun
        converged = bool(res.success)
        if not improved or used >= max_evals:
            break
    if not converged:
        warnings.warn("Nelder-Mead did not converge; returning the best point found", RuntimeWarning)
    return MleFit(_to_natural(eta, positive), -best, converged, used)


# ---------------------------------------------------------------------------
# MCMC


@dataclass(frozen=True)
class McmcConfig:
    """Random-walk Metropolis settings. ``target_accept=None`` picks 0.44 (d=1) or 0.234."""

    iterations: int = 30000
    burnin: int = 5000
    thinning: int = 25
    target_accept: float | None = None
    initial_scale: Sequence[float] | None = None

    def __post_init__(self):
        if not (0 <= self.burnin < self.iterations):
            raise DomainError("need 0 <= burnin < iterations")
        if self.thinning < 1:
            raise DomainError("thinning must be >= 1")
        if self.target_accept is not None and not 0 < self.target_accept < 1:
            raise DomainError("target_accept must lie in (0, 1)")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burnin) // self.thinning

    def target_for(self, d: int) -> float:
        if self.target_accept is not None:
            return self.target_accept
        return 0.44 if d == 1 else 0.234

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations, "burnin": self.burnin, "thinning": self.thinning,
            "target_accept": self.target_accept,
            "initial_scale": None if self.initial_scale is None else list(self.initial_scale),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "McmcConfig":
        return cls(**{k: obj[k] for k in ("iterations", "burnin", "thinning", "target_accept",
                                          "initial_scale") if k in obj})


@dataclass(frozen=True)
class Chain:
    draws: np.ndarray
    accept_rate: float
    seed: object
    config: McmcConfig
    scale_trace: np.ndarray
    param_names: tuple = ()
    component_accept: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return self.draws.shape[0]

    def to_csv(self, path=None) -> str:
        names = self.param_names or tuple(f"theta_{i + 1}" for i in range(self.draws.shape[1]))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for row in self.draws:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def read_chain_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return tuple(rows[0]), np.array(rows[1:], dtype=float)


def mcmc_sample(log_post: Callable[[np.ndarray], float], init, config: McmcConfig, seed, *,
                positive: Sequence[int] = (), param_names: Sequence[str] = ()) -> Chain:
    """Componentwise Gaussian random-walk Metropolis with Robbins-Monro scale adaptation.

    Each iteration updates every coordinate in turn. Scales adapt on the log
    scale during burn-in only and are frozen afterwards. Indices in
    ``positive`` are sampled as ``log theta_i`` with the Jacobian included.
    """
    theta0 = np.asarray(init, dtype=float).reshape(-1)
    d = theta0.size
    positive = tuple(positive)
    if any(theta0[i] <= 0 for i in positive):
        raise InvalidStartError("positive parameters must start above zero")
    lp0 = log_post(theta0)
    if not math.isfinite(lp0):
        raise InvalidStartError(f"log posterior is not finite at the start {theta0.tolist()}")

    def target(eta):
        theta = eta.copy()
        jac = 0.0
        for i in positive:
            if eta[i] > 700.0:
                return -math.inf
            jac += eta[i]
            theta[i] = math.exp(eta[i])
        v = log_post(theta)
        return v + jac if math.isfinite(v) else -math.inf

    rng = as_generator(seed)
    eta = _to_internal(theta0, positive)
    lp = target(eta)
    if config.initial_scale is None:
        log_scale = np.log(np.full(d, 0.5))
    else:
        s = np.asarray(config.initial_scale, dtype=float)
        if s.size != d or np.any(s <= 0):
            raise DomainError("initial_scale must have one positive entry per parameter")
        log_scale = np.log(s)
    goal = config.target_for(d)

    n_iter, burn, thin = config.iterations, config.burnin, config.thinning
    steps = rng.standard_normal((n_iter, d))
    log_u = np.log(rng.uniform(size=(n_iter, d)))
    kept = np.empty((config.kept, d))
    trace = np.empty((n_iter, d))
    accepted = np.zeros(d)
    n_kept = 0
    scale = np.exp(log_scale)
    for t in range(n_iter):
        adapting = t < burn
        gain = (t + 1) ** -0.6 if adapting else 0.0
        for j in range(d):
            prop = eta.copy()
            prop[j] += scale[j] * steps[t, j]
            lp_prop = target(prop)
            acc_prob = math.exp(min(0.0, lp_prop - lp)) if math.isfinite(lp_prop) else 0.0
            if log_u[t, j] < lp_prop - lp:
                eta, lp = prop, lp_prop
                if not adapting:
                    accepted[j] += 1
            if adapting:
                log_scale[j] += gain * (acc_prob - goal)
                scale[j] = math.exp(log_scale[j])
        trace[t] = scale
        if t >= burn and (t - burn + 1) % thin == 0 and n_kept < kept.shape[0]:
            kept[n_kept] = _to_natural(eta, positive)
            n_kept += 1
    post = max(n_iter - burn, 1)
    comp = accepted / post
    return Chain(kept[:n_kept], float(comp.mean()), seed, config, trace, tuple(param_names), comp)


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    sd: np.ndarray
    cred_lo: np.ndarray
    cred_hi: np.ndarray
    rmse: np.ndarray | None = None

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.cred_lo <= truth) & (truth <= self.cred_hi)

    def to_json(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in ("mean", "sd", "cred_lo", "cred_hi")}
        if self.rmse is not None:
            out["rmse"] = self.rmse.tolist()
        return out


def summarize(chain: Chain | np.ndarray, truth=None, level: float = 0.95) -> PosteriorSummary:
    """Means, sds (ddof 1), equal-tailed intervals (linear interpolation) and RMSE vs truth."""
    draws = chain.draws if isinstance(chain, Chain) else np.asarray(chain, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] == 0:
        raise DomainError("chain is empty")
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(draws.shape[1])
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(draws, [tail, 100.0 - tail], axis=0, method="linear")
    rmse = None
    if truth is not None:
        t = np.asarray(truth, dtype=float).reshape(-1)
        rmse = np.sqrt(np.mean((draws - t) ** 2, axis=0))
    return PosteriorSummary(mean, sd, lo, hi, rmse)


def predictive_density(chain: Chain | np.ndarray, model: ParametricModel, xgrid) -> np.ndarray:
    """Posterior predictive density: average of ``pdf(x | draw)`` over draws."""
    draws = chain.draws if isinstance(chain, Chain) else np.atleast_2d(np.asarray(chain, dtype=float))
    if draws.shape[0] == 0:
        raise DomainError("chain is empty")
    x = np.asarray(xgrid, dtype=float)
    acc = np.zeros(x.shape)
    for theta in draws:
        acc += model.pdf(theta, x)
    return acc / draws.shape[0]
