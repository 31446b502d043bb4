"""Wasserstein priors, the Jeffreys comparison prior for skewness, and propriety checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import quad
from .dist import (
    Exponential,
    LocationScale,
    NormalLinReg,
    ParametricModel,
    SkewNormal,
    SkewNormal3,
    norm_logpdf,
)
from .errors import CapabilityError, DomainError
from .wim import sn_alpha_wim, wim

PRIOR_KINDS = ("wasserstein", "independence_wasserstein", "independence_jeffreys", "flat",
               "student_t_approx")

T_APPROX_DF = 1.5
T_APPROX_SCALE = 0.757


@dataclass(frozen=True)
class PriorSpec:
    """Unnormalised log prior density over a model's parameter vector.

    ``positive`` lists indices restricted to ``(0, inf)``; ``log_density``
    returns ``-inf`` outside the support.
    """

    kind: str
    log_density: Callable[[np.ndarray], float]
    param_names: tuple
    positive: tuple = ()
    description: str = ""

    def __call__(self, params) -> float:
        theta = np.asarray(params, dtype=float)
        if any(theta[i] <= 0 for i in self.positive):
            return -math.inf
        return float(self.log_density(theta))

    def density(self, params) -> float:
        return math.exp(self(params))


# ---------------------------------------------------------------------------
# Wasserstein prior for general models


def wprior_density(model: ParametricModel, params, tol: float = 1e-8) -> float:
    """Unnormalised ``sqrt(det W(theta))``."""
    W = wim(model, params, tol)
    return math.sqrt(max(W.det(), 0.0))


def wasserstein_prior(model: ParametricModel) -> PriorSpec:
    """Wasserstein prior for ``model`` as a :class:`PriorSpec`.

    Location-scale, exponential and regression priors are constant, so
    they are returned as flat log densities without touching the WIM.
    """
    if isinstance(model, (LocationScale, Exponential, NormalLinReg)):
        return PriorSpec("wasserstein", lambda theta: 0.0, model.param_names,
                         model.positive_indices(), "constant Wasserstein prior")
    if isinstance(model, SkewNormal3):
        return independence_prior_sn()
    if isinstance(model, SkewNormal):
        table = alpha_prior_table("wasserstein")
        return PriorSpec("wasserstein", lambda theta: table(theta[0]), model.param_names)

    def logd(theta):
        if not model.in_space(theta):
            return -math.inf
        val = wprior_density(model, theta)
        return math.log(val) if val > 0 else -math.inf

    return PriorSpec("wasserstein", logd, model.param_names, model.positive_indices())


def flat_prior(model: ParametricModel) -> PriorSpec:
    return PriorSpec("flat", lambda theta: 0.0, model.param_names, model.positive_indices())


# ---------------------------------------------------------------------------
# skew-normal skewness parameter


def sn_alpha_wprior(alpha: float, tol: float = 1e-10) -> float:
    """Unnormalised Wasserstein prior of the skew-normal ``alpha``."""
    return math.sqrt(sn_alpha_wim(alpha, tol))


def sn_alpha_fisher(alpha: float, tol: float = 1e-10) -> float:
    """Fisher information of ``alpha``: ``2 int x^2 phi(x) phi(alpha x)^2 / Phi(alpha x) dx``."""
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise DomainError("alpha must be finite")

    def integrand(x):
        ax = alpha * x
        with np.errstate(divide="ignore"):
            logv = 2.0 * np.log(np.abs(x)) + norm_logpdf(x) + 2.0 * norm_logpdf(ax) - special.log_ndtr(ax)
        return 2.0 * np.exp(logv)

    res = quad.integrate_real_line(integrand, 0.0, scale=1.0 / math.sqrt(1.0 + alpha * alpha),
                                   rel_tol=tol)
    return res.value


def sn_alpha_jeffreys(alpha: float, tol: float = 1e-10) -> float:
    """Unnormalised Jeffreys prior of the skew-normal ``alpha``."""
    return math.sqrt(sn_alpha_fisher(alpha, tol))


def _tail_constant(fn, at: float, order: float) -> float:
    return fn(at) * at ** order


def sn_alpha_wprior_normconst(tol: float = 1e-10, split: float = 30.0,
                              truncation: float | None = None) -> float:
    """Normalising constant of the skew-normal ``alpha`` Wasserstein prior.

    Numerical on ``[0, split]`` and, when ``truncation > split``, on
    ``[split, truncation]`` (in ``log alpha``); the remaining tail uses the
    ``alpha^{-5/2}`` order with its constant fitted at the last point.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    inner_tol = tol * 1e-2

    def body(a):
        return np.array([sn_alpha_wprior(v, inner_tol) for v in np.atleast_1d(a)])

    total = quad.integrate_interval(body, 0.0, split, 0.0, rel_tol=tol).value
    end = split
    if truncation is not None and truncation > split:
        def in_log(u):
            a = np.exp(u)
            return body(a) * a

        total += quad.integrate_interval(in_log, math.log(split), math.log(truncation),
                                         0.0, rel_tol=tol).value
        end = truncation
    c = _tail_constant(lambda a: sn_alpha_wprior(a, inner_tol), end, 2.5)
    total += c * end ** -1.5 / 1.5
    return 2.0 * total


@lru_cache(maxsize=None)
def sn_alpha_normconst_default() -> float:
    return sn_alpha_wprior_normconst()


def sn_alpha_wprior_normalized(alpha: float) -> float:
    return sn_alpha_wprior(alpha) / sn_alpha_normconst_default()


def student_t_approx(alpha) -> float:
    """Student-t density (df 3/2, scale 0.757, location 0) approximating the alpha prior."""
    nu, s = T_APPROX_DF, T_APPROX_SCALE
    z = np.asarray(alpha, dtype=float) / s
    logc = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi) - math.log(s)
    out = np.exp(logc - (nu + 1) / 2 * np.log1p(z * z / nu))
    return float(out) if out.ndim == 0 else out


class AlphaPriorTable:
    """Cubic-spline table of a log prior in ``alpha`` for fast repeated evaluation.

    Nodes sit on ``asinh(|alpha|)``; beyond ``alpha_max`` the known power-law
    tail continues the last node. Evenness is exact by construction.
    """

    def __init__(self, fn, tail_order: float, alpha_max: float = 1e4, nodes: int = 500):
        self.tail_order = tail_order
        self.alpha_max = alpha_max
        u = np.linspace(0.0, math.asinh(alpha_max), nodes)
        vals = np.log([fn(a) for a in np.sinh(u)])
        self._spline = CubicSpline(u, vals, bc_type=((1, 0.0), "not-a-knot"))
        self._edge = float(vals[-1])

    def __call__(self, alpha) -> float:
        a = abs(float(alpha))
        if a <= self.alpha_max:
            return float(self._spline(math.asinh(a)))
        return self._edge - self.tail_order * math.log(a / self.alpha_max)


@lru_cache(maxsize=None)
def alpha_prior_table(kind: str) -> AlphaPriorTable:
    if kind == "wasserstein":
        return AlphaPriorTable(sn_alpha_wprior, 2.5)
    if kind == "jeffreys":
        return AlphaPriorTable(sn_alpha_jeffreys, 1.5)
    raise DomainError(f"no alpha prior table for {kind!r}")


def independence_prior_sn() -> PriorSpec:
    """Independence Wasserstein prior for ``(mu, sigma, alpha)``: flat times ``pi_W(alpha)``."""
    table = alpha_prior_table("wasserstein")
    return PriorSpec("independence_wasserstein", lambda theta: table(theta[2]),
                     SkewNormal3.param_names, (1,), "flat in (mu, sigma) times pi_W(alpha)")


def independence_jeffreys_sn() -> PriorSpec:
    """Independence Jeffreys prior for ``(mu, sigma, alpha)``: ``pi_J(alpha) / sigma``."""
    table = alpha_prior_table("jeffreys")
    return PriorSpec("independence_jeffreys", lambda theta: table(theta[2]) - math.log(theta[1]),
                     SkewNormal3.param_names, (1,), "1/sigma times pi_J(alpha)")


def make_prior(kind: str, model: ParametricModel) -> PriorSpec:
    """Prior of a named kind for ``model``."""
    if kind in ("wasserstein", "independence_wasserstein"):
        return wasserstein_prior(model)
    if kind in ("jeffreys", "independence_jeffreys"):
        if isinstance(model, SkewNormal3):
            return independence_jeffreys_sn()
        if isinstance(model, SkewNormal):
            table = alpha_prior_table("jeffreys")
            return PriorSpec("independence_jeffreys", lambda theta: table(theta[0]), model.param_names)
        raise CapabilityError(f"no Jeffreys prior implemented for {model.name}")
    if kind == "flat":
        return flat_prior(model)
    if kind == "student_t_approx":
        if not isinstance(model, (SkewNormal, SkewNormal3)):
            raise CapabilityError("the Student-t approximation is defined for skew-normal alpha")
        idx = model.dim - 1
        return PriorSpec("student_t_approx", lambda theta: math.log(student_t_approx(theta[idx])),
                         model.param_names, model.positive_indices())
    raise DomainError(f"unknown prior kind {kind!r}; expected one of {PRIOR_KINDS}")


# ---------------------------------------------------------------------------
# propriety

SUFFICIENT_NOTE = ("sufficient conditions only: proper=false means these conditions were not "
                   "verified, not that the posterior is improper")

# int lambda^{1/2} dH(lambda) is finite for every built-in scale-mixture base
_MIXING_MOMENT_FINITE = {"normal": True, "laplace": True, "logistic": True, "student_t": True}


@dataclass(frozen=True)
class Condition:
    name: str
    satisfied: bool
    detail: str = ""


@dataclass(frozen=True)
class ProprietyVerdict:
    proper: bool
    conditions: tuple = field(default_factory=tuple)
    note: str = SUFFICIENT_NOTE

    def failing(self) -> list[str]:
        return [c.name for c in self.conditions if not c.satisfied]

    def describe(self) -> str:
        head = "proper" if self.proper else "sufficient conditions not verified"
        lines = [head] + [
            f"  [{'ok' if c.satisfied else 'FAIL'}] {c.name}: {c.detail}" for c in self.conditions
        ]
        return "\n".join(lines + [f"  note: {self.note}"])

    def to_json(self) -> dict:
        return {
            "proper": self.proper,
            "conditions": [
                {"name": c.name, "satisfied": c.satisfied, "detail": c.detail} for c in self.conditions
            ],
            "note": self.note,
        }


def _verdict(conditions) -> ProprietyVerdict:
    conditions = tuple(conditions)
    return ProprietyVerdict(all(c.satisfied for c in conditions), conditions)


def check_propriety(model: ParametricModel, prior: PriorSpec | str, data) -> ProprietyVerdict:
    """Check the sufficient conditions for a proper posterior.

    ``data`` is the sample (for regression: the response vector; the design
    lives on the model).
    """
    kind = prior if isinstance(prior, str) else prior.kind
    y = np.asarray(data, dtype=float).reshape(-1)
    n = y.size
    if n == 0:
        raise DomainError("dataset must be nonempty")

    if isinstance(model, LocationScale):
        if kind not in ("wasserstein", "flat"):
            raise CapabilityError(f"no propriety result for {kind!r} priors on location-scale models")
        base = model.base.kind
        finite = _MIXING_MOMENT_FINITE.get(base, False)
        return _verdict([
            Condition("n > 2", n > 2, f"n = {n}"),
            Condition("int lambda^(1/2) dH(lambda) < inf", finite,
                      f"scale-mixture base {base!r}" + ("" if finite else " is not a known mixture")),
        ])

    if isinstance(model, SkewNormal3):
        if kind not in ("wasserstein", "independence_wasserstein", "independence_jeffreys", "jeffreys"):
            raise CapabilityError(f"no propriety result for {kind!r} priors on the skew-normal")
        detail = f"n = {n}"
        if kind in ("independence_jeffreys", "jeffreys"):
            detail += " (proper alpha marginal; bound reduces to the normal location-scale case)"
        return _verdict([Condition("n > 2", n > 2, detail)])

    if isinstance(model, Exponential):
        if kind not in ("wasserstein", "flat"):
            raise CapabilityError(f"no propriety result for {kind!r} priors on the exponential")
        return _verdict([Condition("n > 1", n > 1, f"n = {n}")])

    if isinstance(model, NormalLinReg):
        if kind not in ("wasserstein", "flat"):
            raise CapabilityError(f"no propriety result for {kind!r} priors on regression")
        if n != model.n:
            raise DomainError(f"response length {n} does not match design rows {model.n}")
        p = model.p
        rank = model.rank()
        X = model.design
        if rank == p:
            beta, *_ = np.linalg.lstsq(X, y, rcond=None)
            resid = float(np.linalg.norm(y - X @ beta))
        else:
            resid = float("nan")
        ynorm = float(np.linalg.norm(y))
        outside = bool(rank == p and resid > 1e-8 * ynorm)
        return _verdict([
            Condition("full column rank", rank == p, f"rank {rank} of {p} columns"),
            Condition("y not in column space of X", outside,
                      f"residual norm {resid:.3g} vs 1e-8 * |y| = {1e-8 * ynorm:.3g}"),
            Condition("n > p + 1", n > p + 1, f"n = {n}, p = {p}"),
        ])

    raise CapabilityError(f"no propriety result for family {model.name}")
