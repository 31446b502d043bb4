"""Parametric families with densities, cdfs, quantiles, samplers and cdf partials.

Parameter order per family (also the JSON ``params`` order):

=====================  ======================================  ===============
JSON ``family``        parameters                              class
=====================  ======================================  ===============
``location_scale``     ``(mu, sigma)``                         LocationScale
``skew_normal``        ``(mu, sigma, alpha)``                  SkewNormal3
``skew_normal_alpha``  ``(alpha,)``                            SkewNormal
``exponential``        ``(theta,)`` (scale, mean ``theta``)    Exponential
``normal_linreg``      ``(beta_0, ..., beta_{p-1}, sigma)``    NormalLinReg
=====================  ======================================  ===============

The skewness parameter ``alpha`` is sometimes written ``lambda`` in the
simulation literature; both names refer to the same quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import quad
from .errors import CapabilityError, DomainError
from .rng import as_generator

LOG_2PI = math.log(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * LOG_2PI


# ---------------------------------------------------------------------------
# special functions


def norm_logpdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def norm_pdf(x):
    return np.exp(norm_logpdf(x))


def inv_mills(x):
    """Inverse Mills ratio ``phi(x) / Phi(x)``, stable for large negative x."""
    return np.exp(norm_logpdf(x) - special.log_ndtr(x))


def owens_t(h, a, tol: float = 1e-12):
    """Owen's T function by adaptive quadrature of its defining integral.

    ``T(h, a) = 1/(2 pi) * int_0^a exp(-h^2 (1 + t^2) / 2) / (1 + t^2) dt``.
    ``h`` may be an array; ``a`` must be a scalar.
    """
    a = float(a)
    h_arr = np.abs(np.asarray(h, dtype=float))
    scalar = h_arr.ndim == 0
    h_flat = np.atleast_1d(h_arr).ravel()
    out = np.zeros_like(h_flat)
    if a != 0.0 and h_flat.size:
        finite = np.isfinite(h_flat)
        hf = h_flat[finite]
        if hf.size:
            half_h2 = 0.5 * hf * hf

            def integrand(t):
                s = 1.0 + t * t
                return np.exp(-np.outer(half_h2, s)) / s

            res = quad.integrate_interval(integrand, 0.0, abs(a), 1e-3 * tol, rel_tol=tol)
            out[finite] = np.copysign(res.value / (2.0 * math.pi), a)
    out = out.reshape(np.shape(h_arr))
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# base densities for location-scale families

BASE_KINDS = ("normal", "laplace", "logistic", "student_t")


@dataclass(frozen=True)
class BaseDensity:
    """Symmetric unimodal standard density ``f0`` with cdf ``F0``.

    Student-t needs ``df > 2`` so that the second moment exists.
    """

    kind: str = "normal"
    df: float | None = None

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise DomainError(f"unknown base density {self.kind!r}; expected one of {BASE_KINDS}")
        if self.kind == "student_t":
            if self.df is None or not self.df > 2:
                raise DomainError("student_t base needs df > 2 for a finite second moment")
        elif self.df is not None:
            raise DomainError(f"df only applies to student_t, not {self.kind!r}")

    @property
    def second_moment(self) -> float:
        return {
            "normal": 1.0,
            "laplace": 2.0,
            "logistic": math.pi ** 2 / 3.0,
        }.get(self.kind) or self.df / (self.df - 2.0)

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "normal":
            return norm_logpdf(t)
        if self.kind == "laplace":
            return -np.abs(t) - math.log(2.0)
        if self.kind == "logistic":
            at = np.abs(t)
            return -at - 2.0 * np.log1p(np.exp(-at))
        nu = self.df
        c = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)
        return c - (nu + 1) / 2 * np.log1p(t * t / nu)

    def pdf(self, t):
        return np.exp(self.logpdf(t))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "normal":
            return special.ndtr(t)
        if self.kind == "laplace":
            return np.where(t < 0, 0.5 * np.exp(np.minimum(t, 0)), 1 - 0.5 * np.exp(-np.maximum(t, 0)))
        if self.kind == "logistic":
            return special.expit(t)
        return special.stdtr(self.df, t)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "normal":
            return special.ndtri(p)
        if self.kind == "laplace":
            return np.where(p < 0.5, np.log(2 * np.minimum(p, 0.5)), -np.log(2 * (1 - np.maximum(p, 0.5))))
        if self.kind == "logistic":
            return special.logit(p)
        return special.stdtrit(self.df, p)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(n)
        if self.kind == "laplace":
            return rng.laplace(0.0, 1.0, n)
        if self.kind == "logistic":
            return rng.logistic(0.0, 1.0, n)
        return rng.standard_t(self.df, n)

    def to_json(self) -> dict:
        out = {"base": self.kind}
        if self.df is not None:
            out["df"] = self.df
        return out


# ---------------------------------------------------------------------------
# the family interface


class ParametricModel:
    """A univariate continuous family ``F(x | theta)``.

    Subclasses supply ``logpdf`` and ``cdf``; the rest has generic fallbacks
    (bracketed Newton quantiles, central finite-difference cdf partials,
    inverse-cdf sampling). Instances are immutable.
    """

    name = "model"
    param_names: tuple = ()
    support = (-np.inf, np.inf)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    # --- parameter handling -------------------------------------------------
    def constraints(self, params: np.ndarray) -> list[str]:
        """Names of violated parameter constraints (empty when valid)."""
        return []

    def positive_indices(self) -> tuple[int, ...]:
        """Indices of parameters restricted to ``(0, inf)``."""
        return ()

    def check_params(self, params) -> np.ndarray:
        theta = np.asarray(params, dtype=float).reshape(-1)
        if theta.size != self.dim:
            raise DomainError(
                f"{self.name} takes {self.dim} parameters {self.param_names}, got {theta.size}"
            )
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.name} parameters must be finite, got {theta.tolist()}")
        bad = self.constraints(theta)
        if bad:
            raise DomainError(f"{self.name}: violated constraint(s) {', '.join(bad)}")
        return theta

    def in_space(self, params) -> bool:
        try:
            self.check_params(params)
        except DomainError:
            return False
        return True

    def loglik_fn(self, data) -> Callable[[np.ndarray], float]:
        """Closure ``theta -> sum log f(data | theta)``, ``-inf`` off the parameter space.

        Built for repeated evaluation inside samplers and optimisers.
        """
        data = np.asarray(data, dtype=float)

        def loglik(theta):
            if not self.in_space(theta):
                return -math.inf
            with np.errstate(divide="ignore"):
                return float(np.sum(self.logpdf(theta, data)))

        return loglik

    # --- densities ----------------------------------------------------------
    def logpdf(self, params, x):
        raise NotImplementedError

    def pdf(self, params, x):
        return np.exp(self.logpdf(params, x))

    def cdf(self, params, x):
        raise NotImplementedError

    def integration_hint(self, params) -> tuple[float, float]:
        """(location, scale) locating the bulk of the density."""
        return 0.0, 1.0

    def wim_hint(self, params) -> tuple[float, float]:
        """(location, scale) locating the bulk of the WIM integrand."""
        return self.integration_hint(params)

    # --- quantiles ----------------------------------------------------------
    def quantile(self, params, p):
        theta = self.check_params(params)
        p_arr = np.asarray(p, dtype=float)
        if np.any(~((p_arr > 0) & (p_arr < 1))):
            raise DomainError("quantile needs p strictly inside (0, 1)")
        out = self._solve_quantile(theta, np.atleast_1d(p_arr).ravel())
        return float(out[0]) if p_arr.ndim == 0 else out.reshape(p_arr.shape)

    def _solve_quantile(self, theta, p, max_iter: int = 200):
        """Bracketed bisection with Newton refinement, vectorised over ``p``."""
        loc, scale = self.integration_hint(theta)
        lo_supp, hi_supp = self.support
        x0 = min(max(loc, lo_supp), hi_supp) if np.isfinite(lo_supp) or np.isfinite(hi_supp) else loc
        lo = np.full(p.shape, x0, dtype=float)
        hi = np.full(p.shape, x0, dtype=float)
        # grow the bracket geometrically from the median guess
        step = np.full(p.shape, scale, dtype=float)
        need_lo = self.cdf(theta, lo) > p
        while np.any(need_lo):
            cand = lo[need_lo] - step[need_lo]
            if np.isfinite(lo_supp):
                cand = np.maximum(cand, lo_supp)
            lo[need_lo] = cand
            step[need_lo] *= 2.0
            still = self.cdf(theta, lo[need_lo]) > p[need_lo]
            if np.isfinite(lo_supp):
                still &= lo[need_lo] > lo_supp
            idx = np.flatnonzero(need_lo)
            need_lo[idx[~still]] = False
        step[:] = scale
        need_hi = self.cdf(theta, hi) < p
        while np.any(need_hi):
            cand = hi[need_hi] + step[need_hi]
            if np.isfinite(hi_supp):
                cand = np.minimum(cand, hi_supp)
            hi[need_hi] = cand
            step[need_hi] *= 2.0
            still = self.cdf(theta, hi[need_hi]) < p[need_hi]
            idx = np.flatnonzero(need_hi)
            need_hi[idx[~still]] = False

        x = 0.5 * (lo + hi)
        active = np.ones(p.shape, dtype=bool)
        for _ in range(max_iter):
            if not active.any():
                break
            xa = x[active]
            fa = self.cdf(theta, xa) - p[active]
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(fa < 0, xa, lo_a)
            hi_a = np.where(fa > 0, xa, hi_a)
            dens = self.pdf(theta, xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = xa - fa / dens
            ok = np.isfinite(newton) & (newton > lo_a) & (newton < hi_a)
            xn = np.where(ok, newton, 0.5 * (lo_a + hi_a))
            xn = np.where(fa == 0, xa, xn)
            done = (
                (fa == 0)
                | (np.abs(xn - xa) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xa)))
                | ((hi_a - lo_a) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xa)))
            )
            x[active] = xn
            lo[active], hi[active] = lo_a, hi_a
            idx = np.flatnonzero(active)
            active[idx[done]] = False
        return x

    # --- cdf partials -------------------------------------------------------
    def cdf_partials(self, params, x):
        """Array of ``dF/dtheta_i`` with shape ``(dim, *x.shape)``.

        Fallback: central differences with step ``max(1e-5, 1e-5 |theta_i|)``.
        """
        theta = self.check_params(params)
        x = np.asarray(x, dtype=float)
        out = np.empty((self.dim,) + x.shape)
        for i in range(self.dim):
            h = max(1e-5, 1e-5 * abs(theta[i]))
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            out[i] = (self.cdf(up, x) - self.cdf(dn, x)) / (2.0 * h)
        return out

    def log_abs_cdf_partials(self, params, x):
        """(sign, log|dF/dtheta_i|), same shape as :meth:`cdf_partials`."""
        d = self.cdf_partials(params, x)
        with np.errstate(divide="ignore"):
            return np.sign(d), np.log(np.abs(d))

    # --- sampling -----------------------------------------------------------
    def sample(self, params, n: int, seed) -> np.ndarray:
        theta = self.check_params(params)
        if n < 1:
            raise DomainError("sample size must be >= 1")
        rng = as_generator(seed)
        return self._draw(theta, int(n), rng)

    def _draw(self, theta, n, rng):
        u = rng.uniform(size=n)
        u = np.clip(u, 1e-300, 1 - 1e-16)
        return self._solve_quantile(theta, u)

    def to_json(self) -> dict:
        raise CapabilityError(f"{self.name} has no JSON form")


# ---------------------------------------------------------------------------
# concrete families


@dataclass(frozen=True)
class LocationScale(ParametricModel):
    """``F(x | mu, sigma) = F0((x - mu) / sigma)`` for a symmetric base ``F0``."""

    base: BaseDensity = field(default_factory=BaseDensity)

    name = "location_scale"
    param_names = ("mu", "sigma")

    def constraints(self, theta):
        return [] if theta[1] > 0 else ["sigma > 0"]

    def positive_indices(self):
        return (1,)

    def logpdf(self, params, x):
        mu, sigma = self.check_params(params)
        return self.base.logpdf((np.asarray(x, dtype=float) - mu) / sigma) - math.log(sigma)

    def cdf(self, params, x):
        mu, sigma = self.check_params(params)
        return self.base.cdf((np.asarray(x, dtype=float) - mu) / sigma)

    def quantile(self, params, p):
        mu, sigma = self.check_params(params)
        p_arr = np.asarray(p, dtype=float)
        if np.any(~((p_arr > 0) & (p_arr < 1))):
            raise DomainError("quantile needs p strictly inside (0, 1)")
        out = mu + sigma * self.base.ppf(p_arr)
        return float(out) if p_arr.ndim == 0 else out

    def cdf_partials(self, params, x):
        mu, sigma = self.check_params(params)
        z = (np.asarray(x, dtype=float) - mu) / sigma
        dens = self.base.pdf(z) / sigma
        return np.stack([-dens, -z * dens])

    def integration_hint(self, params):
        mu, sigma = self.check_params(params)
        return float(mu), float(sigma)

    def _draw(self, theta, n, rng):
        return theta[0] + theta[1] * self.base.draw(rng, n)

    def to_json(self):
        return {"family": self.name, **self.base.to_json()}


def _sn_log_dalpha(z, alpha):
    """log|dS/dalpha| for the standard skew-normal at ``z``."""
    s = 1.0 + alpha * alpha
    return -0.5 * z * z * s - math.log(s) - math.log(math.pi)


@dataclass(frozen=True)
class SkewNormal(ParametricModel):
    """Standard skew-normal ``s(x | alpha) = 2 phi(x) Phi(alpha x)``, alpha only."""

    name = "skew_normal_alpha"
    param_names = ("alpha",)

    def logpdf(self, params, x):
        (alpha,) = self.check_params(params)
        x = np.asarray(x, dtype=float)
        return math.log(2.0) + norm_logpdf(x) + special.log_ndtr(alpha * x)

    def cdf(self, params, x):
        (alpha,) = self.check_params(params)
        x = np.asarray(x, dtype=float)
        return np.clip(special.ndtr(x) - 2.0 * owens_t(x, alpha), 0.0, 1.0)

    def cdf_partials(self, params, x):
        (alpha,) = self.check_params(params)
        z = np.asarray(x, dtype=float)
        return -np.exp(_sn_log_dalpha(z, alpha))[None, ...]

    def log_abs_cdf_partials(self, params, x):
        (alpha,) = self.check_params(params)
        z = np.asarray(x, dtype=float)
        la = _sn_log_dalpha(z, alpha)[None, ...]
        return -np.ones_like(la), la

    def integration_hint(self, params):
        (alpha,) = self.check_params(params)
        delta = alpha / math.sqrt(1 + alpha * alpha)
        return delta * math.sqrt(2 / math.pi), 1.0

    def wim_hint(self, params):
        (alpha,) = self.check_params(params)
        return 0.0, 1.0 / math.sqrt(0.5 + alpha * alpha)

    def _draw(self, theta, n, rng):
        return _draw_sn(theta[-1], n, rng)

    def to_json(self):
        return {"family": self.name}


def _draw_sn(alpha, n, rng):
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    z0 = rng.standard_normal(n)
    z1 = rng.standard_normal(n)
    return delta * np.abs(z0) + math.sqrt(1.0 - delta * delta) * z1


@dataclass(frozen=True)
class SkewNormal3(ParametricModel):
    """Skew-normal with location, scale and skewness ``(mu, sigma, alpha)``."""

    name = "skew_normal"
    param_names = ("mu", "sigma", "alpha")

    def constraints(self, theta):
        return [] if theta[1] > 0 else ["sigma > 0"]

    def positive_indices(self):
        return (1,)

    def logpdf(self, params, x):
        mu, sigma, alpha = self.check_params(params)
        z = (np.asarray(x, dtype=float) - mu) / sigma
        return math.log(2.0) - math.log(sigma) + norm_logpdf(z) + special.log_ndtr(alpha * z)

    def loglik_fn(self, data):
        x = np.asarray(data, dtype=float).ravel()
        const = x.size * (math.log(2.0) - LOG_SQRT_2PI)

        def loglik(theta):
            mu, sigma, alpha = theta
            if not sigma > 0 or not math.isfinite(mu + alpha):
                return -math.inf
            z = (x - mu) / sigma
            return float(const - x.size * math.log(sigma) - 0.5 * z.dot(z)
                         + special.log_ndtr(alpha * z).sum())

        return loglik

    def cdf(self, params, x):
        mu, sigma, alpha = self.check_params(params)
        z = (np.asarray(x, dtype=float) - mu) / sigma
        return np.clip(special.ndtr(z) - 2.0 * owens_t(z, alpha), 0.0, 1.0)

    def quantile(self, params, p):
        mu, sigma, alpha = self.check_params(params)
        return mu + sigma * np.asarray(SkewNormal().quantile([alpha], p))

    def cdf_partials(self, params, x):
        mu, sigma, alpha = self.check_params(params)
        z = (np.asarray(x, dtype=float) - mu) / sigma
        dens = 2.0 * norm_pdf(z) * special.ndtr(alpha * z) / sigma
        return np.stack([-dens, -z * dens, -np.exp(_sn_log_dalpha(z, alpha))])

    def log_abs_cdf_partials(self, params, x):
        mu, sigma, alpha = self.check_params(params)
        z = np.asarray((np.asarray(x, dtype=float) - mu) / sigma)
        logd = math.log(2.0) - math.log(sigma) + norm_logpdf(z) + special.log_ndtr(alpha * z)
        with np.errstate(divide="ignore"):
            log_z = np.log(np.abs(z))
        sign = np.stack([-np.ones_like(z), -np.sign(z), -np.ones_like(z)])
        return sign, np.stack([logd, log_z + logd, _sn_log_dalpha(z, alpha)])

    def integration_hint(self, params):
        mu, sigma, alpha = self.check_params(params)
        delta = alpha / math.sqrt(1 + alpha * alpha)
        return mu + sigma * delta * math.sqrt(2 / math.pi), sigma

    def _draw(self, theta, n, rng):
        return theta[0] + theta[1] * _draw_sn(theta[2], n, rng)

    def to_json(self):
        return {"family": self.name}


@dataclass(frozen=True)
class Exponential(ParametricModel):
    """Exponential with scale ``theta``: ``F(x) = 1 - exp(-x / theta)``, x > 0."""

    name = "exponential"
    param_names = ("theta",)
    support = (0.0, np.inf)

    def constraints(self, theta):
        return [] if theta[0] > 0 else ["theta > 0"]

    def positive_indices(self):
        return (0,)

    def logpdf(self, params, x):
        (theta,) = self.check_params(params)
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.where(x >= 0, -x / theta - math.log(theta), -np.inf)

    def cdf(self, params, x):
        (theta,) = self.check_params(params)
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-np.maximum(x, 0) / theta), 0.0)

    def quantile(self, params, p):
        (theta,) = self.check_params(params)
        p_arr = np.asarray(p, dtype=float)
        if np.any(~((p_arr > 0) & (p_arr < 1))):
            raise DomainError("quantile needs p strictly inside (0, 1)")
        out = -theta * np.log1p(-p_arr)
        return float(out) if p_arr.ndim == 0 else out

    def cdf_partials(self, params, x):
        (theta,) = self.check_params(params)
        x = np.asarray(x, dtype=float)
        d = np.where(x > 0, -(x / theta ** 2) * np.exp(-np.maximum(x, 0) / theta), 0.0)
        return d[None, ...]

    def integration_hint(self, params):
        (theta,) = self.check_params(params)
        return 0.0, float(theta)

    def _draw(self, theta, n, rng):
        return rng.exponential(theta[0], n)

    def to_json(self):
        return {"family": self.name}


@dataclass(frozen=True, eq=False)
class RegressionRow(ParametricModel):
    """Response law of one regression observation, ``N(x_i' beta, sigma^2)``."""

    row: np.ndarray = field(default_factory=lambda: np.ones(1))

    name = "normal_linreg_row"

    @property
    def param_names(self):
        return tuple(f"beta_{k}" for k in range(len(self.row))) + ("sigma",)

    def constraints(self, theta):
        return [] if theta[-1] > 0 else ["sigma > 0"]

    def positive_indices(self):
        return (len(self.row),)

    def _z(self, params, y):
        theta = self.check_params(params)
        return (np.asarray(y, dtype=float) - self.row @ theta[:-1]) / theta[-1], theta[-1]

    def logpdf(self, params, y):
        z, sigma = self._z(params, y)
        return norm_logpdf(z) - math.log(sigma)

    def cdf(self, params, y):
        z, _ = self._z(params, y)
        return special.ndtr(z)

    def quantile(self, params, p):
        theta = self.check_params(params)
        return self.row @ theta[:-1] + theta[-1] * special.ndtri(np.asarray(p, dtype=float))

    def cdf_partials(self, params, y):
        z, sigma = self._z(params, y)
        dens = norm_pdf(z) / sigma
        return np.concatenate([-np.multiply.outer(self.row, dens), (-z * dens)[None, ...]])

    def integration_hint(self, params):
        theta = self.check_params(params)
        return float(self.row @ theta[:-1]), float(theta[-1])


@dataclass(frozen=True, eq=False)
class NormalLinReg(ParametricModel):
    """Normal linear regression ``y_i = x_i' beta + eps_i`` with a fixed design.

    Densities and cdfs act observation-wise on a response vector of length
    ``n``; the WIM of the whole sample is assembled from :meth:`row` models.
    """

    design: np.ndarray = field(default_factory=lambda: np.eye(1))

    name = "normal_linreg"

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        if X.ndim != 2:
            raise DomainError("design must be a 2-d matrix")
        object.__setattr__(self, "design", X)
        X.setflags(write=False)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @property
    def param_names(self):
        return tuple(f"beta_{k}" for k in range(self.p)) + ("sigma",)

    def constraints(self, theta):
        return [] if theta[-1] > 0 else ["sigma > 0"]

    def positive_indices(self):
        return (self.p,)

    def rank(self) -> int:
        s = np.linalg.svd(self.design, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > 1e-10 * s[0]))

    def full_column_rank(self) -> bool:
        return self.rank() == self.p

    def row(self, i: int) -> RegressionRow:
        return RegressionRow(row=self.design[i].copy())

    def _z(self, params, y):
        theta = self.check_params(params)
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.n:
            raise DomainError(f"response length {y.shape[-1]} does not match design rows {self.n}")
        return (y - self.design @ theta[:-1]) / theta[-1], theta[-1]

    def logpdf(self, params, y):
        z, sigma = self._z(params, y)
        return norm_logpdf(z) - math.log(sigma)

    def cdf(self, params, y):
        z, _ = self._z(params, y)
        return special.ndtr(z)

    def loglik_fn(self, data):
        y = np.asarray(data, dtype=float).ravel()
        if y.size != self.n:
            raise DomainError(f"response length {y.size} does not match design rows {self.n}")
        X = self.design
        const = -self.n * LOG_SQRT_2PI

        def loglik(theta):
            sigma = theta[-1]
            if not sigma > 0 or not np.all(np.isfinite(theta)):
                return -math.inf
            r = y - X @ theta[:-1]
            return float(const - self.n * math.log(sigma) - 0.5 * r.dot(r) / (sigma * sigma))

        return loglik

    def cdf_partials(self, params, y):
        z, sigma = self._z(params, y)
        dens = norm_pdf(z) / sigma
        return np.concatenate([-(self.design.T * dens), (-z * dens)[None, :]])

    def _draw(self, theta, n, rng):
        if n != self.n:
            raise DomainError(f"regression samples come in blocks of n={self.n} rows")
        return self.design @ theta[:-1] + theta[-1] * rng.standard_normal(n)

    def to_json(self):
        return {"family": self.name, "design": self.design.tolist()}


@dataclass(frozen=True, eq=False)
class Reparameterized(ParametricModel):
    """``base`` re-expressed in new coordinates ``phi`` with ``theta = to_base(phi)``.

    With ``jacobian`` (returning ``d theta_i / d phi_j``) the cdf partials use
    the chain rule; without it they fall back to finite differences.
    """

    base: ParametricModel = field(default_factory=LocationScale)
    to_base: Callable[[np.ndarray], np.ndarray] = lambda phi: phi
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    names: Sequence[str] | None = None
    in_domain: Callable[[np.ndarray], bool] | None = None

    name = "reparameterized"

    @property
    def param_names(self):
        return tuple(self.names) if self.names is not None else self.base.param_names

    @property
    def support(self):
        return self.base.support

    def constraints(self, phi):
        if self.in_domain is not None and not self.in_domain(phi):
            return ["phi in reparameterisation domain"]
        return self.base.constraints(np.asarray(self.to_base(phi), dtype=float))

    def theta(self, params) -> np.ndarray:
        return np.asarray(self.to_base(self.check_params(params)), dtype=float)

    def logpdf(self, params, x):
        return self.base.logpdf(self.theta(params), x)

    def cdf(self, params, x):
        return self.base.cdf(self.theta(params), x)

    def quantile(self, params, p):
        return self.base.quantile(self.theta(params), p)

    def cdf_partials(self, params, x):
        if self.jacobian is None:
            return super().cdf_partials(params, x)
        phi = self.check_params(params)
        J = np.asarray(self.jacobian(phi), dtype=float)
        d = self.base.cdf_partials(self.theta(phi), x)
        return np.tensordot(J.T, d, axes=1)

    def integration_hint(self, params):
        return self.base.integration_hint(self.theta(params))

    def wim_hint(self, params):
        return self.base.wim_hint(self.theta(params))

    def _draw(self, phi, n, rng):
        return self.base._draw(np.asarray(self.to_base(phi), dtype=float), n, rng)


# ---------------------------------------------------------------------------
# JSON model specs

FAMILIES = ("location_scale", "skew_normal", "skew_normal_alpha", "exponential", "normal_linreg")


def model_from_json(spec: dict) -> ParametricModel:
    """Build a model from a JSON object (see module docstring for families)."""
    if not isinstance(spec, dict):
        raise DomainError("model spec must be a JSON object")
    family = spec.get("family")
    if family == "location_scale":
        base = BaseDensity(spec.get("base", "normal"), spec.get("df"))
        return LocationScale(base)
    if family == "skew_normal":
        return SkewNormal3()
    if family == "skew_normal_alpha":
        return SkewNormal()
    if family == "exponential":
        return Exponential()
    if family == "normal_linreg":
        if "design" not in spec:
            raise DomainError("normal_linreg needs a 'design' matrix")
        return NormalLinReg(np.asarray(spec["design"], dtype=float))
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def spec_from_json(spec: dict) -> tuple[ParametricModel, np.ndarray]:
    """Parse ``{"family": ..., "params": [...]}`` into ``(model, params)``."""
    model = model_from_json(spec)
    if "params" not in spec:
        raise DomainError("model spec needs 'params'")
    return model, model.check_params(spec["params"])
