"""Wasserstein information matrices and the univariate Wasserstein-2 distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import quad
from .dist import (
    Exponential,
    LocationScale,
    NormalLinReg,
    ParametricModel,
    SkewNormal,
)
from .errors import CapabilityError, DomainError, QuadratureError

SYM_TOL = 1e-12
PSD_TOL = -1e-10
QUANTILE_EPS = 1e-10


@dataclass(frozen=True)
class WimMatrix:
    """A d x d WIM with provenance.

    ``method`` is ``"closed_form"`` or ``"quadrature"``; ``tol`` is the
    quadrature tolerance used (0 for purely analytic entries).
    """

    entries: np.ndarray
    method: str
    tol: float = 0.0

    def __post_init__(self):
        W = np.array(self.entries, dtype=float, copy=True)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DomainError(f"WIM must be square, got shape {W.shape}")
        scale = max(1.0, float(np.max(np.abs(W)))) if W.size else 1.0
        if np.max(np.abs(W - W.T), initial=0.0) > SYM_TOL * scale:
            raise DomainError("WIM is not symmetric")
        W = 0.5 * (W + W.T)
        W.setflags(write=False)
        object.__setattr__(self, "entries", W)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def is_psd(self) -> bool:
        return self.min_eigenvalue() >= PSD_TOL * max(1.0, float(np.max(np.abs(self.entries))))

    def to_json(self) -> dict:
        return {"matrix": self.entries.tolist(), "method": self.method, "tol": self.tol}


# ---------------------------------------------------------------------------
# generic engine


def _wim_integrand(model, theta):
    d = model.dim
    iu, ju = np.triu_indices(d)

    def integrand(x):
        sign, logabs = model.log_abs_cdf_partials(theta, x)
        logf = model.logpdf(theta, x)
        with np.errstate(invalid="ignore", over="ignore"):
            expo = logabs[iu] + logabs[ju] - logf
            vals = sign[iu] * sign[ju] * np.exp(expo)
        # zero partial times anything (including an underflowed density) is zero
        vals = np.where(np.isneginf(logabs[iu]) | np.isneginf(logabs[ju]), 0.0, vals)
        return vals

    return integrand, iu, ju


def _unpack(values, d, iu, ju):
    W = np.zeros((d, d))
    W[iu, ju] = values
    W[ju, iu] = values
    return W


def wim_generic(model: ParametricModel, params, tol: float = 1e-8,
                rel_tol: float | None = None, budget: int = quad.DEFAULT_BUDGET) -> WimMatrix:
    """WIM by quadrature of ``E[dF/dtheta_i dF/dtheta_j / f^2]``.

    For :class:`NormalLinReg` the per-observation matrices are summed over
    the rows of the design (so the ``sigma`` entry equals ``n``).
    """
    theta = model.check_params(params)
    if isinstance(model, NormalLinReg):
        total = np.zeros((model.dim, model.dim))
        for i in range(model.n):
            total += wim_generic(model.row(i), theta, tol, rel_tol, budget).entries
        return WimMatrix(total, "quadrature", tol)

    integrand, iu, ju = _wim_integrand(model, theta)
    loc, scale = model.wim_hint(theta)
    try:
        res = quad.integrate_support(integrand, model.support, tol, loc=loc, scale=scale,
                                     rel_tol=rel_tol, budget=budget)
    except QuadratureError as exc:
        pairs = list(zip(iu.tolist(), ju.tolist()))
        bad = pairs
        if exc.value is not None and exc.error is not None:
            lim = np.maximum(tol, (tol if rel_tol is None else rel_tol) * np.abs(exc.value))
            bad = [pq for pq, e, t in zip(pairs, np.atleast_1d(exc.error), np.atleast_1d(lim)) if e > t]
        raise QuadratureError(
            f"WIM quadrature failed for {model.name} at {theta.tolist()}, entries {bad}: {exc}",
            value=exc.value, error=exc.error, evaluations=exc.evaluations,
        ) from exc
    return WimMatrix(_unpack(np.atleast_1d(res.value), model.dim, iu, ju), "quadrature", tol)


# ---------------------------------------------------------------------------
# closed forms

_SN_CONST = math.sqrt(2.0) / math.pi ** 1.5


def sn_alpha_wim(alpha: float, tol: float = 1e-10) -> float:
    """Skew-normal WIM of ``alpha`` from its one-dimensional integral form.

    The factor ``1 / (erf(alpha x / sqrt 2) + 1)`` is handled as
    ``exp(-log(2 Phi(alpha x)))`` so the vanishing tail never forms 0/0.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise DomainError("alpha must be finite")
    a2 = alpha * alpha
    pref = _SN_CONST / (a2 + 1.0) ** 2

    def integrand(x):
        log_one_plus_erf = math.log(2.0) + special.log_ndtr(alpha * x)
        return np.exp(-0.5 * (2.0 * a2 + 1.0) * x * x - log_one_plus_erf)

    res = quad.integrate_real_line(integrand, 0.0, scale=1.0 / math.sqrt(a2 + 0.5), rel_tol=tol)
    return pref * res.value


def wim_closed_form(model: ParametricModel, params, *, convention: str = "unit_sigma") -> WimMatrix:
    """Analytic WIM for location-scale, skew-normal (alpha), exponential and regression.

    For regression ``convention="unit_sigma"`` returns ``blockdiag(X'X, 1)``;
    ``convention="additive"`` returns ``blockdiag(X'X, n)``, the sum of the
    per-observation matrices, which is what :func:`wim_generic` computes.
    """
    theta = model.check_params(params)
    if isinstance(model, LocationScale):
        return WimMatrix(np.diag([1.0, model.base.second_moment]), "closed_form")
    if isinstance(model, SkewNormal):
        return WimMatrix([[sn_alpha_wim(theta[0])]], "closed_form", 1e-10)
    if isinstance(model, Exponential):
        return WimMatrix([[2.0]], "closed_form")
    if isinstance(model, NormalLinReg):
        if convention not in ("unit_sigma", "additive"):
            raise DomainError(f"unknown regression convention {convention!r}")
        X = model.design
        W = np.zeros((model.dim, model.dim))
        W[:-1, :-1] = X.T @ X
        W[-1, -1] = 1.0 if convention == "unit_sigma" else float(model.n)
        return WimMatrix(W, "closed_form")
    raise CapabilityError(f"no closed-form WIM for {model.name}; use wim_generic")


def wim(model: ParametricModel, params, tol: float = 1e-8) -> WimMatrix:
    """Closed form when available, quadrature otherwise."""
    try:
        return wim_closed_form(model, params)
    except CapabilityError:
        return wim_generic(model, params, tol)


def wim_reparam(W: WimMatrix, J) -> WimMatrix:
    """WIM in new coordinates: ``J' W J`` with ``J_ij = d theta_i / d phi_j``."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != W.dim:
        raise DomainError(f"Jacobian shape {J.shape} incompatible with a {W.dim}x{W.dim} WIM")
    if not np.all(np.isfinite(J)):
        raise DomainError("Jacobian has non-finite entries")
    return WimMatrix(J.T @ W.entries @ J, W.method, W.tol)


# ---------------------------------------------------------------------------
# Wasserstein-2 distance


def _w2_squared(model_a, theta_a, model_b, theta_b, tol):
    def integrand(u):
        return (np.asarray(model_a.quantile(theta_a, u)) - np.asarray(model_b.quantile(theta_b, u))) ** 2

    try:
        res = quad.integrate_interval(integrand, 0.0, 1.0, tol, rel_tol=tol)
        return res.value, res.error
    except QuadratureError as exc:
        if "not finite" not in str(exc):
            raise
    # quantiles blew up at the extremes: clip and widen the error by a tail bound
    eps = QUANTILE_EPS
    res = quad.integrate_interval(integrand, eps, 1.0 - eps, tol, rel_tol=tol)
    edge = float(integrand(np.array([eps, 1.0 - eps])).max())
    return res.value, res.error + 2.0 * eps * edge


def wasserstein2_distance(model_a, params_a, model_b, params_b, tol: float = 1e-10) -> float:
    """``sqrt(int_0^1 (F_a^{-1}(u) - F_b^{-1}(u))^2 du)``."""
    theta_a = model_a.check_params(params_a)
    theta_b = model_b.check_params(params_b)
    value, _ = _w2_squared(model_a, theta_a, model_b, theta_b, tol)
    return math.sqrt(max(value, 0.0))


def check_local_expansion(model, params, delta, tol: float = 1e-12) -> float:
    """``|W2(theta, theta + delta)^2 - delta' W(theta) delta|``."""
    theta = model.check_params(params)
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.size != model.dim:
        raise DomainError(f"delta must have length {model.dim}")
    moved = model.check_params(theta + delta)
    if not np.any(delta):
        return 0.0
    d2, _ = _w2_squared(model, theta, model, moved, tol)
    W = wim_generic(model, theta, tol=min(tol, 1e-10)).entries
    return abs(d2 - float(delta @ W @ delta))
