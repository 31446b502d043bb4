"""Adaptive Gauss-Kronrod quadrature.

All integrators accept vectorised integrands: ``f`` receives a 1-d array of
nodes of shape ``(m,)`` and returns either shape ``(m,)`` or ``(k, m)`` for a
vector of ``k`` integrals sharing the same subdivision. Subdivision is global
(one interval list for all components) and stops once every component meets
``max(tol, rel_tol * |value|)``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, QuadratureError

DEFAULT_TOL = 1e-8
DEFAULT_BUDGET = 1_000_000

# 21-point Kronrod extension of the 10-point Gauss-Legendre rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208983921447,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(21)
# Gauss nodes are the odd-indexed Kronrod nodes on each side.
_GAUSS_W[[1, 3, 5, 7, 9]] = _WG
_GAUSS_W[[19, 17, 15, 13, 11]] = _WG

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

Scalar = Union[float, np.ndarray]


@dataclass(frozen=True)
class QuadResult:
    """Outcome of an adaptive integration.

    ``value`` and ``error`` are floats for scalar integrands and arrays of
    shape ``(k,)`` for vector-valued ones.
    """

    value: Scalar
    error: Scalar
    evaluations: int

    def __float__(self):
        return float(self.value)


def _rule(f, a, b):
    """Apply the 21-point Kronrod rule on [a, b]; return (K, err, resabs)."""
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fx = np.asarray(f(center + half * NODES), dtype=float)
    if fx.shape[-1] != 21:
        raise ValueError("integrand must return an array whose last axis matches the nodes")
    fx = np.where(np.isfinite(fx), fx, np.nan)
    if np.isnan(fx).any():
        raise QuadratureError(
            f"integrand is not finite on [{a!r}, {b!r}]", value=None, error=None
        )
    kron = fx @ _KRONROD_W
    gauss = fx @ _GAUSS_W
    mean = kron / 2.0
    resasc = np.abs(fx - mean[..., None]) @ _KRONROD_W * abs(half)
    resabs = np.abs(fx) @ _KRONROD_W * abs(half)
    kron = kron * half
    err = np.abs((kron - gauss * half))
    # QUADPACK error heuristic
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5), err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _TINY / (50.0 * _EPS), np.maximum(floor, scaled), scaled)
    return kron, err, resabs


def _check_tol(tol, rel_tol):
    if tol < 0 or rel_tol < 0 or (tol == 0 and rel_tol == 0):
        raise DomainError("tolerances must be non-negative and not both zero")


def _adaptive(f, breaks, tol, rel_tol, budget):
    breaks = np.asarray(breaks, dtype=float)
    pieces = []
    evaluations = 0
    for a, b in zip(breaks[:-1], breaks[1:]):
        val, err, _ = _rule(f, a, b)
        evaluations += 21
        pieces.append([a, b, val, err, False])

    total = sum(p[2] for p in pieces)
    total_err = sum(p[3] for p in pieces)
    scalar = np.ndim(total) == 0

    def tolerance(tot):
        return np.maximum(tol, rel_tol * np.abs(tot))

    def priority(err, tot):
        return float(np.max(err / tolerance(tot)))

    heap = []
    for idx, p in enumerate(pieces):
        heapq.heappush(heap, (-priority(p[3], total), idx))

    while True:
        if np.all(total_err <= tolerance(total)):
            break
        if not heap:
            raise QuadratureError(
                "roundoff limits prevented reaching the requested tolerance",
                value=total, error=total_err, evaluations=evaluations,
            )
        if evaluations + 42 > budget:
            raise QuadratureError(
                f"evaluation budget of {budget} exhausted",
                value=total, error=total_err, evaluations=evaluations,
            )
        _, idx = heapq.heappop(heap)
        a, b, val, err, _ = pieces[idx]
        mid = 0.5 * (a + b)
        if not (a < mid < b) or (b - a) <= 4 * _EPS * max(abs(a), abs(b), _TINY):
            # Interval cannot be split further: its error is final.
            pieces[idx][4] = True
            continue
        lval, lerr, _ = _rule(f, a, mid)
        rval, rerr, _ = _rule(f, mid, b)
        evaluations += 42
        total = total - val + lval + rval
        total_err = total_err - err + lerr + rerr
        pieces[idx] = [a, mid, lval, lerr, False]
        pieces.append([mid, b, rval, rerr, False])
        heapq.heappush(heap, (-priority(lerr, total), idx))
        heapq.heappush(heap, (-priority(rerr, total), len(pieces) - 1))

    # Recompute the sum once from the pieces to shed accumulated update error.
    value = sum(p[2] for p in pieces)
    error = np.abs(total_err)
    if scalar:
        return QuadResult(float(value), float(error), evaluations)
    return QuadResult(np.asarray(value), np.asarray(error), evaluations)


def integrate_interval(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    *,
    rel_tol: float | None = None,
    budget: int = DEFAULT_BUDGET,
    points: Sequence[float] = (),
) -> QuadResult:
    """Integrate ``f`` over the finite interval ``[a, b]``.

    Parameters
    ----------
    f : callable
        Vectorised integrand.
    a, b : float
        Finite limits with ``a < b``.
    tol : float
        Absolute tolerance; also the relative tolerance unless ``rel_tol``
        is given.
    budget : int
        Maximum number of integrand evaluations.
    points : sequence of float
        Optional interior breakpoints used for the initial partition.

    Raises
    ------
    QuadratureError
        If the budget runs out; the exception carries the best estimate.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise DomainError("integrate_interval needs finite limits")
    if not a < b:
        raise DomainError(f"need a < b, got a={a!r}, b={b!r}")
    rel = tol if rel_tol is None else rel_tol
    _check_tol(tol, rel)
    inner = sorted(p for p in points if a < p < b)
    return _adaptive(f, [a, *inner, b], tol, rel, budget)


def integrate_real_line(
    f: Callable[[np.ndarray], np.ndarray],
    tol: float = DEFAULT_TOL,
    *,
    loc: float = 0.0,
    scale: float = 1.0,
    rel_tol: float | None = None,
    budget: int = DEFAULT_BUDGET,
) -> QuadResult:
    """Integrate ``f`` over the whole real line.

    Uses ``x = loc + scale * t / (1 - t**2)`` with ``t`` in ``(-1, 1)``; ``loc``
    and ``scale`` should roughly locate the bulk of the integrand.
    """
    if scale <= 0:
        raise DomainError("scale must be positive")

    def g(t):
        one_m = 1.0 - t * t
        x = loc + scale * t / one_m
        jac = scale * (1.0 + t * t) / (one_m * one_m)
        return f(x) * jac

    rel = tol if rel_tol is None else rel_tol
    _check_tol(tol, rel)
    return _adaptive(g, [-1.0, -0.5, 0.0, 0.5, 1.0], tol, rel, budget)


def integrate_half_line(
    f: Callable[[np.ndarray], np.ndarray],
    a: float = 0.0,
    tol: float = DEFAULT_TOL,
    *,
    scale: float = 1.0,
    rel_tol: float | None = None,
    budget: int = DEFAULT_BUDGET,
) -> QuadResult:
    """Integrate ``f`` over ``(a, inf)`` via ``x = a + scale * t / (1 - t)``."""
    if scale <= 0:
        raise DomainError("scale must be positive")

    def g(t):
        one_m = 1.0 - t
        return f(a + scale * t / one_m) * (scale / (one_m * one_m))

    rel = tol if rel_tol is None else rel_tol
    _check_tol(tol, rel)
    return _adaptive(g, [0.0, 0.5, 1.0], tol, rel, budget)


def integrate_support(f, support, tol=DEFAULT_TOL, *, loc=0.0, scale=1.0,
                      rel_tol=None, budget=DEFAULT_BUDGET) -> QuadResult:
    """Dispatch on a support interval ``(lo, hi)`` to the matching integrator."""
    lo, hi = support
    if np.isneginf(lo) and np.isposinf(hi):
        return integrate_real_line(f, tol, loc=loc, scale=scale, rel_tol=rel_tol, budget=budget)
    if np.isfinite(lo) and np.isposinf(hi):
        return integrate_half_line(f, lo, tol, scale=scale, rel_tol=rel_tol, budget=budget)
    if np.isneginf(lo) and np.isfinite(hi):
        return integrate_half_line(lambda y: f(-y), -hi, tol, scale=scale,
                                   rel_tol=rel_tol, budget=budget)
    return integrate_interval(f, lo, hi, tol, rel_tol=rel_tol, budget=budget)


def expectation(model, params, g, tol: float = DEFAULT_TOL) -> float:
    """Expectation of ``g(X)`` under ``model`` at ``params`` by quadrature."""
    params = model.check_params(params)
    loc, scale = model.integration_hint(params)

    def integrand(x):
        return g(x) * model.pdf(params, x)

    return integrate_support(integrand, model.support, tol, loc=loc, scale=scale).value
