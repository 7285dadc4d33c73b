"""Stationarity residuals, second-order certificates, and the lower bounds on
nonzero entries of stationary points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_vector

PSD_EIG_TOL = -1e-8


def first_order_residual(prob, x):
    """Inf-norm of Diag(x) * grad f(x) + lam * p * |x|^p.

    Zero exactly at first-order stationary points of the lp-regularized
    objective; this is also the global termination quantity of the solvers.
    """
    x = as_vector(x, prob.n)
    r = x * prob.objective.grad(x) + prob.lam * prob.p * np.abs(x) ** prob.p
    return float(np.max(np.abs(r))) if r.size else 0.0


def second_order_check(prob, x, hessian):
    """Whether x satisfies the second-order stationarity condition.

    Evaluated on the support B = {i : x_i != 0} as positive semidefiniteness
    of H_BB + lam*p*(p-1)*Diag(|x_B|^(p-2)), equivalent to the full-space
    scaled form. Vacuously true for x = 0.
    """
    x = as_vector(x, prob.n)
    H = np.asarray(hessian, dtype=float)
    if H.shape != (prob.n, prob.n):
        raise ValueError(f"hessian must be {prob.n}x{prob.n}, got {H.shape}")
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-10:
        raise ValueError("hessian is not symmetric within 1e-10")
    support = np.flatnonzero(x)
    if support.size == 0:
        return True
    xb = x[support]
    M = H[np.ix_(support, support)] + prob.lam * prob.p * (prob.p - 1.0) * np.diag(
        np.abs(xb) ** (prob.p - 2.0)
    )
    return bool(np.min(np.linalg.eigvalsh(M)) >= PSD_EIG_TOL)


def lower_bound_first(prob, F_x0, eps=0.0):
    """Lower bound on |x_i| over nonzero entries of any first-order stationary
    point x with F(x) <= F_x0 + eps:

        (lam*p / sqrt(2*L_f*(F_x0 + eps - f_lb)))^(1/(1-p))
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    L = prob.objective.lipschitz
    gap = F_x0 + eps - prob.objective.lower_bound
    if gap < 0:
        raise ValueError("F_x0 + eps lies below the lower bound of f")
    if L == 0.0:
        return np.inf
    denom = np.sqrt(2.0 * L * gap)
    if denom == 0.0:
        return np.inf
    return float((prob.lam * prob.p / denom) ** (1.0 / (1.0 - prob.p)))


def lower_bound_second(prob):
    """Lower bound (lam*p*(1-p)/L_f)^(1/(2-p)) on nonzero entries of
    second-order stationary points."""
    L = prob.objective.lipschitz
    if L == 0.0:
        return np.inf
    return float((prob.lam * prob.p * (1.0 - prob.p) / L) ** (1.0 / (2.0 - prob.p)))


@dataclass(frozen=True)
class StationarityReport:
    """Optimality certificate for a candidate point.

    Entries are classified as zero iff exactly 0.0 (the solvers produce exact
    zeros via soft-thresholding). ``second_order_psd`` is None when no Hessian
    oracle was available.
    """

    residual_inf: float
    support: np.ndarray
    min_abs_on_support: float
    first_order_bound: float
    second_order_bound: float
    second_order_psd: Optional[bool] = None


def build_report(prob, x, F_x0, eps=0.0, hessian=None):
    """Assemble a StationarityReport for x given the run's F(x0) and eps budget."""
    x = as_vector(x, prob.n)
    support = np.flatnonzero(x)
    min_abs = float(np.min(np.abs(x[support]))) if support.size else np.inf
    if hessian is None and getattr(prob.objective, "hess", None) is not None:
        hessian = prob.objective.hess(x)
    psd = second_order_check(prob, x, hessian) if hessian is not None else None
    return StationarityReport(
        residual_inf=first_order_residual(prob, x),
        support=support,
        min_abs_on_support=min_abs,
        first_order_bound=lower_bound_first(prob, F_x0, eps),
        second_order_bound=lower_bound_second(prob),
        second_order_psd=psd,
    )
