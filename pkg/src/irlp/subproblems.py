"""Weighted subproblem machinery shared by all reweighting drivers: weight
rules, closed-form proximal steps for alpha in {1, 2}, the backtracking line
search on the model curvature L, and exact weighted-l_alpha minimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    InternalSolverError,
    LeastSquaresObjective,
    NonConvergenceError,
    as_vector,
)


@dataclass(frozen=True)
class ProxConfig:
    """Line-search constants: curvature bounds, backtracking factor tau > 1,
    and the sufficient-descent constant c."""

    L_min: float = 1e-8
    L_max: float = 1e8
    tau: float = 1.1
    c: float = 1e-4

    def __post_init__(self):
        if not 0 < self.L_min < self.L_max:
            raise ValueError("require 0 < L_min < L_max")
        if self.tau <= 1:
            raise ValueError("tau must exceed 1")
        if self.c <= 0:
            raise ValueError("c must be positive")

    def clamp(self, L):
        return min(max(L, self.L_min), self.L_max)


@dataclass(frozen=True)
class Weights:
    """Per-coordinate reweighting multipliers s and the penalty exponent alpha."""

    s: np.ndarray
    alpha: int

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("weights must be finite and nonnegative")
        if self.alpha not in (1, 2):
            raise ValueError("alpha must be 1 or 2")
        object.__setattr__(self, "s", s)


def weights_type12(x, eps_vec, p, alpha):
    """s_i = (|x_i|^alpha + eps_i)^(p/alpha - 1), requiring eps_i > 0."""
    x = as_vector(x)
    eps_vec = np.broadcast_to(np.asarray(eps_vec, dtype=float), x.shape)
    if np.any(eps_vec <= 0):
        raise ValueError("smoothing offsets must be strictly positive")
    s = (np.abs(x) ** alpha + eps_vec) ** (p / alpha - 1.0)
    return Weights(s=s, alpha=alpha)


def weights_new_irl1(x, u_eps, q):
    """s_i = min{u_eps, |x_i|^(1/(q-1))}, with |0|^(1/(q-1)) read as +inf so
    that zero coordinates receive the cap u_eps."""
    if u_eps <= 0:
        raise ValueError("u_eps must be positive")
    if q >= 0:
        raise ValueError("q must be negative")
    x = as_vector(x)
    ax = np.abs(x)
    s = np.full_like(ax, u_eps)
    nz = ax > 0
    s[nz] = np.minimum(u_eps, ax[nz] ** (1.0 / (q - 1.0)))
    return Weights(s=s, alpha=1)


def prox_weighted_l1(x_bar, g, L, w):
    """Soft-threshold step: exact minimizer of
    g^T(x - x_bar) + (L/2)||x - x_bar||^2 + sum_i w_i |x_i|."""
    if L <= 0:
        raise ValueError("L must be positive")
    z = x_bar - g / L
    return np.sign(z) * np.maximum(np.abs(z) - w / L, 0.0)


def prox_weighted_l2(x_bar, g, L, w):
    """Exact minimizer of g^T(x - x_bar) + (L/2)||x - x_bar||^2
    + (1/2) sum_i w_i x_i^2, i.e. (L*x_bar - g) / (L + w)."""
    if L <= 0:
        raise ValueError("L must be positive")
    return (L * x_bar - g) / (L + w)


def line_search_step(obj_gap, prox, x_k, L0, cfg, lipschitz, audit=None):
    """Backtracking proximal step on the curvature L.

    Repeats x_new = prox(x_k, L), accepting once
    obj_gap(x_k, x_new) >= (c/2) * ||x_new - x_k||^2 and multiplying L by tau
    otherwise. Acceptance is guaranteed once L >= (lipschitz + c)/2, so L
    exceeding tau*(lipschitz + c) means the supplied Lipschitz constant (or
    the caller's obj_gap) is wrong.

    Returns (x_new, L_final, inner_count). When ``audit`` is a list the inner
    count is appended to it.
    """
    L = cfg.clamp(L0)
    hard_cap = cfg.tau * (lipschitz + cfg.c)
    count = 0
    while True:
        count += 1
        x_new = prox(x_k, L)
        dx = x_new - x_k
        if obj_gap(x_k, x_new) >= 0.5 * cfg.c * float(dx @ dx):
            if audit is not None:
                audit.append(count)
            return x_new, L, count
        L *= cfg.tau
        if L > hard_cap:
            raise InternalSolverError(
                f"line search rejected all steps up to L={L:.3e} > "
                f"tau*(L_f+c)={hard_cap:.3e}"
            )


def smoothed_lp_objective(prob, x, eps_vec, alpha):
    """F_bar_{alpha,eps}(x) = f(x) + lam * sum_i (|x_i|^alpha + eps_i)^(p/alpha),
    the smoothed objective the type-1/2 methods monotonically decrease."""
    x = as_vector(x, prob.n)
    eps_vec = np.broadcast_to(np.asarray(eps_vec, dtype=float), x.shape)
    reg = np.sum((np.abs(x) ** alpha + eps_vec) ** (prob.p / alpha))
    return prob.objective.eval(x) + prob.lam * float(reg)


def _weighted_penalty(w, alpha, x):
    if alpha == 1:
        return float(w @ np.abs(x))
    return 0.5 * float(w @ (x * x))


def _weighted_kkt_residual(w, alpha, x, g):
    if alpha == 2:
        return float(np.max(np.abs(g + w * x), initial=0.0))
    res = np.where(
        x != 0.0,
        np.abs(g + w * np.sign(x)),
        np.maximum(np.abs(g) - w, 0.0),
    )
    return float(np.max(res, initial=0.0))


def minimize_weighted(
    objective,
    w,
    alpha,
    tol,
    x_start,
    cfg=None,
    max_steps=100_000,
    audit=None,
):
    """Minimize objective.eval(x) + sum_i w_i|x_i| (alpha=1) or
    + (1/2) sum_i w_i x_i^2 (alpha=2) by proximal descent.

    Steps use the shared backtracking line search with Barzilai-Borwein
    curvature initialization and stop once the coordinate-wise subgradient
    optimality residual drops to ``tol``. The iterates never increase the
    composite objective, so callers warm-starting at the previous outer
    iterate keep their monotone-descent guarantees. Raises
    NonConvergenceError (carrying the best iterate) past ``max_steps``.
    """
    cfg = cfg or ProxConfig()
    w = np.asarray(w, dtype=float)
    x = as_vector(x_start, objective.dim).copy()
    prox_op = prox_weighted_l1 if alpha == 1 else prox_weighted_l2
    lipschitz = objective.lipschitz
    fx = objective.eval(x)
    g = objective.grad(x)
    L_prev = 1.0
    prev_x = prev_g = None
    for _ in range(max_steps):
        if _weighted_kkt_residual(w, alpha, x, g) <= tol:
            return x
        if prev_x is None:
            L0 = cfg.clamp(1.0)
        else:
            L0 = bb_initial_L(x - prev_x, g - prev_g, cfg, fallback=L_prev)
        phi_x = fx + _weighted_penalty(w, alpha, x)
        f_last = [fx]

        def obj_gap(_, x_new):
            f_last[0] = objective.eval(x_new)
            return phi_x - (f_last[0] + _weighted_penalty(w, alpha, x_new))

        x_new, L_prev, _ = line_search_step(
            obj_gap,
            lambda xc, L: prox_op(xc, g, L, w),
            x,
            L0,
            cfg,
            lipschitz,
            audit=audit,
        )
        prev_x, prev_g = x, g
        x = x_new
        fx = f_last[0]
        g = objective.grad(x)
    raise NonConvergenceError(
        f"weighted subproblem did not reach tol={tol:.2e} in {max_steps} steps",
        best_x=x,
    )


def bb_initial_L(dx, dg, cfg, fallback):
    """Barzilai-Borwein curvature estimate dx.dg / ||dx||^2 clamped to
    [L_min, L_max]; falls back to the previous accepted L (clamped) when the
    ratio is degenerate (zero step, non-finite, or non-positive)."""
    dx = np.asarray(dx, dtype=float)
    dg = np.asarray(dg, dtype=float)
    nrm2 = float(dx @ dx)
    if nrm2 == 0.0:
        return cfg.clamp(fallback)
    ratio = float(dx @ dg) / nrm2
    if not np.isfinite(ratio) or ratio <= 0.0:
        return cfg.clamp(fallback)
    return cfg.clamp(ratio)


def _ridge_direct(ls, w):
    """Exact minimizer of 0.5||Ax-b||^2 + 0.5 sum_i w_i x_i^2 for dense A.

    Uses the push-through identity to solve an m x m system when all weights
    are positive and m < n; otherwise falls back to a least-squares solve of
    the stacked system, which also covers singular cases (w with zeros)
    by returning the minimum-norm minimizer.
    """
    A, b = ls.A, ls.b
    m, n = A.shape
    if np.all(w > 0) and m < n:
        d = 1.0 / w
        K = A @ (d[:, None] * A.T)
        K[np.diag_indices_from(K)] += 1.0
        y = np.linalg.solve(K, b)
        return d * (A.T @ y)
    M = np.vstack([A, np.diag(np.sqrt(w))])
    rhs = np.concatenate([b, np.zeros(n)])
    return np.linalg.lstsq(M, rhs, rcond=None)[0]


def exact_weighted_subproblem(
    prob, w, tol, x_start, cfg=None, max_steps=100_000, audit=None
):
    """Solve min_x f(x) + (lam*p/alpha) * sum_i s_i |x_i|^alpha.

    For alpha=2 over a least-squares objective the solution comes from one
    linear solve; every other case runs the proximal-descent loop to a
    coordinate-wise optimality residual of ``tol``.
    """
    w_eff = prob.lam * prob.p * w.s
    if w.alpha == 2 and isinstance(prob.objective, LeastSquaresObjective):
        return _ridge_direct(prob.objective, w_eff)
    return minimize_weighted(
        prob.objective,
        w_eff,
        w.alpha,
        tol,
        x_start,
        cfg=cfg,
        max_steps=max_steps,
        audit=audit,
    )
