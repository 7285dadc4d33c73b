"""Problem model for lp-regularized minimization: smooth-term oracles and the
composite objective F(x) = f(x) + lam * sum_i |x_i|^p with p in (0, 1)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ConfigurationError(ValueError):
    """A parameter combination that the algorithms cannot accept."""


class NonConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap.

    Carries the best iterate found so far in ``best_x``.
    """

    def __init__(self, message, best_x):
        super().__init__(message)
        self.best_x = np.asarray(best_x, dtype=float)


class InternalSolverError(RuntimeError):
    """An internal guarantee was violated (indicates a bug or a wrong Lipschitz
    constant), as opposed to a bad input."""


def as_vector(x, n=None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected length {n}, got {x.shape[0]}")
    return x


def conjugate_exponent(p):
    """Exponent q with 1/p + 1/q = 1; negative for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p / (p - 1.0)


def lp_norm_p(x, p):
    """Return sum_i |x_i|^p, the p-th power of the lp quasi-norm, for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("lp_norm_p: input has non-finite entries")
    return float(np.sum(np.abs(x) ** p))


def estimate_lipschitz(A, iters=200, tol=1e-8):
    """Estimate sigma_max(A)^2 by power iteration on A^T A.

    Returns 0.0 for the zero matrix. Emits a RuntimeWarning and returns the
    best estimate if the relative change has not dropped below ``tol`` within
    ``iters`` iterations. The returned value carries no safety margin; callers
    that need a certified upper bound multiply by (1 + 1e-6).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("estimate_lipschitz expects a matrix")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not np.any(A):
        return 0.0
    rng = np.random.Generator(np.random.Philox(0))
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * max(abs(lam_new), np.finfo(float).tiny):
            return lam_new
        lam = lam_new
    warnings.warn(
        "power iteration did not converge; returning best spectral estimate",
        RuntimeWarning,
    )
    return lam


@dataclass(frozen=True)
class SmoothObjective:
    """Oracle for a smooth term f: value, gradient, gradient Lipschitz constant
    and a lower bound on f over R^n. ``hess`` is optional and only needed for
    second-order stationarity checks."""

    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    lower_bound: float
    dim: int
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None


class LeastSquaresObjective:
    """f(x) = 0.5 * ||A x - b||_2^2 with a certified gradient Lipschitz constant.

    The Lipschitz constant is the power-iteration estimate of sigma_max(A)^2
    inflated by a factor 1.000001 so that it is an upper bound; the lower
    bound is 0, valid everywhere.
    """

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        b = as_vector(b, A.shape[0])
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        self.A = A
        self.b = b
        self.dim = A.shape[1]
        self.lipschitz = 1.000001 * estimate_lipschitz(A)
        self.lower_bound = 0.0

    def eval(self, x):
        r = self.A @ as_vector(x, self.dim) - self.b
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self.A.T @ (self.A @ as_vector(x, self.dim) - self.b)

    def eval_with_residual(self, x):
        """(f(x), A x - b); lets callers derive the gradient for one extra
        matrix-vector product instead of two."""
        r = self.A @ as_vector(x, self.dim) - self.b
        return 0.5 * float(r @ r), r

    def grad_from_residual(self, r):
        return self.A.T @ r

    def hess(self, x=None):
        return self.A.T @ self.A


@dataclass(frozen=True)
class LpProblem:
    """Composite problem min F(x) = f(x) + lam * sum_i |x_i|^p.

    ``objective`` is any smooth-term oracle exposing eval/grad/lipschitz/
    lower_bound/dim (SmoothObjective or LeastSquaresObjective). ``q`` is the
    conjugate exponent of p and is always negative.
    """

    objective: object
    lam: float
    p: float
    q: float = field(init=False)

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        object.__setattr__(self, "q", conjugate_exponent(self.p))

    @property
    def n(self):
        return self.objective.dim


def objective_F(prob, x):
    """Evaluate F(x) = f(x) + lam * sum_i |x_i|^p."""
    x = as_vector(x, prob.n)
    return prob.objective.eval(x) + prob.lam * lp_norm_p(x, prob.p)
