"""Lipschitz approximation of the lp regularizer.

h_u(t) = min_{0<=s<=u} p*(|t|*s - s^q/q) replaces |t|^p coordinate-wise; it is
p*u-Lipschitz, sandwiches |t|^p within u^q from above, and yields the
approximate objective F_eps(x) = f(x) + lam * sum_i h_{u_eps}(x_i) with
0 <= F_eps - F <= eps. Below a computable eps threshold, stationary points of
F_eps are stationary points of the original problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, LpProblem, as_vector, objective_F


def _check_hu_params(u, p, q):
    if u <= 0:
        raise ValueError(f"u must be positive, got {u}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if q >= 0:
        raise ValueError(f"q must be negative (conjugate of p in (0,1)), got {q}")


def h_u(t, u, p, q):
    """Evaluate h_u(t), element-wise over t.

    Closed form: |t|^p on |t| > u^(q-1), and p*(|t|*u - u^q/q) on
    |t| <= u^(q-1); the two branches agree at the knee |t| = u^(q-1).
    """
    _check_hu_params(u, p, q)
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    knee = u ** (q - 1.0)
    out = np.where(at > knee, at**p, p * (at * u - u**q / q))
    if out.ndim == 0:
        return float(out)
    return out


def h_u_subdiff(t, u, p, q):
    """Clarke subdifferential of h_u at scalar t, as a closed interval (lo, hi).

    On |t| > u^(q-1) it is the singleton {p*|t|^(p-1)*sgn(t)}; on
    0 < |t| <= u^(q-1) the singleton {p*u*sgn(t)}; at t = 0 the interval
    [-p*u, p*u].
    """
    _check_hu_params(u, p, q)
    t = float(t)
    knee = u ** (q - 1.0)
    if t == 0.0:
        return (-p * u, p * u)
    if abs(t) > knee:
        g = p * abs(t) ** (p - 1.0) * np.sign(t)
    else:
        g = p * u * np.sign(t)
    return (float(g), float(g))


@dataclass(frozen=True)
class EpsApprox:
    """State of the eps-approximation: the cap u_eps on the auxiliary variable
    and the branch knee of h_{u_eps}. Satisfies n * u_eps^q = eps / lam."""

    prob: LpProblem
    eps: float
    u_eps: float = field(init=False)
    knee: float = field(init=False)

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        n = self.prob.n
        u = (self.eps / (self.prob.lam * n)) ** (1.0 / self.prob.q)
        knee = u ** (self.prob.q - 1.0)
        if not (np.isfinite(u) and u > 0 and np.isfinite(knee) and knee > 0):
            raise ConfigurationError(
                f"eps={self.eps} drives u_eps or its knee out of floating-point "
                "range; choose a larger eps"
            )
        object.__setattr__(self, "u_eps", u)
        object.__setattr__(self, "knee", knee)


def F_eps(approx, x):
    """Evaluate F_eps(x) = f(x) + lam * sum_i h_{u_eps}(x_i)."""
    prob = approx.prob
    x = as_vector(x, prob.n)
    hsum = float(np.sum(h_u(x, approx.u_eps, prob.p, prob.q)))
    return prob.objective.eval(x) + prob.lam * hsum


def _psi(prob, F0, eps):
    """Right-hand side of the eps admissibility bound; decreasing in eps."""
    gap = F0 + eps - prob.objective.lower_bound
    if gap < 0:
        raise ValueError("F(x0) + eps fell below the lower bound of f")
    root = np.sqrt(2.0 * prob.objective.lipschitz * gap)
    if root == 0.0:
        return np.inf
    return prob.n * prob.lam * (root / (prob.lam * prob.p)) ** prob.q


def eps_bound_satisfied(prob, x0, eps):
    """Whether eps strictly satisfies the admissibility bound 0 < eps < psi(eps)
    for the given starting point."""
    if eps <= 0:
        return False
    F0 = objective_F(prob, as_vector(x0, prob.n))
    return eps < _psi(prob, F0, eps)


def eps_threshold(prob, x0, tol=1e-6):
    """Largest usable eps for the fixed-eps reweighted method, minus ``tol``.

    The admissible eps satisfy the strict bound
    eps < psi(eps) := n*lam*[sqrt(2*L_f*(F(x0)+eps-f_lb)) / (lam*p)]^q.
    Since q < 0, psi is strictly decreasing, so the supremum of admissible
    values is the unique fixed point of eps = psi(eps); it is located by
    bisection and the returned value steps back by ``tol`` to keep the
    inequality strict.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = as_vector(x0, prob.n)
    F0 = objective_F(prob, x0)
    if not np.isfinite(F0):
        raise ValueError("F(x0) is not finite")
    if prob.objective.lipschitz <= 0:
        raise ConfigurationError("eps_threshold requires a positive Lipschitz constant")

    def psi(eps):
        return _psi(prob, F0, eps)

    hi = psi(0.0)
    if not np.isfinite(hi):
        hi = 1.0
        for _ in range(2000):
            if psi(hi) <= hi:
                break
            hi *= 2.0
        else:
            raise ConfigurationError("could not bracket the eps fixed point")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if psi(mid) > mid:
            lo = mid
        else:
            hi = mid
    eps_hat = lo - tol
    if eps_hat <= 0:
        raise ConfigurationError(
            f"eps fixed point {lo:.3e} is not larger than tol={tol:.3e}"
        )
    assert eps_hat < psi(eps_hat)
    return eps_hat
