"""Reweighted-minimization drivers.

Six modes: the first-type method (outer phases with vanishing smoothing eps^k
and per-phase inexact stationarity targets delta_k), the second-type method
(one reweighted subproblem per shrinking eps^k), and the fixed-eps method
(weights capped at u_eps, eps chosen once below the admissibility threshold).
Each comes in an ``exact`` flavor (weighted subproblems solved to tolerance)
and a ``prox`` flavor (one closed-form proximal step per iteration, accepted
by the backtracking descent test). All modes share Barzilai-Borwein curvature
initialization, the termination criterion
||Diag(x) grad f(x) + lam*p*|x|^p||_inf <= tol, and per-iterate tracing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

from .approx import EpsApprox, F_eps, eps_bound_satisfied, eps_threshold, h_u
from .core import (
    ConfigurationError,
    NonConvergenceError,
    as_vector,
    lp_norm_p,
)
from .stationarity import build_report
from .subproblems import (
    bb_initial_L,
    exact_weighted_subproblem,
    line_search_step,
    minimize_weighted,
    prox_weighted_l1,
    prox_weighted_l2,
    ProxConfig,
    smoothed_lp_objective,
    weights_new_irl1,
    weights_type12,
)


class Method(str, Enum):
    TYPE1_EXACT = "type1_exact"
    TYPE1_PROX = "type1_prox"
    TYPE2_EXACT = "type2_exact"
    TYPE2_PROX = "type2_prox"
    NEW_IRL1_EXACT = "new_irl1_exact"
    NEW_IRL1_PROX = "new_irl1_prox"


class Status(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    ERROR = "error"


# The slow 0.995^k schedule needs ~700-1200 iterations to push the residual
# below 1e-4 on the benchmark instances, so the second-type cap exceeds the
# other defaults.
_DEFAULT_MAX_OUTER = {
    Method.TYPE1_EXACT: 50,
    Method.TYPE1_PROX: 50,
    Method.TYPE2_EXACT: 1500,
    Method.TYPE2_PROX: 1500,
    Method.NEW_IRL1_EXACT: 500,
    Method.NEW_IRL1_PROX: 500,
}


def default_eps_schedule(method):
    """0.1^k for the first-type method, 0.995^k for the second type."""
    method = Method(method)
    if method in (Method.TYPE1_EXACT, Method.TYPE1_PROX):
        return lambda k: 0.1**k
    if method in (Method.TYPE2_EXACT, Method.TYPE2_PROX):
        return lambda k: 0.995**k
    raise ValueError(f"{method.value} does not take an eps schedule")


def default_delta_schedule():
    return lambda k: 0.1**k


@dataclass
class SolverConfig:
    """Driver configuration. ``eps_schedule`` maps an iteration (or phase)
    index to a positive scalar or length-n vector; ``delta_schedule`` applies
    to the first-type method only; ``fixed_eps`` to the fixed-eps method only
    (None means: compute the threshold value at entry)."""

    method: Method
    alpha: int = 1
    eps_schedule: Optional[Callable[[int], object]] = None
    delta_schedule: Optional[Callable[[int], float]] = None
    fixed_eps: Optional[float] = None
    termination_tol: float = 1e-4
    max_outer: Optional[int] = None
    inner_max: int = 1000
    subproblem_tol: Optional[float] = None
    subproblem_max_steps: int = 100_000
    prox_cfg: ProxConfig = field(default_factory=ProxConfig)
    rng_seed: int = 0

    def __post_init__(self):
        self.method = Method(self.method)
        if self.alpha not in (1, 2):
            raise ValueError("alpha must be 1 or 2")
        if self.termination_tol <= 0:
            raise ValueError("termination_tol must be positive")
        if self.max_outer is not None and self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.inner_max < 1:
            raise ValueError("inner_max must be at least 1")

    def resolved_max_outer(self):
        if self.max_outer is not None:
            return self.max_outer
        return _DEFAULT_MAX_OUTER[self.method]


@dataclass
class IterateRecord:
    """Per-iterate trace entry. ``surrogate`` is the method's monotone
    quantity (F_eps, or the smoothed objective at the step's eps); for the
    first-type method ``phase`` groups records sharing one fixed eps, and
    each phase opens with an entry record (inner_count 0, L None) revaluing
    the carried iterate at the new eps."""

    k: int
    phase: Optional[int]
    objective: float
    surrogate: float
    residual: float
    L: Optional[float]
    inner_count: int
    eps: Optional[float]
    norm_inf: float
    support_size: int


@dataclass
class SolverRun:
    method: Method
    alpha: int
    status: Status
    records: List[IterateRecord]
    x0: np.ndarray
    final_x: np.ndarray
    report: object
    metadata: dict

    @property
    def surrogate_trace(self):
        return [r.surrogate for r in self.records]

    @property
    def objective_trace(self):
        return [r.objective for r in self.records]

    @property
    def final_objective(self):
        return self.records[-1].objective

    @property
    def final_residual(self):
        return self.records[-1].residual

    @property
    def outer_iterations(self):
        return self.records[-1].k

    @property
    def total_inner(self):
        return sum(r.inner_count for r in self.records)


def _residual_from_grad(prob, x, g):
    r = x * g + prob.lam * prob.p * np.abs(x) ** prob.p
    return float(np.max(np.abs(r), initial=0.0))


def _perturbed_residual(prob, x, g, eps_vec, alpha):
    ax_a = np.abs(x) ** alpha
    r = x * g + prob.lam * prob.p * ax_a * (ax_a + eps_vec) ** (prob.p / alpha - 1.0)
    return float(np.max(np.abs(r), initial=0.0))


def _eps_vector(value, n, context):
    v = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{context} must be strictly positive and finite")
    return v


def _reg_ae(x, eps_vec, alpha, p):
    return float(np.sum((np.abs(x) ** alpha + eps_vec) ** (p / alpha)))


class _Loop:
    """Shared per-run state: current iterate triple (x, grad, f value),
    Barzilai-Borwein memory, the line-search audit list, and the trace."""

    def __init__(self, prob, cfg, x0):
        self.prob = prob
        self.cfg = cfg
        self.x = as_vector(x0, prob.n).copy()
        if not np.all(np.isfinite(self.x)):
            raise ValueError("x0 must be finite")
        self.x0 = self.x.copy()
        self.g = prob.objective.grad(self.x)
        self.fx = prob.objective.eval(self.x)
        self.records: List[IterateRecord] = []
        self.audit: List[int] = []
        self.k = 0
        self._bb_prev = None
        self._L_last = 1.0

    def residual(self):
        return _residual_from_grad(self.prob, self.x, self.g)

    def objective(self):
        return self.fx + self.prob.lam * lp_norm_p(self.x, self.prob.p)

    def initial_L(self):
        if self._bb_prev is None:
            return self.cfg.prox_cfg.clamp(1.0)
        px, pg = self._bb_prev
        return bb_initial_L(self.x - px, self.g - pg, self.cfg.prox_cfg, fallback=self._L_last)

    def advance(self, x_new, fx_new, L_accepted=None):
        self._bb_prev = (self.x, self.g)
        if L_accepted is not None:
            self._L_last = L_accepted
        self.x = x_new
        self.fx = fx_new
        self.g = self.prob.objective.grad(x_new)
        self.k += 1

    def record(self, surrogate, L, inner_count, eps, phase=None):
        self.records.append(
            IterateRecord(
                k=self.k,
                phase=phase,
                objective=self.objective(),
                surrogate=float(surrogate),
                residual=self.residual(),
                L=L,
                inner_count=inner_count,
                eps=eps,
                norm_inf=float(np.max(np.abs(self.x), initial=0.0)),
                support_size=int(np.count_nonzero(self.x)),
            )
        )

    def exact_step(self, w, sub_tol):
        """Warm-started exact subproblem solve; returns (x_new, fx_new, None, count)."""
        before = len(self.audit)
        x_new = exact_weighted_subproblem(
            self.prob, w, sub_tol, self.x,
            cfg=self.cfg.prox_cfg,
            max_steps=self.cfg.subproblem_max_steps,
            audit=self.audit,
        )
        return x_new, self.prob.objective.eval(x_new), None, len(self.audit) - before

    def prox_step(self, w_eff, alpha, value_gap):
        """One backtracked proximal step; ``value_gap(x_new, f_new)`` is the
        descent-test left-hand side. Returns (x_new, fx_new, L, count)."""
        prox_op = prox_weighted_l1 if alpha == 1 else prox_weighted_l2
        f_last = [self.fx]

        def obj_gap(_, x_new):
            f_last[0] = self.prob.objective.eval(x_new)
            return value_gap(x_new, f_last[0])

        x_new, L, count = line_search_step(
            obj_gap,
            lambda xc, L: prox_op(xc, self.g, L, w_eff),
            self.x,
            self.initial_L(),
            self.cfg.prox_cfg,
            self.prob.objective.lipschitz,
            audit=self.audit,
        )
        return x_new, f_last[0], L, count

    def finish(self, status, eps_report, extra_metadata):
        prob, cfg = self.prob, self.cfg
        if status is Status.MAX_ITERATIONS and self.residual() <= cfg.termination_tol:
            status = Status.CONVERGED
        F_x0 = self.records[0].objective
        report = build_report(prob, self.x, F_x0=F_x0, eps=eps_report)
        metadata = {
            "method": cfg.method.value,
            "alpha": cfg.alpha,
            "lam": prob.lam,
            "p": prob.p,
            "lipschitz": prob.objective.lipschitz,
            "termination_tol": cfg.termination_tol,
            "max_outer": cfg.resolved_max_outer(),
            "rng_seed": cfg.rng_seed,
            "prox_cfg": {
                "L_min": cfg.prox_cfg.L_min,
                "L_max": cfg.prox_cfg.L_max,
                "tau": cfg.prox_cfg.tau,
                "c": cfg.prox_cfg.c,
            },
            "F_x0": F_x0,
            "eps_report": eps_report,
            "line_search_counts": list(self.audit),
        }
        metadata.update(extra_metadata)
        return SolverRun(
            method=cfg.method,
            alpha=cfg.alpha,
            status=status,
            records=self.records,
            x0=self.x0,
            final_x=self.x.copy(),
            report=report,
            metadata=metadata,
        )


def solve_type1(prob, cfg, x0):
    """First-type driver: for each phase, run the reweighted method on the
    eps^k-smoothed objective until the eps^k-perturbed residual drops to
    delta_k; stop once the unperturbed residual reaches the global tolerance.
    """
    cfg = _require(cfg, (Method.TYPE1_EXACT, Method.TYPE1_PROX))
    eps_sched = cfg.eps_schedule or default_eps_schedule(cfg.method)
    delta_sched = cfg.delta_schedule or default_delta_schedule()
    exact = cfg.method == Method.TYPE1_EXACT
    alpha, lam, p = cfg.alpha, prob.lam, prob.p
    loop = _Loop(prob, cfg, x0)
    phases_meta = []
    status = Status.MAX_ITERATIONS
    err = None
    for phase in range(cfg.resolved_max_outer()):
        eps_k = _eps_vector(eps_sched(phase), prob.n, "eps schedule value")
        delta_k = float(delta_sched(phase))
        if delta_k <= 0:
            raise ConfigurationError("delta schedule must be strictly positive")
        eps_scalar = float(np.max(eps_k))
        phases_meta.append({"phase": phase, "eps_max": eps_scalar, "delta": delta_k})
        loop.record(
            loop.fx + lam * _reg_ae(loop.x, eps_k, alpha, p),
            L=None, inner_count=0, eps=eps_scalar, phase=phase,
        )
        converged = False
        phase_done = False
        for _ in range(cfg.inner_max):
            if loop.residual() <= cfg.termination_tol:
                converged = True
                break
            if _perturbed_residual(prob, loop.x, loop.g, eps_k, alpha) <= delta_k:
                phase_done = True
                break
            w = weights_type12(loop.x, eps_k, p, alpha)
            try:
                if exact:
                    sub_tol = cfg.subproblem_tol or min(1e-8, 0.01 * delta_k)
                    x_new, fx_new, L, count = loop.exact_step(w, sub_tol)
                else:
                    phi_x = loop.fx + lam * _reg_ae(loop.x, eps_k, alpha, p)
                    x_new, fx_new, L, count = loop.prox_step(
                        lam * p * w.s, alpha,
                        lambda xn, fn: phi_x - (fn + lam * _reg_ae(xn, eps_k, alpha, p)),
                    )
            except NonConvergenceError as exc:
                err = exc
                break
            loop.advance(x_new, fx_new, L_accepted=L)
            loop.record(
                loop.fx + lam * _reg_ae(loop.x, eps_k, alpha, p),
                L=L, inner_count=count, eps=eps_scalar, phase=phase,
            )
        else:
            err = NonConvergenceError(
                f"phase {phase} did not reach delta={delta_k:.2e} within "
                f"inner_max={cfg.inner_max}",
                loop.x,
            )
        if err is not None:
            status = Status.ERROR
            break
        if converged:
            status = Status.CONVERGED
            break
        assert phase_done
    meta = {"phases": phases_meta, "subproblem_tol_rule": "min(1e-8, 0.01*delta_k)"}
    if err is not None:
        meta["error"] = str(err)
    eps0 = _eps_vector(eps_sched(0), prob.n, "eps schedule value")
    eps_report = max(
        smoothed_lp_objective(prob, loop.x0, eps0, alpha)
        - (prob.objective.eval(loop.x0) + lam * lp_norm_p(loop.x0, p)),
        0.0,
    )
    return loop.finish(status, eps_report, meta)


def solve_type2(prob, cfg, x0):
    """Second-type driver: one reweighted subproblem per iteration with a
    component-wise non-increasing eps^k -> 0 schedule."""
    cfg = _require(cfg, (Method.TYPE2_EXACT, Method.TYPE2_PROX))
    eps_sched = cfg.eps_schedule or default_eps_schedule(cfg.method)
    exact = cfg.method == Method.TYPE2_EXACT
    alpha, lam, p = cfg.alpha, prob.lam, prob.p
    loop = _Loop(prob, cfg, x0)
    eps_k = _eps_vector(eps_sched(0), prob.n, "eps schedule value")
    eps0 = eps_k.copy()
    loop.record(
        loop.fx + lam * _reg_ae(loop.x, eps_k, alpha, p),
        L=None, inner_count=0, eps=float(np.max(eps_k)),
    )
    status = Status.MAX_ITERATIONS
    err = None
    for k in range(cfg.resolved_max_outer()):
        if loop.residual() <= cfg.termination_tol:
            status = Status.CONVERGED
            break
        eps_next = _eps_vector(eps_sched(k + 1), prob.n, "eps schedule value")
        if np.any(eps_next > eps_k):
            raise ConfigurationError("second-type eps schedule must be non-increasing")
        w = weights_type12(loop.x, eps_k, p, alpha)
        try:
            if exact:
                sub_tol = cfg.subproblem_tol or min(1e-8, float(np.min(eps_k)))
                x_new, fx_new, L, count = loop.exact_step(w, sub_tol)
            else:
                phi_x = loop.fx + lam * _reg_ae(loop.x, eps_k, alpha, p)
                x_new, fx_new, L, count = loop.prox_step(
                    lam * p * w.s, alpha,
                    lambda xn, fn: phi_x - (fn + lam * _reg_ae(xn, eps_next, alpha, p)),
                )
        except NonConvergenceError as exc:
            err = exc
            status = Status.ERROR
            break
        loop.advance(x_new, fx_new, L_accepted=L)
        loop.record(
            loop.fx + lam * _reg_ae(loop.x, eps_next, alpha, p),
            L=L, inner_count=count, eps=float(np.max(eps_next)),
        )
        eps_k = eps_next
    meta = {"subproblem_tol_rule": "min(1e-8, min(eps_k))"}
    if err is not None:
        meta["error"] = str(err)
    eps_report = max(
        smoothed_lp_objective(prob, loop.x0, eps0, alpha)
        - (prob.objective.eval(loop.x0) + lam * lp_norm_p(loop.x0, p)),
        0.0,
    )
    return loop.finish(status, eps_report, meta)


def solve_new_irl1(prob, cfg, x0):
    """Fixed-eps driver: eps is chosen once (below the admissibility
    threshold, validated at entry) and the weights are capped at u_eps; the
    F_eps trace is non-increasing in both modes."""
    cfg = _require(cfg, (Method.NEW_IRL1_EXACT, Method.NEW_IRL1_PROX))
    exact = cfg.method == Method.NEW_IRL1_EXACT
    lam, p, q = prob.lam, prob.p, prob.q
    x0 = as_vector(x0, prob.n)
    if cfg.fixed_eps is None:
        eps = eps_threshold(prob, x0, tol=1e-6)
    else:
        eps = float(cfg.fixed_eps)
        if not eps_bound_satisfied(prob, x0, eps):
            raise ConfigurationError(
                f"fixed_eps={eps:.6g} violates the strict admissibility bound for this x0"
            )
    approx = EpsApprox(prob, eps)

    def reg_eps(x):
        return float(np.sum(h_u(x, approx.u_eps, p, q)))

    loop = _Loop(prob, cfg, x0)
    F_eps_x0 = F_eps(approx, loop.x)
    loop.record(F_eps_x0, L=None, inner_count=0, eps=eps)
    status = Status.MAX_ITERATIONS
    err = None
    for _ in range(cfg.resolved_max_outer()):
        if loop.residual() <= cfg.termination_tol:
            status = Status.CONVERGED
            break
        w = weights_new_irl1(loop.x, approx.u_eps, q)
        try:
            if exact:
                sub_tol = cfg.subproblem_tol or 1e-8
                x_new, fx_new, L, count = loop.exact_step(w, sub_tol)
            else:
                phi_x = loop.fx + lam * reg_eps(loop.x)
                x_new, fx_new, L, count = loop.prox_step(
                    lam * p * w.s, 1,
                    lambda xn, fn: phi_x - (fn + lam * reg_eps(xn)),
                )
        except NonConvergenceError as exc:
            err = exc
            status = Status.ERROR
            break
        loop.advance(x_new, fx_new, L_accepted=L)
        loop.record(loop.fx + lam * reg_eps(loop.x), L=L, inner_count=count, eps=eps)
    meta = {
        "eps": eps,
        "u_eps": approx.u_eps,
        "subproblem_tol_rule": "1e-8",
        "F_eps_final_le_initial": bool(
            loop.records[-1].surrogate <= F_eps_x0 + 1e-12 * (1.0 + abs(F_eps_x0))
        ),
    }
    if err is not None:
        meta["error"] = str(err)
    return loop.finish(status, eps_report=eps, extra_metadata=meta)


def solve_lasso_warmstart(ls, lam, tol, cfg=None, max_steps=100_000, audit=None):
    """Common initial point: a minimizer of 0.5||Ax-b||^2 + lam*||x||_1 to a
    coordinate-wise subgradient optimality gap of ``tol``, from the zero
    vector, by proximal descent with Barzilai-Borwein initialization."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = np.full(ls.dim, float(lam))
    return minimize_weighted(
        ls, w, alpha=1, tol=tol, x_start=np.zeros(ls.dim),
        cfg=cfg, max_steps=max_steps, audit=audit,
    )


def solve(prob, cfg, x0):
    """Dispatch on cfg.method."""
    method = Method(cfg.method)
    if method in (Method.TYPE1_EXACT, Method.TYPE1_PROX):
        return solve_type1(prob, cfg, x0)
    if method in (Method.TYPE2_EXACT, Method.TYPE2_PROX):
        return solve_type2(prob, cfg, x0)
    return solve_new_irl1(prob, cfg, x0)


def _require(cfg, methods):
    if cfg.method not in methods:
        raise ValueError(f"wrong driver for method {cfg.method.value}")
    return cfg
