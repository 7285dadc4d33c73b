"""Instance generation, serialization, run traces, and experiment orchestration.

Instances follow the two generators used in the experiments: orthonormal-row
measurement matrices with a planted T-sparse +-1 signal and Gaussian noise,
and dense standard-uniform data. All randomness comes from the counter-based
Philox generator keyed by an explicit seed so outputs are reproducible across
platforms.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import LeastSquaresObjective, LpProblem
from .solvers import (
    IterateRecord,
    Method,
    SolverConfig,
    SolverRun,
    Status,
    solve,
    solve_lasso_warmstart,
)

KIND_ORTHONORMAL = "orthonormal"
KIND_UNIFORM = "uniform"

_MAGIC = b"LPIN"
_VERSION = 1
_KIND_CODES = {KIND_ORTHONORMAL: 0, KIND_UNIFORM: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

LASSO_WARMSTART_TOL = 1e-6


@dataclass(frozen=True)
class Instance:
    """Generated problem data. For uniform instances ``planted_x`` is empty
    and T = 0, sigma = 0."""

    A: np.ndarray
    b: np.ndarray
    planted_x: np.ndarray
    T: int
    sigma: float
    seed: int
    kind: str

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def generate_orthonormal_instance(m, n, T, sigma, seed):
    """l1-magic style instance: A = B^T for B an orthonormal basis of the
    range of an n x m standard-normal matrix, planted x with exactly T
    nonzero +-1 entries on a uniformly drawn support, b = A x + sigma * v."""
    if m >= n:
        raise ValueError(f"require m < n, got m={m}, n={n}")
    if not 0 < T <= n:
        raise ValueError(f"require 0 < T <= n, got T={T}")
    rng = _rng(seed)
    W = rng.standard_normal((n, m))
    B, _ = np.linalg.qr(W)
    A = B.T
    support = rng.choice(n, size=T, replace=False)
    signs = rng.integers(0, 2, size=T) * 2.0 - 1.0
    x_tilde = np.zeros(n)
    x_tilde[support] = signs
    v = rng.standard_normal(m)
    b = A @ x_tilde + sigma * v
    return Instance(A=A, b=b, planted_x=x_tilde, T=int(T), sigma=float(sigma),
                    seed=int(seed), kind=KIND_ORTHONORMAL)


def generate_uniform_instance(m, n, seed):
    """A and b with i.i.d. standard-uniform entries; no planted signal."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = _rng(seed)
    A = rng.random((m, n))
    b = rng.random(m)
    return Instance(A=A, b=b, planted_x=np.zeros(0), T=0, sigma=0.0,
                    seed=int(seed), kind=KIND_UNIFORM)


def default_sparsity(m):
    """T defaults to round(m/5); recorded in run metadata as a non-planted
    convention of this harness."""
    return max(1, round(m / 5))


def save_instance(instance, path):
    """Write the instance in the versioned little-endian binary format."""
    m, n = instance.A.shape
    header = _MAGIC + struct.pack(
        "<IBQQQQd",
        _VERSION,
        _KIND_CODES[instance.kind],
        m,
        n,
        instance.T,
        instance.seed,
        instance.sigma,
    )
    parts = [
        header,
        struct.pack("<Q", instance.planted_x.size),
        np.ascontiguousarray(instance.planted_x, dtype="<f8").tobytes(),
        np.ascontiguousarray(instance.b, dtype="<f8").tobytes(),
        np.ascontiguousarray(instance.A, dtype="<f8").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


class InstanceFormatError(ValueError):
    pass


def load_instance(path):
    """Read an instance written by save_instance; bit-exact round trip."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != _MAGIC:
        raise InstanceFormatError(f"{path}: bad magic, not an instance file")
    off = 4
    head_fmt = "<IBQQQQd"
    head_size = struct.calcsize(head_fmt)
    if len(raw) < off + head_size:
        raise InstanceFormatError(f"{path}: truncated header")
    version, kind_code, m, n, T, seed, sigma = struct.unpack_from(head_fmt, raw, off)
    if version != _VERSION:
        raise InstanceFormatError(f"{path}: unsupported format version {version}")
    if kind_code not in _KIND_NAMES:
        raise InstanceFormatError(f"{path}: unknown instance kind code {kind_code}")
    off += head_size
    if len(raw) < off + 8:
        raise InstanceFormatError(f"{path}: truncated planted-signal length")
    (planted_len,) = struct.unpack_from("<Q", raw, off)
    off += 8
    expected = off + 8 * (planted_len + m + m * n)
    if len(raw) != expected:
        raise InstanceFormatError(
            f"{path}: expected {expected} bytes, found {len(raw)}"
        )
    planted = np.frombuffer(raw, dtype="<f8", count=planted_len, offset=off).copy()
    off += 8 * planted_len
    b = np.frombuffer(raw, dtype="<f8", count=m, offset=off).copy()
    off += 8 * m
    A = np.frombuffer(raw, dtype="<f8", count=m * n, offset=off).copy().reshape(m, n)
    return Instance(A=A, b=b, planted_x=planted, T=int(T), sigma=float(sigma),
                    seed=int(seed), kind=_KIND_NAMES[kind_code])


def make_problem(instance, lam, p):
    return LpProblem(LeastSquaresObjective(instance.A, instance.b), lam=lam, p=p)


# ---------------------------------------------------------------------------
# run traces


def run_to_dict(run):
    d = {
        "method": run.method.value,
        "alpha": run.alpha,
        "status": run.status.value,
        "metadata": run.metadata,
        "records": [dataclasses.asdict(r) for r in run.records],
        "x0": run.x0.tolist(),
        "final_x": run.final_x.tolist(),
        "report": {
            "residual_inf": run.report.residual_inf,
            "support": run.report.support.tolist(),
            "min_abs_on_support": run.report.min_abs_on_support,
            "first_order_bound": run.report.first_order_bound,
            "second_order_bound": run.report.second_order_bound,
            "second_order_psd": run.report.second_order_psd,
        },
    }
    return d


def save_trace(run, path):
    Path(path).write_text(json.dumps(run_to_dict(run), default=_json_default))


def load_trace(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def inner_count_ceiling(lipschitz, cfg_c, cfg_L_min, cfg_tau):
    """Upper bound on backtracking trials per accepted step:
    ceil((log(L_f + c) - log(2 L_min)) / log(tau) + 2)."""
    return math.ceil(
        (math.log(lipschitz + cfg_c) - math.log(2.0 * cfg_L_min)) / math.log(cfg_tau) + 2
    )


def check_trace(trace):
    """Validate a trace dict against the method's guarantees.

    Checks the method's monotone-descent quantity (per phase for the
    first-type method), the line-search inner-iteration ceiling, and the
    claimed termination residual. Returns a list of violation messages;
    empty means the trace passes.
    """
    problems = []
    meta = trace["metadata"]
    records = trace["records"]
    method = Method(trace["method"])
    if not records:
        return ["trace has no records"]

    def monotone(values, label):
        for a, b in zip(values, values[1:]):
            if b > a + 1e-10 * (1.0 + abs(a)):
                problems.append(f"{label}: surrogate increased from {a!r} to {b!r}")

    if method in (Method.TYPE1_EXACT, Method.TYPE1_PROX):
        by_phase = {}
        for r in records:
            by_phase.setdefault(r["phase"], []).append(r["surrogate"])
        for phase, values in by_phase.items():
            monotone(values, f"phase {phase}")
    else:
        monotone([r["surrogate"] for r in records], "surrogate trace")

    pc = meta["prox_cfg"]
    cap = inner_count_ceiling(meta["lipschitz"], pc["c"], pc["L_min"], pc["tau"])
    counts = list(meta.get("line_search_counts", []))
    for r in records:
        if r["L"] is not None:
            counts.append(r["inner_count"])
    for c in counts:
        if c > cap:
            problems.append(f"line search used {c} inner iterations, cap is {cap}")

    if trace["status"] == Status.CONVERGED.value:
        final_res = records[-1]["residual"]
        if final_res > meta["termination_tol"]:
            problems.append(
                f"status converged but final residual {final_res} exceeds "
                f"tol {meta['termination_tol']}"
            )
    for r in records:
        if not np.isfinite(r["residual"]) or r["residual"] < 0:
            problems.append(f"record k={r['k']}: bad residual {r['residual']}")
    return problems


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentSpec:
    """One table-style experiment: the cartesian product of sizes, p values,
    methods, and seeds at a fixed lambda."""

    sizes: List[Tuple[int, int]]
    p_values: List[float]
    lam: float
    methods: List[str]
    seeds: List[int]
    kind: str = KIND_ORTHONORMAL
    sigma: float = 0.005
    alpha: int = 1
    T: Optional[int] = None
    termination_tol: float = 1e-4
    max_outer: Optional[int] = None
    output_path: str = "experiment"

    def __post_init__(self):
        for m, n in self.sizes:
            if m >= n:
                raise ValueError(f"sizes require m < n, got {m}x{n}")
        if self.kind not in (KIND_ORTHONORMAL, KIND_UNIFORM):
            raise ValueError(f"unknown instance kind {self.kind!r}")


def parse_experiment_spec(text):
    """Parse the flat key/value experiment format.

    Lines are ``key = value``; lists are comma- or whitespace-separated;
    sizes use the form ``120x512``. Unknown keys are rejected. Lines starting
    with ``#`` are comments.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()

    def split(val):
        return [tok for tok in val.replace(",", " ").split() if tok]

    kwargs = {}
    for key, val in values.items():
        if key == "sizes":
            sizes = []
            for tok in split(val):
                m_str, _, n_str = tok.lower().partition("x")
                sizes.append((int(m_str), int(n_str)))
            kwargs["sizes"] = sizes
        elif key == "p_values":
            kwargs["p_values"] = [float(tok) for tok in split(val)]
        elif key == "lambda":
            kwargs["lam"] = float(val)
        elif key == "methods":
            kwargs["methods"] = [Method(tok).value for tok in split(val)]
        elif key == "seeds":
            kwargs["seeds"] = [int(tok) for tok in split(val)]
        elif key == "kind":
            kwargs["kind"] = val
        elif key == "sigma":
            kwargs["sigma"] = float(val)
        elif key == "alpha":
            kwargs["alpha"] = int(val)
        elif key == "T":
            kwargs["T"] = int(val)
        elif key == "termination_tol":
            kwargs["termination_tol"] = float(val)
        elif key == "max_outer":
            kwargs["max_outer"] = int(val)
        elif key == "output_path":
            kwargs["output_path"] = val
        else:
            raise ValueError(f"unknown experiment key {key!r}")
    missing = {"sizes", "p_values", "lam", "methods", "seeds"} - set(kwargs)
    if missing:
        raise ValueError(f"experiment spec is missing keys: {sorted(missing)}")
    return ExperimentSpec(**kwargs)


EXPERIMENT_COLUMNS = [
    "m", "n", "p", "method", "seed", "objective", "residual",
    "outer_iterations", "inner_iterations", "status", "wall_time_s",
]


def run_experiment(spec, out_dir=None, progress=None):
    """Run the full (size, p, seed, method) grid.

    Each (size, p, seed) cell generates one instance, computes the shared
    lasso warm start once, then times each method's solve (the reported wall
    time excludes generation and warm start). Solver errors are recorded in
    the row and the sweep continues. Returns the rows; when ``out_dir`` is
    given also writes ``<output_path>.csv`` and ``<output_path>.json`` there.
    """
    rows = []
    for m, n in spec.sizes:
        for p in spec.p_values:
            for seed in spec.seeds:
                if spec.kind == KIND_ORTHONORMAL:
                    T = spec.T if spec.T is not None else default_sparsity(m)
                    instance = generate_orthonormal_instance(m, n, T, spec.sigma, seed)
                else:
                    instance = generate_uniform_instance(m, n, seed)
                prob = make_problem(instance, spec.lam, p)
                x0 = solve_lasso_warmstart(prob.objective, spec.lam, LASSO_WARMSTART_TOL)
                for method in spec.methods:
                    cfg = SolverConfig(
                        method=Method(method),
                        alpha=spec.alpha,
                        termination_tol=spec.termination_tol,
                        max_outer=spec.max_outer,
                    )
                    row = {"m": m, "n": n, "p": p, "method": method, "seed": seed}
                    t0 = time.perf_counter()
                    try:
                        run = solve(prob, cfg, x0)
                        row.update(
                            objective=run.final_objective,
                            residual=run.final_residual,
                            outer_iterations=run.outer_iterations,
                            inner_iterations=run.total_inner,
                            status=run.status.value,
                        )
                    except Exception as exc:  # noqa: BLE001 - row-level isolation
                        row.update(
                            objective=float("nan"),
                            residual=float("nan"),
                            outer_iterations=0,
                            inner_iterations=0,
                            status=f"error: {exc}",
                        )
                    row["wall_time_s"] = time.perf_counter() - t0
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    if out_dir is not None:
        write_results(rows, Path(out_dir), spec.output_path)
    return rows


def write_results(rows, out_dir, stem):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EXPERIMENT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    (out_dir / f"{stem}.json").write_text(json.dumps(rows, indent=2, default=_json_default))
