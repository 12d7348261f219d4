"""Wasserstein-1 distance between uniform empirical distributions.

Small instances are solved exactly (assignment when sizes match, the
transportation LP otherwise). Larger ones use entropic Sinkhorn iterations
with epsilon set relative to the mean ground cost; the reported value is the
transport cost of the entropic plan.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse.linalg import LinearOperator, cg
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .dataset import as_matrix, check_same_encoder
from .errors import DataError, NumericError, SinkhornConvergenceError


@dataclass(frozen=True)
class OtConfig:
    solver: str = "auto"  # "auto", "exact" or "sinkhorn"
    exact_cutoff: int = 1024
    sinkhorn_epsilon_fraction: float = 0.01
    sinkhorn_max_iters: int = 10000
    sinkhorn_tolerance: float = 1e-7
    subsample_cap: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.solver not in ("auto", "exact", "sinkhorn"):
            raise DataError(f"unknown OT solver {self.solver!r}")
        if self.sinkhorn_epsilon_fraction <= 0:
            raise DataError("sinkhorn_epsilon_fraction must be positive")
        if self.exact_cutoff < 2 or self.subsample_cap < 2:
            raise DataError("exact_cutoff and subsample_cap must be at least 2")


@dataclass(frozen=True)
class OtResult:
    distance: float
    solver: str
    n_a: int
    n_b: int
    subsampled: bool
    iterations: int = 0
    marginal_violation: float = 0.0
    epsilon: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def cost_matrix(a, b) -> np.ndarray:
    """Pairwise L2 distances between rows."""
    return cdist(as_matrix(a), as_matrix(b), metric="euclidean")


def wasserstein_1d(a, b) -> float:
    """Closed-form W1 for two equal-size 1-D samples: mean gap of sorted values."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size != b.size:
        raise DataError("wasserstein_1d needs equal-length samples")
    if a.size == 0:
        raise DataError("wasserstein_1d of empty samples")
    return float(np.mean(np.abs(a - b)))


# largest lcm(n, m) solved as a replicated assignment problem
REPLICATION_LIMIT = 4096


def exact_transport(costs: np.ndarray) -> float:
    """Optimal cost with uniform marginals 1/n and 1/m.

    Unequal sizes are replicated to a square assignment problem of side
    lcm(n, m) when that is small; uniform integer supplies make this
    exact. Otherwise the transportation LP is solved directly.
    """
    n, m = costs.shape
    if n == m:
        rows, cols = linear_sum_assignment(costs)
        return float(costs[rows, cols].sum() / n)
    side = math.lcm(n, m)
    if side <= REPLICATION_LIMIT:
        square = np.repeat(np.repeat(costs, side // n, axis=0), side // m, axis=1)
        rows, cols = linear_sum_assignment(square)
        return float(square[rows, cols].sum() / side)
    # rows ship m units each, columns receive n units each; total n*m
    row_op = sparse.kron(sparse.eye(n), np.ones((1, m)))
    col_op = sparse.kron(np.ones((1, n)), sparse.eye(m))
    a_eq = sparse.vstack([row_op, col_op]).tocsr()
    b_eq = np.concatenate([np.full(n, float(m)), np.full(m, float(n))])
    res = linprog(costs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"transportation LP failed: {res.message}")
    return float(res.fun / (n * m))


def _log_stage_start(costs, f, g, log_a, log_b, eps):
    f = -eps * logsumexp((g[None, :] - costs) / eps + log_b[None, :], axis=1)
    g = -eps * logsumexp((f[:, None] - costs) / eps + log_a[:, None], axis=0)
    return f, g


def _newton_polish(costs, eps, f, g, log_a, log_b, tol, budget):
    """Newton steps on the entropic dual from potentials ``(f, g)``.

    Each step solves the Hessian system by conjugate gradients and takes a
    backtracking step on the dual objective. Matrix-vector products and
    line-search trials are charged against ``budget``.
    """
    n, m = costs.shape
    a, b = np.exp(log_a), np.exp(log_b)

    def plan(f, g):
        return np.exp((f[:, None] + g[None, :] - costs) / eps + log_a[:, None] + log_b[None, :])

    def dual(f, g, p):
        return float(f @ a + g @ b - eps * p.sum())

    p = plan(f, g)
    used = 0
    while True:
        r, c = p.sum(axis=1), p.sum(axis=0)
        violation = float(np.abs(r - a).sum() + np.abs(c - b).sum())
        if violation <= tol or used >= budget:
            return f, g, p, used, violation
        grad = np.concatenate([a - r, b - c])
        hess = LinearOperator(
            (n + m, n + m),
            matvec=lambda x: np.concatenate([r * x[:n] + p @ x[n:], p.T @ x[:n] + c * x[n:]]),
        )
        diag = np.concatenate([r, c])
        precond = LinearOperator((n + m, n + m), matvec=lambda x: x / diag)
        calls = [0]

        def count(_):
            calls[0] += 1

        step, _ = cg(hess, grad, rtol=min(0.1, violation), maxiter=max(1, min(500, budget - used)),
                     M=precond, callback=count)
        used += calls[0]
        step *= eps
        base = dual(f, g, p)
        slope = float(grad @ step)
        t = 1.0
        while True:
            used += 1
            fn, gn = f + t * step[:n], g + t * step[n:]
            with np.errstate(over="ignore"):
                pn = plan(fn, gn)
            value = dual(fn, gn, pn)
            if np.isfinite(value) and value >= base + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-10 or used >= budget:
                return f, g, p, used, violation
        f, g, p = fn, gn, pn


def sinkhorn_plan(
    costs: np.ndarray,
    epsilon: float,
    max_iters: int = 10000,
    tol: float = 1e-7,
    *,
    omega: float = 1.8,
    polish_after: int = 500,
) -> tuple[np.ndarray, int, float]:
    """Entropic OT plan with uniform marginals.

    Scaling iterations run on a kernel re-centred by dual potentials
    (log-domain absorption), with epsilon annealed from the mean cost down
    to ``epsilon`` and over-relaxed updates ``u <- u^(1-w) (a/Kv)^w``. If an
    over-relaxed stage becomes unstable it is restarted with ``w = 1``.
    When the final stage has not met ``tol`` after ``polish_after``
    iterations, the rest of the budget goes to Newton steps on the dual.

    Returns ``(plan, iterations, violation)`` where violation is the L1
    error of both marginals summed.
    """
    n, m = costs.shape
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(n)
    g = np.zeros(m)
    eps = max(epsilon, float(costs.mean()))
    it = 0
    violation = np.inf

    def kernel(f, g, eps):
        return np.exp((f[:, None] + g[None, :] - costs) / eps + log_a[:, None] + log_b[None, :])

    while True:
        final = eps == epsilon
        stage_tol = tol if final else 1e-3
        limit = min(max_iters, it + polish_after) if final else max_iters
        w = omega
        while True:
            f, g = _log_stage_start(costs, f, g, log_a, log_b, eps)
            k = kernel(f, g, eps)
            u, v = np.ones(n), np.ones(m)
            stable = True
            with np.errstate(all="ignore"):
                while it < limit:
                    it += 1
                    u = u ** (1 - w) * (a / (k @ v)) ** w
                    v = v ** (1 - w) * (b / (k.T @ u)) ** w
                    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))
                            and u.min() > 0 and v.min() > 0):
                        stable = False
                        break
                    if max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > 30.0:
                        f = f + eps * np.log(u)
                        g = g + eps * np.log(v)
                        k = kernel(f, g, eps)
                        u, v = np.ones(n), np.ones(m)
                    if it % 10 == 0:
                        violation = float(
                            np.abs(u * (k @ v) - a).sum() + np.abs(v * (k.T @ u) - b).sum()
                        )
                        if violation <= stage_tol:
                            break
            if stable:
                break
            if w == 1.0:
                raise NumericError("Sinkhorn scaling became unstable")
            w = 1.0
        f = f + eps * np.log(u)
        g = g + eps * np.log(v)
        if final or it >= max_iters:
            break
        eps = max(epsilon, eps * 0.5)

    plan = kernel(f, g, eps)
    violation = float(np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum())
    if violation > tol and eps == epsilon and it < max_iters:
        f, g, plan, used, violation = _newton_polish(
            costs, eps, f, g, log_a, log_b, tol, max_iters - it
        )
        it += used
    if violation > tol:
        raise SinkhornConvergenceError(
            f"Sinkhorn did not converge in {max_iters} iterations "
            f"(marginal violation {violation:.3e})",
            violation,
            it,
        )
    return plan, it, violation


def _subsample(x: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] <= cap:
        return x
    return x[np.sort(rng.choice(x.shape[0], size=cap, replace=False))]


def solve_wasserstein(a, b, cfg: OtConfig = OtConfig()) -> OtResult:
    check_same_encoder(a, b)
    xa, xb = as_matrix(a), as_matrix(b)
    if xa.shape[0] == 0 or xb.shape[0] == 0:
        raise DataError("Wasserstein distance of an empty set")
    rng = np.random.default_rng(cfg.seed)
    subsampled = max(xa.shape[0], xb.shape[0]) > cfg.subsample_cap
    xa = _subsample(xa, cfg.subsample_cap, rng)
    xb = _subsample(xb, cfg.subsample_cap, rng)
    costs = cost_matrix(xa, xb)
    n, m = costs.shape
    solver = cfg.solver
    if solver == "auto":
        solver = "exact" if max(n, m) <= cfg.exact_cutoff else "sinkhorn"
    if solver == "exact":
        return OtResult(exact_transport(costs), "exact", n, m, subsampled)
    mean_cost = float(costs.mean())
    if mean_cost == 0.0:
        return OtResult(0.0, "sinkhorn", n, m, subsampled, epsilon=0.0)
    eps = cfg.sinkhorn_epsilon_fraction * mean_cost
    plan, iters, viol = sinkhorn_plan(costs, eps, cfg.sinkhorn_max_iters, cfg.sinkhorn_tolerance)
    return OtResult(float((plan * costs).sum()), "sinkhorn", n, m, subsampled, iters, viol, eps)


def wasserstein(a, b, cfg: OtConfig = OtConfig()) -> float:
    return solve_wasserstein(a, b, cfg).distance
