"""Log-barrier interior-point solver for small dense convex programs.

The two optimization layers hand their subproblems to this kernel as plain
callables: a scalar objective, optional analytic gradient, and a list of
inequality handles g_i(x) <= 0. Handles may be vector-valued (one callable
returning several constraint components at once), which keeps per-iteration
Python overhead low. Missing gradients fall back to central finite
differences. The kernel never verifies convexity; callers certify it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblem, InvalidParameter


@dataclass(frozen=True)
class SolverOptions:
    kkt_tol: float = 1e-7
    feas_tol: float = 1e-8
    barrier_t0: float = 1.0
    barrier_growth: float = 30.0
    max_inner: int = 200
    max_stages: int = 40
    fd_step: float = 1e-6  # scaled by (1 + |x_i|)


@dataclass
class ConvexProblem:
    """Smooth convex program: minimize objective s.t. g_i(x) <= 0, box."""

    dimension: int
    objective: callable  # x -> float
    objective_grad: callable = None  # x -> (dim,)
    inequality_constraints: list = field(default_factory=list)  # x -> (k_i,)
    constraint_jacs: list = None  # x -> (k_i, dim), parallel to the list above
    box_bounds: tuple = None  # (lo, hi) arrays; entries may be +-inf


@dataclass
class SolveResult:
    x_opt: np.ndarray
    objective_value: float
    max_constraint_violation: float
    iterations: int
    converged: bool


def _central_diff(f, x, step_scale):
    n = x.size
    g = np.empty(n)
    for i in range(n):
        h = step_scale * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def _central_diff_vec(f, x, step_scale, out_dim):
    n = x.size
    jac = np.empty((out_dim, n))
    for i in range(n):
        h = step_scale * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.atleast_1d(f(xp)) - np.atleast_1d(f(xm))) / (2.0 * h)
    return jac


class _Program:
    """Problem wrapped with gradient fallbacks and stacked constraints."""

    def __init__(self, problem: ConvexProblem, opts: SolverOptions):
        self.dim = problem.dimension
        self.f = problem.objective
        if problem.objective_grad is not None:
            self.fgrad = problem.objective_grad
        else:
            self.fgrad = lambda x: _central_diff(self.f, x, opts.fd_step)
        self.handles = list(problem.inequality_constraints or [])
        jacs = problem.constraint_jacs
        self.jacs = list(jacs) if jacs is not None else [None] * len(self.handles)
        if len(self.jacs) != len(self.handles):
            raise InvalidParameter("constraint_jacs must parallel inequality_constraints")
        self.opts = opts
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        if problem.box_bounds is not None:
            lo = np.asarray(problem.box_bounds[0], dtype=float).copy()
            hi = np.asarray(problem.box_bounds[1], dtype=float).copy()
        self.lo, self.hi = lo, hi
        self.has_box = np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))
        # Count scalar inequality components once (handles are vector-valued).
        probe = np.clip(np.zeros(self.dim), lo, hi)
        self.sizes = [np.atleast_1d(np.asarray(h(probe), dtype=float)).size for h in self.handles]
        self.n_ineq = int(sum(self.sizes))
        self.n_barrier = self.n_ineq + int(np.isfinite(lo).sum() + np.isfinite(hi).sum())

    def gvals(self, x) -> np.ndarray:
        if not self.handles:
            return np.empty(0)
        if len(self.handles) == 1:
            return np.atleast_1d(np.asarray(self.handles[0](x), dtype=float))
        return np.concatenate([np.atleast_1d(np.asarray(h(x), dtype=float)) for h in self.handles])

    def gjac(self, x) -> np.ndarray:
        if not self.handles:
            return np.empty((0, self.dim))
        if len(self.handles) == 1 and self.jacs[0] is not None:
            return np.atleast_2d(np.asarray(self.jacs[0](x), dtype=float))
        rows = []
        for h, jac, k in zip(self.handles, self.jacs, self.sizes):
            if jac is not None:
                rows.append(np.atleast_2d(np.asarray(jac(x), dtype=float)))
            else:
                rows.append(_central_diff_vec(h, x, self.opts.fd_step, k))
        return np.vstack(rows)

    def strictly_feasible(self, x) -> bool:
        if np.any(x <= self.lo) or np.any(x >= self.hi):
            return False
        g = self.gvals(x)
        return bool(np.all(np.isfinite(g)) and np.all(g < 0.0))

    def interior_start(self, x0) -> np.ndarray:
        x = np.asarray(x0, dtype=float).copy()
        span = np.where(
            np.isfinite(self.lo) & np.isfinite(self.hi), self.hi - self.lo, 1.0
        )
        pad = 1e-9 * np.maximum(span, 1.0)
        x = np.minimum(np.maximum(x, self.lo + pad), self.hi - pad)
        return x


def _bfgs(phi, grad, x0, gtol, max_iter):
    """Quasi-Newton descent with Armijo backtracking.

    phi must return +inf outside its domain (infeasible points); the line
    search then backtracks past the boundary. Returns (x, phi(x),
    iterations, stalled).
    """
    x = x0
    f = phi(x)
    g = grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise InvalidParameter("barrier objective not finite at the start point")
    n = x.size
    H = np.eye(n)
    scaled = False  # Shanno rescale pending until the first curvature pair
    tiny_steps = 0
    for it in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= gtol:
            return x, f, it, False
        p = -H @ g
        slope = float(p @ g)
        if slope > -1e-12 * np.linalg.norm(p) * gnorm:
            H = np.eye(n)
            p = -g
            slope = -gnorm * gnorm
        step = 1.0
        accepted = False
        for _ in range(60):
            xn = x + step * p
            fn = phi(xn)
            if np.isfinite(fn) and fn <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x, f, it, True
        # Progress limited by float granularity of phi: treat as converged
        # rather than burn the remaining budget on noise-level decrements.
        if f - fn <= 1e-13 * (1.0 + abs(f)):
            tiny_steps += 1
            if tiny_steps >= 3:
                return xn, fn, it + 1, False
        else:
            tiny_steps = 0
        gn = grad(xn)
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                # Shanno sizing: match H to the observed curvature scale
                # before the first update; cures badly mixed variable units.
                H = (sy / float(y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (
                rho * rho * float(y @ Hy) + rho
            ) * np.outer(s, s)
        x, f, g = xn, fn, gn
    return x, f, max_iter, False


def _barrier_minimize(prog: _Program, x0, t, gtol, max_inner):
    lo, hi = prog.lo, prog.hi
    lo_idx = np.isfinite(lo)
    hi_idx = np.isfinite(hi)

    def phi(x):
        if prog.has_box and (
            np.any(x[lo_idx] <= lo[lo_idx]) or np.any(x[hi_idx] >= hi[hi_idx])
        ):
            return np.inf
        val = t * prog.f(x)
        if not np.isfinite(val):
            return np.inf
        if prog.n_ineq:
            g = prog.gvals(x)
            if np.any(g >= 0.0) or not np.all(np.isfinite(g)):
                return np.inf
            val -= float(np.sum(np.log(-g)))
        if prog.has_box:
            val -= float(np.sum(np.log(x[lo_idx] - lo[lo_idx])))
            val -= float(np.sum(np.log(hi[hi_idx] - x[hi_idx])))
        return val

    def grad(x):
        gr = t * np.asarray(prog.fgrad(x), dtype=float)
        if prog.n_ineq:
            g = prog.gvals(x)
            J = prog.gjac(x)
            gr += J.T @ (1.0 / (-g))
        if prog.has_box:
            gr[lo_idx] -= 1.0 / (x[lo_idx] - lo[lo_idx])
            gr[hi_idx] += 1.0 / (hi[hi_idx] - x[hi_idx])
        return gr

    return _bfgs(phi, grad, x0, gtol, max_inner)


def _phase_one(prog: _Program, x0, opts: SolverOptions):
    """Minimize the max-infeasibility slack; raise if it cannot reach < 0."""
    g0 = prog.gvals(x0)
    s0 = float(np.max(g0)) * 1.05 + 1e-3

    def f(z):
        return z[-1]

    def fgrad(z):
        g = np.zeros(z.size)
        g[-1] = 1.0
        return g

    def shifted(z):
        return prog.gvals(z[:-1]) - z[-1]

    def shifted_jac(z):
        J = prog.gjac(z[:-1])
        return np.hstack([J, -np.ones((J.shape[0], 1))])

    lo = np.concatenate([prog.lo, [-2.0]])
    hi = np.concatenate([prog.hi, [s0 + 2.0]])
    aux = ConvexProblem(
        dimension=prog.dim + 1,
        objective=f,
        objective_grad=fgrad,
        inequality_constraints=[shifted],
        constraint_jacs=[shifted_jac],
        box_bounds=(lo, hi),
    )
    z0 = np.concatenate([x0, [s0]])
    res = solve(aux, z0, SolverOptions(kkt_tol=1e-6, feas_tol=opts.feas_tol))
    x = res.x_opt[:-1]
    if res.x_opt[-1] >= 0.0 or not prog.strictly_feasible(x):
        raise InfeasibleProblem(
            f"phase-I could not find a strictly feasible point (slack {res.x_opt[-1]:.3g})"
        )
    return x


def solve(problem: ConvexProblem, x0, opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Run the barrier method from x0 and return the final iterate.

    For convex inputs the result satisfies a duality-gap bound of roughly
    0.1 * kkt_tol. An infeasible start triggers phase-I first; running out of
    iterations returns the best iterate with converged=False.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.dimension,) or not np.all(np.isfinite(x0)):
        raise InvalidParameter(f"x0 must be a finite vector of length {problem.dimension}")
    prog = _Program(problem, opts)
    x = prog.interior_start(x0)

    total_inner = 0
    if prog.n_barrier == 0:
        # Unconstrained: one quasi-Newton run on the bare objective.
        x, _, it, stalled = _bfgs(
            lambda z: prog.f(z),
            lambda z: np.asarray(prog.fgrad(z), dtype=float),
            x,
            gtol=max(0.01 * opts.kkt_tol, 1e-12),
            max_iter=opts.max_inner,
        )
        fval = prog.f(x)
        return SolveResult(x, float(fval), 0.0, it, not stalled)

    if not prog.strictly_feasible(x):
        x = _phase_one(prog, x, opts)

    gap_target = 0.1 * opts.kkt_tol
    t = opts.barrier_t0
    gap_reached = False
    for _ in range(opts.max_stages):
        gtol = 0.05 * opts.kkt_tol * max(t, 1.0)
        x, _, it, _stalled = _barrier_minimize(prog, x, t, gtol, opts.max_inner)
        total_inner += it
        if prog.n_barrier / t <= gap_target:
            # A line-search stall at the final stage means the iterate is
            # float-limited on the central path, which is as converged as a
            # barrier method gets; feasibility decides below.
            gap_reached = True
            break
        t *= opts.barrier_growth

    g = prog.gvals(x)
    viol = float(max(0.0, np.max(g))) if g.size else 0.0
    converged = gap_reached and viol <= opts.feas_tol
    return SolveResult(x, float(prog.f(x)), viol, total_inner, converged)
