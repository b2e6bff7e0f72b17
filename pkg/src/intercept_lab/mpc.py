"""Interception MPC: condensed QP over the input sequence with box constraints.

The interceptor is modeled as a double integrator whose input u_k is the
acceleration held over step k; the target follows its constant-acceleration
rollout.  Eliminating the states leaves a dense strictly convex QP in the
stacked inputs, solved by an operator-splitting (ADMM) iteration with a
cached factorization and warm starting for receding-horizon use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InterceptLabError, ParameterError
from .estimation import TargetStateCA
from .guidance import GuidanceCommand

ADMM_RHO = 0.1
ADMM_SIGMA = 1e-6
ADMM_ALPHA = 1.6
DEFAULT_MAX_ITER = 2000
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class MpcParams:
    """Horizon, weights, and dynamic limits of the planner."""

    N: int = 40
    dt: float = 0.2
    W_e: np.ndarray = field(default_factory=lambda: np.eye(3))
    W_u: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(3))
    v_max: np.ndarray = field(default_factory=lambda: np.array([8.0, 8.0, 4.0]))
    a_max: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 2.0]))

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError("horizon must be at least one step")
        if self.dt <= 0:
            raise ParameterError("step duration must be positive")
        w_u = np.asarray(self.W_u, dtype=float)
        if np.linalg.eigvalsh(w_u).min() <= 0:
            raise ParameterError("input weight must be positive definite")
        w_e = np.asarray(self.W_e, dtype=float)
        if np.linalg.eigvalsh(w_e).min() < -1e-12:
            raise ParameterError("error weight must be positive semidefinite")


@dataclass
class MpcProblem:
    """One planning instance: current interceptor and target states."""

    params: MpcParams
    p_int: np.ndarray
    v_int: np.ndarray
    x_tgt: TargetStateCA


@dataclass
class DenseQp:
    """minimize 0.5 x'Qx + q'x  subject to  G x <= h, with Q SPD."""

    Q: np.ndarray
    q: np.ndarray
    G: np.ndarray
    h: np.ndarray


@dataclass
class QpDiagnostics:
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool


@dataclass
class MpcSolution:
    """Optimal input sequence and its predicted rollout."""

    U: np.ndarray                   # (N, 3) inputs
    positions: np.ndarray           # (N, 3) predicted interceptor positions, k = 1..N
    cost: float
    diagnostics: QpDiagnostics


class MpcNotConverged(InterceptLabError):
    """Solver hit its iteration cap; carries the best-effort command."""

    def __init__(self, command: GuidanceCommand, solution: MpcSolution):
        super().__init__("QP solver did not converge within the iteration cap")
        self.command = command
        self.solution = solution


def predict_target(x_tgt: TargetStateCA, n_steps: int, dt: float) -> np.ndarray:
    """Constant-acceleration rollout of the target: positions at k = 1..n."""
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    k = np.arange(1, n_steps + 1, dtype=float)[:, None] * dt
    return x_tgt.p[None, :] + k * x_tgt.v[None, :] + 0.5 * k * k * x_tgt.a[None, :]


def _prediction_matrices(N: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Input-to-position (M_u) and input-to-velocity (N_u) maps, 3N x 3N.

    Row block k (positions/velocities at step k+1), column block j (input j):
    positions get dt^2 * (k - j + 1/2) for j <= k, velocities get dt.
    """
    I3 = np.eye(3)
    M_u = np.zeros((3 * N, 3 * N))
    N_u = np.zeros((3 * N, 3 * N))
    for k in range(N):
        for j in range(k + 1):
            M_u[3 * k:3 * k + 3, 3 * j:3 * j + 3] = dt * dt * (k - j + 0.5) * I3
            N_u[3 * k:3 * k + 3, 3 * j:3 * j + 3] = dt * I3
    return M_u, N_u


def _free_response(p0: np.ndarray, v0: np.ndarray, N: int, dt: float) -> np.ndarray:
    k = np.arange(1, N + 1, dtype=float)[:, None] * dt
    return (p0[None, :] + k * v0[None, :]).reshape(-1)


def condense(problem: MpcProblem) -> DenseQp:
    """Eliminate the states; returns the dense QP over the stacked inputs.

    The error term at k = 0 does not depend on the inputs and is dropped, so
    the cost runs over the predicted errors at steps 1..N and all N inputs.
    """
    pr = problem.params
    N, dt = pr.N, pr.dt
    M_u, N_u = _prediction_matrices(N, dt)
    W_e_bar = np.kron(np.eye(N), np.asarray(pr.W_e, dtype=float))
    W_u_bar = np.kron(np.eye(N), np.asarray(pr.W_u, dtype=float))
    p_free = _free_response(np.asarray(problem.p_int, float), np.asarray(problem.v_int, float), N, dt)
    t_stack = predict_target(problem.x_tgt, N, dt).reshape(-1)
    Q = 2.0 * (M_u.T @ W_e_bar @ M_u + W_u_bar)
    q = 2.0 * (M_u.T @ W_e_bar @ (p_free - t_stack))
    a_rep = np.tile(np.asarray(pr.a_max, float), N)
    v_rep = np.tile(np.asarray(pr.v_max, float), N)
    v0_rep = np.tile(np.asarray(problem.v_int, float), N)
    n = 3 * N
    G = np.vstack([np.eye(n), -np.eye(n), N_u, -N_u])
    h = np.concatenate([a_rep, a_rep, v_rep - v0_rep, v_rep + v0_rep])
    return DenseQp(Q=0.5 * (Q + Q.T), q=q, G=G, h=h)


def _ruiz_equilibrate(Q: np.ndarray, A: np.ndarray, iters: int = 10):
    """Symmetric diagonal scaling of the (Q, A) pair plus a cost scalar.

    Returns (Q_s, A_s, d, e, c) with Q_s = c * D Q D and A_s = E A D, where
    D = diag(d), E = diag(e).  Equilibrated data keeps the splitting iteration
    well-behaved across the badly scaled condensed MPC problems.
    """
    n = Q.shape[0]
    m = A.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    Qs = Q.copy()
    As = A.copy()
    for _ in range(iters):
        col = np.maximum(np.abs(Qs).max(axis=0), np.abs(As).max(axis=0) if m else 0.0)
        row = np.abs(As).max(axis=1) if m else np.ones(0)
        col[col == 0.0] = 1.0
        row[row == 0.0] = 1.0
        dd = 1.0 / np.sqrt(col)
        ee = 1.0 / np.sqrt(row)
        Qs *= dd[:, None] * dd[None, :]
        if m:
            As *= ee[:, None] * dd[None, :]
        d *= dd
        e *= ee
        # normalize cost magnitude so rho acts on a problem of unit scale
        gamma = np.abs(Qs).max(axis=0).mean()
        if gamma > 0.0:
            Qs /= gamma
            c /= gamma
    return Qs, As, d, e, c


class _AdmmSolver:
    """Operator-splitting solver for  min 0.5 x'Qx + q'x  s.t.  lo <= Ax <= hi.

    The quadratic data is equilibrated once and the linear-system factor is
    cached; repeated solves with fresh (q, lo, hi) reuse both, which is what
    the receding-horizon planner needs.  The step parameter rho adapts to the
    primal/dual residual ratio (with refactorization), which keeps iteration
    counts low across the badly conditioned condensed problems.
    """

    def __init__(self, Q: np.ndarray, A: np.ndarray, rho: float = ADMM_RHO):
        self.Q = np.asarray(Q, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.n = self.Q.shape[0]
        self.m = self.A.shape[0]
        self.Qs, self.As, self.d, self.e, self.c = _ruiz_equilibrate(self.Q, self.A)
        self.rho = rho
        self._factor()

    def _factor(self):
        K = self.Qs + ADMM_SIGMA * np.eye(self.n) + self.rho * (self.As.T @ self.As)
        self._K = cho_factor(K)

    def solve(
        self,
        q: np.ndarray,
        lo: np.ndarray,
        hi: np.ndarray,
        x0: np.ndarray | None = None,
        y0: np.ndarray | None = None,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = DEFAULT_TOL,
    ) -> tuple[np.ndarray, np.ndarray, QpDiagnostics]:
        d, e, c = self.d, self.e, self.c
        qs = c * d * q
        los = e * lo
        his = e * hi
        x = np.zeros(self.n) if x0 is None else np.asarray(x0, float) / d
        y = np.zeros(self.m) if y0 is None else np.asarray(y0, float) * (c / e)
        z = np.clip(self.As @ x, los, his)
        rho = self.rho
        r_prim = r_dual = math.inf
        it = 0
        for it in range(1, max_iter + 1):
            rhs = ADMM_SIGMA * x - qs + self.As.T @ (rho * z - y)
            x_t = cho_solve(self._K, rhs)
            z_hat = self.As @ x_t
            x = ADMM_ALPHA * x_t + (1.0 - ADMM_ALPHA) * x
            z_rel = ADMM_ALPHA * z_hat + (1.0 - ADMM_ALPHA) * z
            z = np.clip(z_rel + y / rho, los, his)
            y = y + rho * (z_rel - z)
            if it % 10 == 0 or it == max_iter:
                # scaled residual vectors; the unscaled ones differ only by
                # diagonal factors (A x_u - z_u = (A_s x - z)/e, and the dual
                # residual by 1/(c d)), so no extra unscaled matvecs needed
                sp_vec = self.As @ x - z
                sd_vec = self.Qs @ x + qs + self.As.T @ y
                r_prim = float(np.abs(sp_vec / e).max(initial=0.0))
                r_dual = float(np.abs(sd_vec / (c * d)).max(initial=0.0))
                if r_prim < tol and r_dual < tol:
                    return d * x, (e / c) * y, QpDiagnostics(it, r_prim, r_dual, True)
                # adapt rho toward balanced scaled residuals
                sp = float(np.abs(sp_vec).max(initial=0.0))
                sd = float(np.abs(sd_vec).max(initial=0.0))
                if sp > 0.0 and sd > 0.0:
                    ratio = math.sqrt(sp / sd)
                    if ratio > 5.0 or ratio < 0.2:
                        rho = min(max(rho * ratio, 1e-6), 1e6)
                        if rho != self.rho:
                            self.rho = rho
                            self._factor()
        return d * x, (e / c) * y, QpDiagnostics(it, r_prim, r_dual, False)


def solve_qp(
    qp: DenseQp,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    rho: float = ADMM_RHO,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, QpDiagnostics]:
    """Solve the dense QP; returns (x, duals, diagnostics).

    Non-convergence is reported through the diagnostics flag; the best iterate
    is still returned so callers can fall back gracefully.
    """
    solver = _AdmmSolver(qp.Q, qp.G, rho)
    lo = np.full(qp.G.shape[0], -np.inf)
    return solver.solve(qp.q, lo, qp.h, x0=x0, max_iter=max_iter, tol=tol)


class MpcPlanner:
    """Receding-horizon planner with cached condensation and warm starts.

    The quadratic term, constraint matrix, and ADMM factorization depend only
    on the parameters, so they are computed once; each cycle only refreshes
    the linear term and bounds.  The previous solution, shifted by one step,
    seeds the next solve.
    """

    def __init__(self, params: MpcParams, max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL):
        self.params = params
        self.max_iter = max_iter
        self.tol = tol
        N, dt = params.N, params.dt
        n = 3 * N
        self._M_u, self._N_u = _prediction_matrices(N, dt)
        W_e_bar = np.kron(np.eye(N), np.asarray(params.W_e, dtype=float))
        W_u_bar = np.kron(np.eye(N), np.asarray(params.W_u, dtype=float))
        self._Q = 2.0 * (self._M_u.T @ W_e_bar @ self._M_u + W_u_bar)
        self._Q = 0.5 * (self._Q + self._Q.T)
        self._MtWe = 2.0 * (self._M_u.T @ W_e_bar)
        self._solver = _AdmmSolver(self._Q, np.vstack([np.eye(n), self._N_u]))
        self._a_rep = np.tile(np.asarray(params.a_max, float), N)
        self._v_rep = np.tile(np.asarray(params.v_max, float), N)
        self._warm_x: np.ndarray | None = None
        self._warm_y: np.ndarray | None = None

    def reset(self):
        self._warm_x = None
        self._warm_y = None

    def plan(self, p_int, v_int, x_tgt: TargetStateCA) -> tuple[GuidanceCommand, MpcSolution]:
        pr = self.params
        N, dt = pr.N, pr.dt
        p0 = np.asarray(p_int, dtype=float)
        v0 = np.asarray(v_int, dtype=float)
        p_free = _free_response(p0, v0, N, dt)
        t_pred = predict_target(x_tgt, N, dt)
        q = self._MtWe @ (p_free - t_pred.reshape(-1))
        v0_rep = np.tile(v0, N)
        lo = np.concatenate([-self._a_rep, -self._v_rep - v0_rep])
        hi = np.concatenate([self._a_rep, self._v_rep - v0_rep])
        x, y, diag = self._solver.solve(
            q, lo, hi, x0=self._warm_x, y0=self._warm_y, max_iter=self.max_iter, tol=self.tol
        )
        # Exact input-box feasibility of the returned sequence.
        U = np.clip(x, -self._a_rep, self._a_rep)
        self._warm_x = np.concatenate([U[3:], U[-3:]])
        self._warm_y = y
        positions = (p_free + self._M_u @ U).reshape(N, 3)
        err = positions - t_pred
        W_e = np.asarray(pr.W_e, dtype=float)
        W_u = np.asarray(pr.W_u, dtype=float)
        Um = U.reshape(N, 3)
        cost = float(np.einsum("ki,ij,kj->", err, W_e, err) + np.einsum("ki,ij,kj->", Um, W_u, Um))
        solution = MpcSolution(U=Um, positions=positions, cost=cost, diagnostics=diag)
        aim = t_pred[0] - p0
        heading = math.atan2(aim[1], aim[0])
        command = GuidanceCommand(a_cmd=Um[0].copy(), desired_heading=heading, a_limited=Um[0].copy())
        return command, solution


def mpc_plan(p_int, v_int, x_tgt: TargetStateCA, params: MpcParams) -> tuple[GuidanceCommand, MpcSolution]:
    """One-shot receding-horizon plan; raises MpcNotConverged with the best effort."""
    command, solution = MpcPlanner(params).plan(p_int, v_int, x_tgt)
    if not solution.diagnostics.converged:
        raise MpcNotConverged(command, solution)
    return command, solution
