"""Krylov solvers (Jacobi-CG, restarted GMRES) and a cached direct solver.

Every solver checks the true residual ``||A x - b|| <= rel_tol * ||b||``
before returning and raises :class:`ConvergenceError` otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError

log = logging.getLogger(__name__)

METHODS = ("cg", "gmres", "direct")


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iters: int | None = None  # default 10 * n
    method: str = "gmres"
    restart: int = 50

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    def iteration_limit(self, n):
        return self.max_iters if self.max_iters is not None else 10 * n


@dataclass
class BlockSystem:
    """2x2 block operator ``[[A, Bt], [B, D]]`` on stacked (u, p) vectors.

    ``pressure_null`` is the coefficient vector of the constant pressure
    mode when it lies in the kernel (closed surfaces, ``D = 0``).  The
    accompanying ``pressure_mass`` gives the weights ``M_W 1`` that define a
    zero-mean pressure.
    """

    A: sp.spmatrix
    Bt: sp.spmatrix
    B: sp.spmatrix
    D: sp.spmatrix | None = None
    pressure_null: np.ndarray | None = None
    pressure_mass: np.ndarray | None = None
    precond_blocks: tuple | None = None

    def __post_init__(self):
        n, m = self.A.shape[0], self.B.shape[0]
        if self.A.shape != (n, n) or self.Bt.shape != (n, m) or self.B.shape != (m, n):
            raise ValueError("inconsistent block dimensions")
        if self.D is not None and self.D.shape != (m, m):
            raise ValueError("inconsistent block dimensions")

    @property
    def n_u(self):
        return self.A.shape[0]

    @property
    def shape(self):
        n = self.A.shape[0] + self.B.shape[0]
        return (n, n)

    def matvec(self, x):
        u, p = x[: self.n_u], x[self.n_u:]
        top = self.A @ u + self.Bt @ p
        bot = self.B @ u
        if self.D is not None:
            bot = bot + self.D @ p
        return np.concatenate([top, bot])

    def __matmul__(self, x):
        return self.matvec(x)

    def to_sparse(self):
        D = self.D if self.D is not None else sp.csr_matrix((self.B.shape[0],) * 2)
        return sp.bmat([[self.A, self.Bt], [self.B, D]], format="csc")

    def project_rhs(self, b):
        """Remove the component of the pressure rhs outside range(B)."""
        if self.pressure_null is None:
            return b
        b = b.copy()
        z = self.pressure_null
        b[self.n_u:] -= z * (z @ b[self.n_u:]) / (z @ z)
        return b

    def project_solution(self, x):
        """Shift the pressure to zero mean."""
        if self.pressure_null is None:
            return x
        x = x.copy()
        w = self.pressure_mass if self.pressure_mass is not None else self.pressure_null
        z = self.pressure_null
        x[self.n_u:] -= z * (w @ x[self.n_u:]) / (w @ z)
        return x


def spmv(A, x):
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def _check(op, x, b, tol, what):
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(op @ x - b)
    rel = res / bnorm if bnorm > 0 else res
    if rel > tol:
        raise ConvergenceError(f"{what}: relative residual {rel:.3e} > {tol:.1e}", rel)
    return rel


def cg(A, b, rel_tol=1e-10, max_iters=None, x0=None):
    """Jacobi-preconditioned conjugate gradients.  Returns (x, iterations)."""
    n = len(b)
    max_iters = 10 * n if max_iters is None else max_iters
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0:
        return np.zeros(n), 0
    dinv = 1.0 / A.diagonal()
    it = 0
    while it < max_iters:
        # restart from the true residual to avoid recurrence drift
        r = b - A @ x
        if np.linalg.norm(r) <= rel_tol * bnorm:
            return x, it
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < max_iters:
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise ConvergenceError("CG breakdown: matrix not positive definite",
                                       np.linalg.norm(r) / bnorm, it)
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) <= 0.5 * rel_tol * bnorm:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    rel = np.linalg.norm(b - A @ x) / bnorm
    if rel > rel_tol:
        raise ConvergenceError(f"CG did not converge in {max_iters} iterations", rel, it)
    return x, it


def gmres(matvec, b, precond=None, rel_tol=1e-10, restart=50, max_iters=None,
          project=None, x0=None):
    """Right-preconditioned restarted GMRES.  Returns (x, iterations).

    ``project`` is applied to every correction, which keeps iterates in a
    chosen complement of a known null space.
    """
    n = len(b)
    max_iters = 10 * n if max_iters is None else max_iters
    precond = precond or (lambda v: v)
    project = project or (lambda v: v)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0:
        return np.zeros(n), 0
    it = 0
    last = np.inf
    while True:
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        if beta <= rel_tol * bnorm:
            return x, it
        if it >= max_iters or beta > 0.999 * last:
            reason = "stagnated" if beta > 0.999 * last else f"hit {max_iters} iterations"
            raise ConvergenceError(f"GMRES {reason}", beta / bnorm, it)
        last = beta
        m = restart
        Q = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        Q[0] = r / beta
        k = 0
        for j in range(m):
            Z[j] = precond(Q[j])
            w = matvec(Z[j])
            for _ in range(2):
                h = Q[: j + 1] @ w
                w = w - h @ Q[: j + 1]
                H[: j + 1, j] += h
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 0:
                Q[j + 1] = w / H[j + 1, j]
            for i in range(j):
                a, c = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * a + sn[i] * c
                H[i + 1, j] = -sn[i] * a + cs[i] * c
            d = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (H[j, j] / d, H[j + 1, j] / d) if d > 0 else (1.0, 0.0)
            H[j, j] = d
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            it += 1
            k = j + 1
            if abs(g[j + 1]) <= 0.5 * rel_tol * bnorm or it >= max_iters or d == 0:
                break
        y = np.linalg.lstsq(np.triu(H[:k, :k]), g[:k], rcond=None)[0]
        x = x + project(y @ Z[:k])


def _factorize(A):
    return spla.splu(sp.csc_matrix(A))


class LinearSolver:
    """Reusable solver for a fixed operator.

    ``direct`` factorizes once with SuperLU; ``cg`` and ``gmres`` reuse the
    preconditioner factorizations across calls.  For a :class:`BlockSystem`
    with a pressure null space, ``project_mean`` removes the incompatible
    rhs component and returns the zero-mean pressure solution.
    """

    def __init__(self, op, cfg: SolverConfig | None = None, precond=None,
                 project_mean=False, symmetric=False):
        self.op = op
        self.cfg = cfg or SolverConfig()
        self.project_mean = project_mean
        self.symmetric = symmetric
        self._lu = None
        self._precond = None
        self._precond_spec = precond

    @property
    def is_block(self):
        return isinstance(self.op, BlockSystem)

    def _direct(self, b):
        op = self.op
        if self._lu is None:
            if self.is_block and op.pressure_null is not None:
                self._lu = _factorize(_bordered(op))
            else:
                self._lu = _factorize(op.to_sparse() if self.is_block else op)
        if self.is_block and op.pressure_null is not None:
            x = self._lu.solve(np.concatenate([b, [0.0]]))[:-1]
        else:
            x = self._lu.solve(b)
        return x

    def _build_precond(self):
        spec = self._precond_spec
        if spec is None and self.is_block:
            spec = self.op.precond_blocks or _default_blocks(self.op)
        if spec is None:
            d = self.op.diagonal()
            d = np.where(d != 0, d, 1.0)
            return lambda v: v / d
        if isinstance(spec, tuple):
            lus = [_factorize(S) for S in spec]
            n_u = lus[0].shape[0]
            return lambda v: np.concatenate([lus[0].solve(v[:n_u]), lus[1].solve(v[n_u:])])
        lu = _factorize(spec)
        return lu.solve

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        op, cfg = self.op, self.cfg
        if b.shape[0] != op.shape[0]:
            raise ValueError(f"rhs has length {b.shape[0]}, operator is {op.shape}")
        if self.is_block and self.project_mean:
            b = op.project_rhs(b)
        if cfg.method == "direct":
            x = self._direct(b)
            res = np.linalg.norm(op @ x - b)
            bnorm = np.linalg.norm(b)
            if bnorm > 0 and res > cfg.rel_tol * bnorm:
                # one step of iterative refinement
                x = x + self._direct(b - op @ x)
        elif cfg.method == "cg" and not self.is_block and self.symmetric:
            x, _ = cg(op, b, cfg.rel_tol, cfg.iteration_limit(len(b)))
        else:
            if self._precond is None:
                self._precond = self._build_precond()
            project = None
            if self.is_block and self.project_mean:
                project = op.project_solution
            x, _ = gmres(op.matvec if self.is_block else (lambda v: op @ v), b,
                         self._precond, cfg.rel_tol, cfg.restart,
                         cfg.iteration_limit(len(b)), project)
        if self.is_block and self.project_mean:
            x = op.project_solution(x)
        _check(op, x, b, cfg.rel_tol, f"{cfg.method} solve")
        return x


def _bordered(op: BlockSystem):
    K = op.to_sparse()
    n = K.shape[0]
    col = np.zeros(n)
    col[op.n_u:] = op.pressure_mass if op.pressure_mass is not None else op.pressure_null
    c = sp.csc_matrix(col[:, None])
    return sp.bmat([[K, c], [c.T, None]], format="csc")


def _default_blocks(op: BlockSystem):
    if op.D is not None and op.D.nnz > 0:
        return (op.A, op.D)
    # Schur complement approximation B diag(A)^-1 Bt, pinned if singular
    dinv = sp.diags(1.0 / op.A.diagonal())
    S = -(op.B @ dinv @ op.Bt).tocsr()
    if op.pressure_null is not None:
        S = S.tolil()
        S[0, 0] += S[0, 0] if S[0, 0] != 0 else 1.0
        S = S.tocsr()
    return (op.A, S)


def solve_spd(A, b, cfg: SolverConfig | None = None):
    """Solve an SPD system; Jacobi-CG unless ``cfg.method == 'direct'``."""
    cfg = cfg or SolverConfig(method="cg")
    if cfg.method == "gmres":
        cfg = SolverConfig(cfg.rel_tol, cfg.max_iters, "cg", cfg.restart)
    return LinearSolver(A, cfg, symmetric=True)(b)


def solve_general(op, b, cfg: SolverConfig | None = None, precond=None, project_mean=False):
    """Solve a nonsymmetric sparse or block system (GMRES by default)."""
    cfg = cfg or SolverConfig()
    return LinearSolver(op, cfg, precond=precond, project_mean=project_mean)(b)
