"""Right-preconditioned restarted GMRES and spectral diagnostics.

The solver runs Arnoldi with modified Gram-Schmidt plus one
reorthogonalization pass and a Givens-rotation least squares update.
Right preconditioning keeps the monitored quantity equal to the true
residual norm ||b - A x_k||, which is what the convergence test and the
reported history use.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass
class GmresConfig:
    rel_tol: float = 1e-8
    max_iters: int = 500
    restart: int = 200

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    residual_history: list = field(default_factory=list)
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0

    @property
    def total_seconds(self):
        return self.setup_seconds + self.solve_seconds

    def csv_row(self):
        return [
            self.iterations,
            self.converged,
            f"{self.setup_seconds:.3f}",
            f"{self.solve_seconds:.3f}",
            f"{self.total_seconds:.3f}",
        ]


@dataclass
class SpectrumReport:
    lambda_min: float
    lambda_max: float
    ratio: float
    one_norm_condition: float
    symmetrized: bool = False


def _as_matvec(op):
    if callable(op) and not sp.issparse(op):
        return op
    return lambda v: op @ v


def gmres(op, b, cfg, prec=None, x0=None):
    """Right-preconditioned restarted GMRES.

    op: square linear operator (sparse matrix or callable v -> A v).
    prec: linear preconditioner application v -> M^{-1} v (None = identity).
    Returns (x, SolveReport); the residual history is normalized so
    history[0] == 1 and carries one entry per iteration thereafter.
    Happy breakdown counts as convergence; NaN in the Arnoldi process
    raises.
    """
    amv = _as_matvec(op)
    pmv = _as_matvec(prec) if prec is not None else (lambda v: v)
    b = np.asarray(b, dtype=np.float64)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64, copy=True)

    t0 = time.monotonic()
    r = b - amv(x) if x.any() else b.copy()
    beta0 = np.linalg.norm(r)
    history = [1.0]
    report = SolveReport(residual_history=history)
    if beta0 == 0.0:
        report.converged = True
        report.solve_seconds = time.monotonic() - t0
        return x, report
    tol_abs = cfg.rel_tol * beta0
    beta = beta0

    total_it = 0
    while total_it < cfg.max_iters:
        m = min(cfg.restart, cfg.max_iters - total_it)
        V = np.zeros((n, m + 1))
        Z = np.zeros((n, m))  # preconditioned directions, for the update
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[:, 0] = r / beta
        g[0] = beta
        j_used = 0
        breakdown = False
        for j in range(m):
            z = pmv(V[:, j])
            w = amv(z)
            Z[:, j] = z
            for i in range(j + 1):
                H[i, j] = V[:, i] @ w
                w -= H[i, j] * V[:, i]
            # one reorthogonalization pass
            for i in range(j + 1):
                corr = V[:, i] @ w
                H[i, j] += corr
                w -= corr * V[:, i]
            hj = np.linalg.norm(w)
            if not np.isfinite(hj) or not np.all(np.isfinite(H[: j + 2, j])):
                raise FloatingPointError("gmres: non-finite value in Arnoldi process")
            H[j + 1, j] = hj

            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            rho = np.hypot(H[j, j], H[j + 1, j])
            if rho == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            j_used = j + 1
            total_it += 1
            history.append(abs(g[j + 1]) / beta0)
            if hj == 0.0:
                breakdown = True  # happy breakdown: exact solution in the space
                break
            V[:, j + 1] = w / hj
            if abs(g[j + 1]) <= tol_abs:
                break

        y = np.linalg.solve(
            np.triu(H[:j_used, :j_used]), g[:j_used]
        ) if j_used else np.zeros(0)
        x = x + Z[:, :j_used] @ y
        r = b - amv(x)
        beta = np.linalg.norm(r)
        if breakdown or abs(g[j_used]) <= tol_abs or beta <= tol_abs:
            report.converged = True
            break
    report.iterations = total_it
    report.solve_seconds = time.monotonic() - t0
    return x, report


def lambda_extremes(op, symmetry_tol=1e-12, iters=2000, tol=1e-13, seed=0):
    """Extreme eigenvalue estimates and a 1-norm condition number.

    Symmetric operators are analyzed directly (power iteration for
    lambda_max, inverse power iteration through a sparse LU for
    lambda_min). Nonsymmetric operators are symmetrized as A^T A and the
    square roots of its extremes reported, flagged on the report.
    one_norm_condition is ||A||_1 times a Hager-style estimate of
    ||A^{-1}||_1.
    """
    a = op.tocsr()
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError("lambda_extremes expects a square operator")
    asym = abs(a - a.T)
    scale = abs(a).max() if a.nnz else 1.0
    is_symmetric = asym.nnz == 0 or asym.max() <= symmetry_tol * scale

    rng = np.random.default_rng(seed)
    lu = spla.splu(a.tocsc())

    if is_symmetric:
        lam_max = _power_iteration(lambda v: a @ v, n, rng, iters, tol)
        lam_min = 1.0 / _power_iteration(lambda v: lu.solve(v), n, rng, iters, tol)
    else:
        at = a.T.tocsr()
        lam_max = np.sqrt(_power_iteration(lambda v: at @ (a @ v), n, rng, iters, tol))
        lam_min = 1.0 / np.sqrt(
            _power_iteration(lambda v: lu.solve(lu.solve(v), trans="T"), n, rng, iters, tol)
        )
    inv_norm1 = spla.onenormest(
        spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
    )
    norm1 = spla.norm(a, 1)
    return SpectrumReport(
        lambda_min=float(lam_min),
        lambda_max=float(lam_max),
        ratio=float(lam_max / lam_min),
        one_norm_condition=float(norm1 * inv_norm1),
        symmetrized=not is_symmetric,
    )


def _power_iteration(matvec, n, rng, iters, tol):
    """Dominant eigenvalue of a symmetric operator via power iteration.

    The estimate is the Rayleigh quotient, accurate to second order in
    the eigenvector error; stops once it stagnates to relative tol over
    three consecutive iterations.
    """
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    stable = 0
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        rq = float(v @ w)
        if abs(rq - lam) <= tol * max(abs(rq), 1e-300):
            stable += 1
            if stable >= 3:
                return abs(rq)
        else:
            stable = 0
        lam = rq
        v = w / nw
    return abs(lam)
