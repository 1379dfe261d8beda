"""Approximate block factorization preconditioner for 2x2 coupled systems.

Setup precomputes an explicit sparse approximate inverse of the fiber
block A, forms the approximate Schur complement S_hat = C - B2 Ainv B1t
explicitly, and builds an AMG hierarchy on it. One application runs
kappa sweeps of the predictor / Schur / corrector scheme derived from
the block LDU factorization:

    r      = rhs - [[A, B1t], [B2, C]] x        (block residual)
    d_b    = smooth(A, Ainv, r_b)               (prediction, m sweeps)
    d_s    = vcycle(S_hat, r_s - B2 d_b)        (Schur step)
    d_b    = smooth(A, Ainv, r_b - B1t d_s, from d_b)   (correction)
    x     += (d_b, d_s)

All inner solves start from zero except the corrector, which continues
from the predictor value; with kappa=1 and x0=0 the application is an
exact linear operator in the right-hand side, which is what the outer
right-preconditioned GMRES requires.
"""

import time
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .amg import AmgConfig, build_hierarchy, default_nullspace, vcycle
from .ilut import ilut_factor
from .sparse import BlockSystem, matrix_norms, add_scaled, spgemm
from .spai import SpaiConfig, build_spai, spai_smooth

_DENSE_INVERSE_LIMIT = 2000


@dataclass
class BlockPrecConfig:
    kappa: int = 1
    smoother_iters: int = 1
    spai: SpaiConfig = field(default_factory=SpaiConfig)
    amg: AmgConfig = field(default_factory=AmgConfig)
    schur_cycles: int = 1
    reuse_policy: str = "rebuild_each_solve"  # | "reuse_within_load_step"

    def __post_init__(self):
        if self.kappa < 1 or self.smoother_iters < 1 or self.schur_cycles < 1:
            raise ValueError("kappa, smoother_iters and schur_cycles must be >= 1")
        if self.reuse_policy not in ("rebuild_each_solve", "reuse_within_load_step"):
            raise ValueError(f"unknown reuse policy {self.reuse_policy!r}")

    @classmethod
    def from_dict(cls, doc):
        """Build from a JSON document; unknown keys are rejected."""
        return _dataclass_from_dict(cls, doc, "prec")


def _dataclass_from_dict(cls, doc, where):
    known = {f.name: f for f in fields(cls)}
    unknown = set(doc) - set(known)
    if unknown:
        raise ValueError(f"{where}: unknown configuration keys {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key == "spai" and isinstance(value, dict):
            kwargs[key] = _dataclass_from_dict(SpaiConfig, value, f"{where}.spai")
        elif key == "amg" and isinstance(value, dict):
            kwargs[key] = _dataclass_from_dict(AmgConfig, value, f"{where}.amg")
        elif key == "solid_grid" and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


class BlockPreconditioner:
    """Precomputed SPAI + explicit Schur approximation + AMG hierarchy.

    The inner beam and Schur solvers are exposed as attributes so the
    exact-substitution harness can swap dense solves in; a built handle
    is immutable apart from repeated setup() calls, which increment
    setup_counter.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.ainv = None
        self.schur_hat = None
        self.amg_hierarchy = None
        self.spai_result = None
        self.setup_counter = 0
        self.setup_seconds = 0.0
        self._a = None
        self._b1t = None
        self._b2 = None
        self.beam_solver = None
        self.schur_solver = None

    def setup(self, system, nullspace=None):
        """Build SPAI, the explicit approximate Schur complement and AMG."""
        t0 = time.monotonic()
        cfg = self.cfg
        self._a = system.a
        self._b1t = system.b1t
        self._b2 = system.b2
        if system.n_beam > 0:
            self.spai_result = build_spai(system.a, cfg.spai)
            self.ainv = self.spai_result.approx_inverse
            correction = spgemm(system.b2, spgemm(self.ainv, system.b1t))
            self.schur_hat = add_scaled(system.c, -1.0, correction)
        else:
            self.spai_result = None
            self.ainv = sp.csr_matrix((0, 0))
            self.schur_hat = system.c.copy()
        if nullspace is None:
            nullspace = default_nullspace(system.n_solid, cfg.amg.nullspace_dim)
        self.amg_hierarchy = build_hierarchy(self.schur_hat, cfg.amg, nullspace)
        self.beam_solver = self._spai_beam_solver
        self.schur_solver = self._amg_schur_solver
        self.setup_counter += 1
        self.setup_seconds = time.monotonic() - t0
        return self

    def _spai_beam_solver(self, rhs, x0):
        return spai_smooth(self._a, self.ainv, rhs, x0, self.cfg.smoother_iters)

    def _amg_schur_solver(self, rhs):
        x = np.zeros_like(rhs)
        for _ in range(self.cfg.schur_cycles):
            x = vcycle(self.amg_hierarchy, rhs, x)
        return x

    def apply(self, system, rhs_beam, rhs_solid, x0_beam=None, x0_solid=None):
        """kappa predictor/Schur/corrector sweeps; returns the updated pair."""
        x_b = np.zeros(system.n_beam) if x0_beam is None else np.array(x0_beam, dtype=float)
        x_s = np.zeros(system.n_solid) if x0_solid is None else np.array(x0_solid, dtype=float)
        for _ in range(self.cfg.kappa):
            y_b, y_s = system.apply(x_b, x_s)
            r_b = rhs_beam - y_b
            r_s = rhs_solid - y_s
            if system.n_beam > 0:
                d_b = self.beam_solver(r_b, np.zeros_like(r_b))
                d_s = self.schur_solver(r_s - self._b2 @ d_b)
                d_b = self.beam_solver(r_b - self._b1t @ d_s, d_b)
            else:
                d_b = np.zeros(0)
                d_s = self.schur_solver(r_s)
            x_b = x_b + d_b
            x_s = x_s + d_s
        return x_b, x_s

    def as_gmres_preconditioner(self, system):
        """Monolithic-vector application v -> P^{-1} v for right GMRES."""
        def pmv(v):
            y_b, y_s = self.apply(system, v[: system.n_beam], v[system.n_beam:])
            return np.concatenate([y_b, y_s])
        return pmv


def setup(system, cfg, nullspace=None):
    """Build a :class:`BlockPreconditioner` for the given system."""
    return BlockPreconditioner(cfg).setup(system, nullspace)


def apply(prec, system, rhs_beam, rhs_solid, x0_beam=None, x0_solid=None):
    return prec.apply(system, rhs_beam, rhs_solid, x0_beam, x0_solid)


def exact_substitution(prec, system):
    """Swap dense-exact inner solvers into a built preconditioner.

    Replaces the SPAI smoother by a dense solve with A^{-1} and the AMG
    Schur step by a dense solve with the exact Schur complement
    (C - B2 A^{-1} B1t)^{-1}. One kappa=1 application then solves the
    block system exactly; kept as a test harness, not a production path.
    """
    a_dense = system.a.toarray()
    a_inv = np.linalg.inv(a_dense)
    schur = system.c.toarray() - system.b2.toarray() @ a_inv @ system.b1t.toarray()
    schur_lu = scipy.linalg.lu_factor(schur)
    a_lu = scipy.linalg.lu_factor(a_dense)
    prec.beam_solver = lambda rhs, x0: scipy.linalg.lu_solve(a_lu, rhs)
    prec.schur_solver = lambda rhs: scipy.linalg.lu_solve(schur_lu, rhs)
    return prec


@dataclass
class DominanceRow:
    name: str
    offdiag_norm: float
    inv_diag_norm_reciprocal: float
    estimated: bool = False

    @property
    def dominant(self):
        return self.offdiag_norm <= self.inv_diag_norm_reciprocal


@dataclass
class DominanceReport:
    norm_kind: str
    rows: list

    @property
    def beam(self):
        return self.rows[0]

    @property
    def solid(self):
        return self.rows[1]


_NORM_KEY = {"one": "one_norm", "inf": "inf_norm", "frobenius": "frobenius"}


def _dense_norm(m, kind):
    if kind == "one":
        return float(np.abs(m).sum(axis=0).max()) if m.size else 0.0
    if kind == "inf":
        return float(np.abs(m).sum(axis=1).max()) if m.size else 0.0
    return float(np.linalg.norm(m))


def _beam_inverse_norm(system, kind):
    """Exact ||A^{-1}|| from per-fiber dense inverses (A is block diagonal)."""
    bounds = system.beam_block_boundaries
    a = system.a
    per_block = []
    for f in range(len(bounds) - 1):
        lo, hi = int(bounds[f]), int(bounds[f + 1])
        blk = a[lo:hi, lo:hi].toarray()
        per_block.append(_dense_norm(np.linalg.inv(blk), kind))
    if not per_block:
        return 0.0
    if kind == "frobenius":
        return float(np.sqrt(np.sum(np.square(per_block))))
    return float(max(per_block))


def _solid_inverse_norm(system, kind):
    """||C^{-1}||: dense when small, Hager 1-norm estimate otherwise."""
    c = system.c
    n = c.shape[0]
    if n <= _DENSE_INVERSE_LIMIT:
        return _dense_norm(np.linalg.inv(c.toarray()), kind), False
    lu = spla.splu(c.tocsc())
    op = spla.LinearOperator(
        (n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T")
    )
    op_t = spla.LinearOperator(
        (n, n), matvec=lambda v: lu.solve(v, trans="T"), rmatvec=lu.solve
    )
    if kind == "inf":
        # ||X||_inf == ||X^T||_1
        return float(spla.onenormest(op_t)), True
    return float(spla.onenormest(op)), True


def dominance_report(system, norm_kind="inf"):
    """Per-block-row comparison sum_offdiag ||A_ij|| <= 1 / ||A_ii^{-1}||."""
    if norm_kind not in _NORM_KEY:
        raise ValueError(f"unknown norm kind {norm_kind!r}")
    key = _NORM_KEY[norm_kind]
    rows = []
    if system.n_beam > 0:
        beam_off = matrix_norms(system.b1t)[key]
        beam_inv = _beam_inverse_norm(system, norm_kind)
        rows.append(DominanceRow("beam", beam_off,
                                 1.0 / beam_inv if beam_inv > 0 else np.inf))
    else:
        rows.append(DominanceRow("beam", 0.0, np.inf))
    solid_off = matrix_norms(system.b2)[key]
    solid_inv, estimated = _solid_inverse_norm(system, norm_kind)
    rows.append(DominanceRow("solid", solid_off,
                             1.0 / solid_inv if solid_inv > 0 else np.inf,
                             estimated=estimated))
    return DominanceReport(norm_kind=norm_kind, rows=rows)


class OneLevelIlut:
    """ILUT of the assembled monolithic matrix, the naive baseline."""

    def __init__(self, system, p, tau):
        self.system = system
        t0 = time.monotonic()
        self.factors = ilut_factor(system.monolithic(), p, tau)
        self.setup_seconds = time.monotonic() - t0

    def __call__(self, v):
        return self.factors.solve(v)


def one_level_baseline(system, p, tau):
    return OneLevelIlut(system, p, tau)
