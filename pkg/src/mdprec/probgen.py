"""Synthetic generator for penalty-coupled fiber/bulk block systems.

Reproduces the algebraic structure of the regularized mortar coupling:

    A   = K_B + eps * D^T V^{-1} D          (fiber block, block diagonal)
    B1t = -eps * D^T V^{-1} M               (fiber-bulk coupling)
    B2  = -eps * M^T V^{-1} D
    C   = K_S + eps * M^T V^{-1} M          (bulk block)

K_S is a grid Laplacian surrogate (one clamped face, Dirichlet rows
eliminated, entries scaled by E_S*h as a 3D stiffness would be), K_B is
a chain assembly of random SPD element blocks with spectrum in
[0.1, 1]*E_B, D is the lumped fiber-side mass (diagonal, trapezoidal
node weights), V = diag(rowsums(D)) = D, and M interpolates each fiber
node to its 8 surrounding grid nodes with trilinear weights. With this
V, the products collapse: D^T V^{-1} D = diag of node weights and
D^T V^{-1} M = M.

Everything is deterministic for a fixed seed.
"""

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from . import mmio
from .sparse import BlockSystem

_PLACEMENT_ATTEMPTS = 10000


@dataclass
class GenConfig:
    solid_grid: tuple = (10, 10, 10)  # cells per axis
    dofs_per_node: int = 1
    solid_modulus: float = 1.0
    fiber_count: int = 20
    elements_per_fiber: int = 1
    elements_random: bool = False  # True: uniform on 1..elements_per_fiber
    beam_modulus: float = 10.0
    penalty_pos: float = 10.0
    penalty_rot: float = 0.0
    fiber_length: float = 0.25
    fiber_radius: float = 0.005  # metadata only
    dofs_per_beam_node: int = 6
    skew: float = 0.0  # SR-analogue skew perturbation of element blocks
    seed: int = 0

    def __post_init__(self):
        nx, ny, nz = self.solid_grid
        if min(nx, ny, nz) < 1:
            raise ValueError("solid_grid needs at least one cell per axis")
        if self.dofs_per_node not in (1, 3):
            raise ValueError("dofs_per_node must be 1 or 3")
        if self.dofs_per_beam_node not in (6, 9):
            raise ValueError("dofs_per_beam_node must be 6 or 9")
        if not (0.0 < self.fiber_length < 1.0):
            raise ValueError("fiber_length must lie in (0, 1)")
        if self.solid_modulus <= 0 or self.beam_modulus <= 0:
            raise ValueError("moduli must be positive")
        if self.penalty_pos < 0 or self.penalty_rot < 0:
            raise ValueError("penalties must be >= 0")
        if self.elements_per_fiber < 1:
            raise ValueError("elements_per_fiber must be >= 1")


@dataclass
class GenMetadata:
    n_solid_dofs: int
    n_beam_dofs: int
    beam_block_boundaries: list
    fibers: list = field(default_factory=list)
    gen_config: dict = field(default_factory=dict)
    rhs_missing: bool = False


def _node_index(ix, iy, iz, ny, nz):
    return (ix * (ny + 1) + iy) * (nz + 1) + iz


def _solid_grid_maps(cfg):
    """Kept-node numbering after eliminating the clamped face z=0."""
    nx, ny, nz = cfg.solid_grid
    grid = np.full((nx + 1, ny + 1, nz + 1), -1, dtype=np.int64)
    mask = np.zeros_like(grid, dtype=bool)
    mask[:, :, 1:] = True  # iz == 0 is clamped
    grid[mask] = np.arange(mask.sum())
    return grid.ravel(), int(mask.sum())


def _solid_laplacian(cfg, kept, n_kept):
    """7-point Laplacian on kept nodes, scaled by E_S*h^3.

    The h^3 scaling (mass-normalized stiffness) keeps the bulk anchor
    modes orders of magnitude below the penalty scale, so the smallest
    system eigenvalue saturates already at eps ~ E_S. The diagonal
    counts all grid neighbors (eliminated ones included), which keeps
    the operator symmetric positive definite.
    """
    nx, ny, nz = cfg.solid_grid
    h = 1.0 / max(nx, ny, nz)
    scale = cfg.solid_modulus * h**3
    d = cfg.dofs_per_node
    grid = kept.reshape(nx + 1, ny + 1, nz + 1)
    diag = np.zeros(n_kept)
    rows, cols = [], []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        left = grid[tuple(lo)].ravel()
        right = grid[tuple(hi)].ravel()
        # every in-grid edge contributes to the diagonal of its kept endpoints
        np.add.at(diag, left[left >= 0], 1.0)
        np.add.at(diag, right[right >= 0], 1.0)
        both = (left >= 0) & (right >= 0)
        rows.extend([left[both], right[both]])
        cols.extend([right[both], left[both]])
    rows = np.concatenate(rows + [np.arange(n_kept)])
    cols = np.concatenate(cols + [np.arange(n_kept)])
    vals = np.concatenate([-np.ones(len(rows) - n_kept), diag])
    node_lap = sp.coo_matrix((vals, (rows, cols)), shape=(n_kept, n_kept)).tocsr()
    lap = sp.kron(node_lap, sp.identity(d), format="csr") * scale
    lap.sort_indices()
    return lap


def _trilinear_weights(point, cfg, kept):
    """(kept solid node, weight) pairs for the 8 grid nodes around point."""
    nx, ny, nz = cfg.solid_grid
    out = []
    cx = min(int(point[0] * nx), nx - 1)
    cy = min(int(point[1] * ny), ny - 1)
    cz = min(int(point[2] * nz), nz - 1)
    fx = point[0] * nx - cx
    fy = point[1] * ny - cy
    fz = point[2] * nz - cz
    for bx in (0, 1):
        for by in (0, 1):
            for bz in (0, 1):
                w = ((fx if bx else 1.0 - fx)
                     * (fy if by else 1.0 - fy)
                     * (fz if bz else 1.0 - fz))
                node = kept[_node_index(cx + bx, cy + by, cz + bz, ny, nz)]
                if node >= 0 and w > 0.0:
                    out.append((int(node), float(w)))
    return out


def _place_fibers(cfg, rng):
    """Random segments of fixed length fully inside the unit cube."""
    fibers = []
    for k in range(cfg.fiber_count):
        for _ in range(_PLACEMENT_ATTEMPTS):
            start = rng.uniform(0.0, 1.0, size=3)
            v = rng.standard_normal(3)
            v /= np.linalg.norm(v)
            end = start + cfg.fiber_length * v
            if np.all(end >= 0.0) and np.all(end <= 1.0):
                break
        else:
            raise RuntimeError(f"fiber {k}: placement failed after {_PLACEMENT_ATTEMPTS} attempts")
        if cfg.elements_random and cfg.elements_per_fiber > 1:
            n_e = int(rng.integers(1, cfg.elements_per_fiber + 1))
        else:
            n_e = cfg.elements_per_fiber
        fibers.append((start, end, n_e))
    return fibers


def _random_spd_block(rng, size, e_beam, skew):
    g = rng.standard_normal((size, size))
    q, _ = np.linalg.qr(g)
    lam = rng.uniform(0.1, 1.0, size=size) * e_beam
    block = (q * lam) @ q.T
    block = 0.5 * (block + block.T)
    if skew > 0.0:
        s = rng.standard_normal((size, size))
        block = block + skew * e_beam * 0.5 * (s - s.T)
    return block


def generate(cfg):
    """Build a :class:`BlockSystem` and its metadata from a config."""
    rng = np.random.default_rng(cfg.seed)
    kept, n_kept = _solid_grid_maps(cfg)
    d = cfg.dofs_per_node
    n_solid = n_kept * d
    k_solid = _solid_laplacian(cfg, kept, n_kept)

    fibers = _place_fibers(cfg, rng)
    w = cfg.dofs_per_beam_node
    boundaries = [0]
    fiber_meta = []
    for start, end, n_e in fibers:
        boundaries.append(boundaries[-1] + (n_e + 1) * w)
        fiber_meta.append(
            {"start": [float(x) for x in start],
             "end": [float(x) for x in end],
             "elements": int(n_e)}
        )
    n_beam = boundaries[-1]

    # fiber stiffness: chain of random SPD element blocks, half-block overlap
    a_rows, a_cols, a_vals = [], [], []
    for f, (start, end, n_e) in enumerate(fibers):
        off = boundaries[f]
        for e in range(n_e):
            blk = _random_spd_block(rng, 2 * w, cfg.beam_modulus, cfg.skew)
            idx = off + e * w + np.arange(2 * w)
            a_rows.append(np.repeat(idx, 2 * w))
            a_cols.append(np.tile(idx, 2 * w))
            a_vals.append(blk.ravel())

    # coupling: node weights (trapezoidal lumping of the fiber partition)
    b1t_rows, b1t_cols, b1t_vals = [], [], []
    c_pen_rows, c_pen_cols, c_pen_vals = [], [], []
    a_pen_rows, a_pen_vals = [], []
    b2_extra = ([], [], [])  # rotational-analogue asymmetry goes here

    def couple(points, weights, dof_offset_in_node, eps, f_off, w_node, perturb=None):
        """Accumulate penalty contributions for one fiber and one coupling set."""
        for p, (pt, wp) in enumerate(zip(points, weights)):
            interp = _trilinear_weights(pt, cfg, kept)
            for c in range(d):
                beam_dof = f_off + p * w_node + dof_offset_in_node + c
                a_pen_rows.append(beam_dof)
                a_pen_vals.append(eps * wp)
                for g, ng in interp:
                    sdof = g * d + c
                    b1t_rows.append(beam_dof)
                    b1t_cols.append(sdof)
                    b1t_vals.append(-eps * wp * ng)
                    if perturb is not None:
                        b2_extra[0].append(sdof)
                        b2_extra[1].append(beam_dof)
                        b2_extra[2].append(-eps * wp * ng * perturb(p, c, g))
                for (g1, n1) in interp:
                    for (g2, n2) in interp:
                        c_pen_rows.append(g1 * d + c)
                        c_pen_cols.append(g2 * d + c)
                        c_pen_vals.append(eps * wp * n1 * n2)

    for f, (start, end, n_e) in enumerate(fibers):
        pts = [start + (end - start) * (t / n_e) for t in range(n_e + 1)]
        elem_len = cfg.fiber_length / n_e
        wts = np.full(n_e + 1, elem_len)
        wts[0] = wts[-1] = elem_len / 2.0
        if cfg.penalty_pos > 0.0:
            couple(pts, wts, 0, cfg.penalty_pos, boundaries[f], w)
        if cfg.penalty_rot > 0.0 and w == 9:
            # deterministic perturbation makes B1t != B2^T, mirroring the
            # configuration-dependent rotational coupling terms
            fac = rng.uniform(0.9, 1.1, size=(n_e + 1, d))
            couple(pts, wts, 6, cfg.penalty_rot, boundaries[f], w,
                   perturb=lambda p, c, g, fac=fac: fac[p, c])

    a = sp.coo_matrix(
        (np.concatenate(a_vals) if a_vals else np.zeros(0),
         (np.concatenate(a_rows) if a_rows else np.zeros(0, dtype=np.int64),
          np.concatenate(a_cols) if a_cols else np.zeros(0, dtype=np.int64))),
        shape=(n_beam, n_beam),
    ).tocsr()
    if a_pen_rows:
        pen = sp.coo_matrix(
            (np.array(a_pen_vals), (np.array(a_pen_rows), np.array(a_pen_rows))),
            shape=(n_beam, n_beam),
        ).tocsr()
        a = a + pen

    b1t = sp.coo_matrix(
        (np.array(b1t_vals), (np.array(b1t_rows, dtype=np.int64), np.array(b1t_cols, dtype=np.int64))),
        shape=(n_beam, n_solid),
    ).tocsr() if b1t_vals else sp.csr_matrix((n_beam, n_solid))

    b2 = b1t.T.tocsr()
    if b2_extra[2]:
        # replace the symmetric rotational rows of B2 by the perturbed ones:
        # the perturbed triplets are generated alongside the b1t entries for
        # the rotational block only, so subtract those and add the perturbed.
        rot = sp.coo_matrix(
            (np.array(b2_extra[2]), (np.array(b2_extra[0]), np.array(b2_extra[1]))),
            shape=(n_solid, n_beam),
        ).tocsr()
        sym_rot = _rotational_part_of(b1t, cfg, boundaries).T.tocsr()
        b2 = b2 - sym_rot + rot

    c = k_solid
    if c_pen_vals:
        pen_c = sp.coo_matrix(
            (np.array(c_pen_vals), (np.array(c_pen_rows), np.array(c_pen_cols))),
            shape=(n_solid, n_solid),
        ).tocsr()
        c = c + pen_c

    rhs_solid = _face_load(cfg, kept, n_kept)
    rhs_beam = np.zeros(n_beam)

    system = BlockSystem(a, b1t, b2, c, rhs_beam, rhs_solid, np.array(boundaries))
    meta = GenMetadata(
        n_solid_dofs=n_solid,
        n_beam_dofs=n_beam,
        beam_block_boundaries=[int(b) for b in boundaries],
        fibers=fiber_meta,
        gen_config=asdict(cfg) | {"solid_grid": list(cfg.solid_grid)},
    )
    return system, meta


def _rotational_part_of(b1t, cfg, boundaries):
    """Rows of B1t belonging to rotational beam dofs (offsets 6..9)."""
    w = cfg.dofs_per_beam_node
    d = cfg.dofs_per_node
    mask_rows = np.zeros(b1t.shape[0], dtype=bool)
    for f in range(len(boundaries) - 1):
        for dof in range(boundaries[f], boundaries[f + 1]):
            local = (dof - boundaries[f]) % w
            if 6 <= local < 6 + d:
                mask_rows[dof] = True
    keep = sp.diags(mask_rows.astype(np.float64))
    out = (keep @ b1t).tocsr()
    out.sort_indices()
    return out


def _face_load(cfg, kept, n_kept):
    """Unit load on every dof of the face opposite the clamp (z = 1)."""
    nx, ny, nz = cfg.solid_grid
    d = cfg.dofs_per_node
    rhs = np.zeros(n_kept * d)
    face = kept.reshape(nx + 1, ny + 1, nz + 1)[:, :, nz].ravel()
    face = face[face >= 0]
    for c in range(d):
        rhs[face * d + c] = 1.0
    return rhs


def save_system(system, out_dir, meta=None, hex_floats=False):
    """Write a.mtx, b1t.mtx, b2.mtx, c.mtx, rhs.vec and meta.json."""
    os.makedirs(out_dir, exist_ok=True)
    mmio.write_matrix(os.path.join(out_dir, "a.mtx"), system.a, hex_floats)
    mmio.write_matrix(os.path.join(out_dir, "b1t.mtx"), system.b1t, hex_floats)
    mmio.write_matrix(os.path.join(out_dir, "b2.mtx"), system.b2, hex_floats)
    mmio.write_matrix(os.path.join(out_dir, "c.mtx"), system.c, hex_floats)
    mmio.write_vector(os.path.join(out_dir, "rhs.vec"), system.monolithic_rhs(), hex_floats)
    record = {
        "version": 1,
        "sizes": {"beam": int(system.n_beam), "solid": int(system.n_solid)},
        "beam_block_boundaries": [int(b) for b in system.beam_block_boundaries],
        "fibers": meta.fibers if meta is not None else [],
        "gen_config": meta.gen_config if meta is not None else {},
        "nnz": {
            "a": int(system.a.nnz),
            "b1t": int(system.b1t.nnz),
            "b2": int(system.b2.nnz),
            "c": int(system.c.nnz),
        },
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as f:
        json.dump(record, f, indent=1)
    return sorted(os.listdir(out_dir))


def load_system(in_dir):
    """Read a saved system back; returns (BlockSystem, meta dict).

    A missing rhs.vec is tolerated: right-hand sides default to zero and
    the returned metadata carries rhs_missing=True.
    """
    meta_path = os.path.join(in_dir, "meta.json")
    with open(meta_path) as f:
        meta = json.load(f)
    n_beam = meta["sizes"]["beam"]
    n_solid = meta["sizes"]["solid"]
    a = mmio.read_matrix(os.path.join(in_dir, "a.mtx"))
    b1t = mmio.read_matrix(os.path.join(in_dir, "b1t.mtx"))
    b2 = mmio.read_matrix(os.path.join(in_dir, "b2.mtx"))
    c = mmio.read_matrix(os.path.join(in_dir, "c.mtx"))
    rhs_path = os.path.join(in_dir, "rhs.vec")
    if os.path.exists(rhs_path):
        rhs = mmio.read_vector(rhs_path)
        meta["rhs_missing"] = False
    else:
        rhs = np.zeros(n_beam + n_solid)
        meta["rhs_missing"] = True
    if a.shape != (n_beam, n_beam) or c.shape != (n_solid, n_solid):
        raise ValueError("loaded block sizes disagree with meta.json")
    if len(rhs) != n_beam + n_solid:
        raise ValueError("loaded rhs length disagrees with meta.json")
    system = BlockSystem(
        a, b1t, b2, c, rhs[:n_beam], rhs[n_beam:],
        np.array(meta["beam_block_boundaries"], dtype=np.int64),
    )
    return system, meta
