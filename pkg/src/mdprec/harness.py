"""Batch experiment harness: parameter studies, sweeps, and reports.

Each study builds systems from a generator config (or loads them from
disk), runs the configured solver stack, and emits CSV rows in the
standard study-table layouts. Non-convergence is encoded as
converged=false with iterations at the cap, never as a missing row.
Identical config + seed reproduce identical CSV output except for the
timing columns.
"""

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, asdict

import numpy as np
import scipy.sparse.linalg as spla

from .amg import AmgConfig
from .blockprec import (BlockPrecConfig, BlockPreconditioner, _dataclass_from_dict,
                        one_level_baseline, setup as prec_setup)
from .krylov import GmresConfig, gmres, lambda_extremes
from .probgen import GenConfig, generate, load_system
from .spai import SpaiConfig, build_spai

MODES = ("spai_study", "penalty_sweep", "refinement_sweep", "solver_compare", "single_solve")


@dataclass
class ExperimentConfig:
    mode: str = "single_solve"
    gen: GenConfig = field(default_factory=GenConfig)
    input_dir: str | None = None
    prec: BlockPrecConfig = field(default_factory=BlockPrecConfig)
    gmres: GmresConfig = field(default_factory=GmresConfig)
    load_steps: int = 1
    newton_steps_per_load_step: int = 1
    sigma_list: list = field(default_factory=list)
    ell_list: list = field(default_factory=list)
    epsilon_list: list = field(default_factory=list)
    grid_list: list = field(default_factory=list)  # per-grid gen overrides
    baseline_fill: float = 1.0
    baseline_drop: float = 1e-4
    rel_error_max_size: int = 2000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        needs = {
            "spai_study": ("sigma_list", "ell_list"),
            "penalty_sweep": ("epsilon_list",),
            "refinement_sweep": ("grid_list",),
            "solver_compare": ("grid_list",),
        }
        for name in needs.get(self.mode, ()):
            if not getattr(self, name):
                raise ValueError(f"mode {self.mode!r} requires a nonempty {name}")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"experiment: unknown configuration keys {sorted(unknown)}")
        kwargs = dict(doc)
        if "gen" in kwargs and isinstance(kwargs["gen"], dict):
            kwargs["gen"] = _dataclass_from_dict(GenConfig, kwargs["gen"], "gen")
        if "prec" in kwargs and isinstance(kwargs["prec"], dict):
            kwargs["prec"] = BlockPrecConfig.from_dict(kwargs["prec"])
        if "gmres" in kwargs and isinstance(kwargs["gmres"], dict):
            kwargs["gmres"] = _dataclass_from_dict(GmresConfig, kwargs["gmres"], "gmres")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path_or_text):
        if isinstance(path_or_text, str) and path_or_text.lstrip().startswith("{"):
            doc = json.loads(path_or_text)
        else:
            with open(path_or_text) as f:
                doc = json.load(f)
        return cls.from_dict(doc)


def _gen_with(cfg, **overrides):
    base = asdict(cfg.gen)
    base.update(overrides)
    base["solid_grid"] = tuple(base["solid_grid"])
    return GenConfig(**base)


def _get_system(cfg, gen_cfg=None):
    if cfg.input_dir:
        system, _ = load_system(cfg.input_dir)
        return system
    system, _ = generate(gen_cfg if gen_cfg is not None else cfg.gen)
    return system


def _solve_once(system, prec, gmres_cfg):
    pmv = prec.as_gmres_preconditioner(system)
    return gmres(system.monolithic(), system.monolithic_rhs(), gmres_cfg, prec=pmv)


def _csv(rows, header):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


SPAI_STUDY_HEADER = [
    "sigma", "ell", "nnz_filtered", "nnz_pattern", "nnz_result",
    "iterations", "converged", "setup_seconds", "solve_seconds",
    "total_seconds", "residual_fro", "rel_error_fro",
]


def _spai_study_point(cfg, sigma, ell):
    gen_cfg = cfg.gen
    system = _get_system(cfg, gen_cfg)
    prec_cfg = BlockPrecConfig(
        kappa=cfg.prec.kappa,
        smoother_iters=cfg.prec.smoother_iters,
        spai=SpaiConfig(
            sigma=sigma, ell=ell,
            enable_prefilter=cfg.prec.spai.enable_prefilter,
            enable_postfilter=cfg.prec.spai.enable_postfilter,
            max_pattern_nnz_per_column=cfg.prec.spai.max_pattern_nnz_per_column,
        ),
        amg=cfg.prec.amg,
        schur_cycles=cfg.prec.schur_cycles,
    )
    prec = prec_setup(system, prec_cfg)
    _, report = _solve_once(system, prec, cfg.gmres)
    report.setup_seconds = prec.setup_seconds
    sres = prec.spai_result
    rel_error = ""
    if system.n_beam and system.n_beam <= cfg.rel_error_max_size:
        a_inv = np.linalg.inv(system.a.toarray())
        diff = sres.approx_inverse.toarray() - a_inv
        rel_error = float(np.linalg.norm(diff) / np.linalg.norm(a_inv))
    return [
        sigma, ell, sres.filtered_graph_nnz, sres.pattern_nnz,
        int(sres.approx_inverse.nnz), report.iterations, report.converged,
        f"{report.setup_seconds:.3f}", f"{report.solve_seconds:.3f}",
        f"{report.total_seconds:.3f}", sres.residual_fro, rel_error,
    ]


def run_spai_study(cfg, jobs=1):
    """Sweep (sigma, ell); one CSV row per pair with SPAI statistics."""
    points = [(s, l) for s in cfg.sigma_list for l in cfg.ell_list]
    rows = _map_points(_spai_study_point, cfg, points, jobs)
    return _csv(rows, SPAI_STUDY_HEADER)


PENALTY_SWEEP_HEADER = [
    "epsilon", "lambda_min", "lambda_max", "ratio", "one_norm_condition",
    "iterations", "converged", "setup_seconds", "solve_seconds", "total_seconds",
]


def _penalty_point(cfg, eps):
    gen_cfg = _gen_with(cfg, penalty_pos=eps)
    system = _get_system(cfg, gen_cfg)
    spectrum = lambda_extremes(system.monolithic())
    prec = prec_setup(system, cfg.prec)
    _, report = _solve_once(system, prec, cfg.gmres)
    return [
        eps, spectrum.lambda_min, spectrum.lambda_max, spectrum.ratio,
        spectrum.one_norm_condition, report.iterations, report.converged,
        f"{prec.setup_seconds:.3f}", f"{report.solve_seconds:.3f}",
        f"{prec.setup_seconds + report.solve_seconds:.3f}",
    ]


def run_penalty_sweep(cfg, jobs=1):
    """Sweep the positional penalty; spectral diagnostics per point."""
    rows = _map_points(_penalty_point, cfg, list(cfg.epsilon_list), jobs)
    return _csv(rows, PENALTY_SWEEP_HEADER)


REFINEMENT_HEADER = [
    "grid", "n_beam", "n_solid", "n_total", "transfer", "reuse", "setups",
    "mean_iterations_per_solve", "mean_iterations_per_load_step",
    "converged_all", "setup_seconds", "solve_seconds", "total_seconds",
]


def _newton_rhs(system, step, seed):
    """Perturbed right-hand side emulating a Newton step re-solve."""
    if step == 0:
        return system.monolithic_rhs()
    rng = np.random.default_rng(seed + 7919 * step)
    base = system.monolithic_rhs()
    scale = np.linalg.norm(base) / np.sqrt(len(base))
    return base + 0.01 * scale * rng.standard_normal(len(base))


def _run_load_steps(cfg, system, prec_cfg):
    """Load-step loop honoring the reuse policy; returns statistics."""
    prec = BlockPreconditioner(prec_cfg)
    op = system.monolithic()
    iterations = []
    converged = True
    setup_time = 0.0
    solve_time = 0.0
    step = 0
    for _ in range(cfg.load_steps):
        for newton in range(cfg.newton_steps_per_load_step):
            # reuse: one setup per load step; rebuild: one per solve
            if prec_cfg.reuse_policy == "rebuild_each_solve" or newton == 0:
                prec.setup(system)
                setup_time += prec.setup_seconds
            rhs = _newton_rhs(system, step, cfg.gen.seed)
            t0 = time.monotonic()
            _, rep = gmres(op, rhs, cfg.gmres, prec=prec.as_gmres_preconditioner(system))
            solve_time += time.monotonic() - t0
            iterations.append(rep.iterations)
            converged = converged and rep.converged
            step += 1
    return {
        "setups": prec.setup_counter,
        "iterations": iterations,
        "mean_iterations": float(np.mean(iterations)),
        "converged": converged,
        "setup_seconds": setup_time,
        "solve_seconds": solve_time,
    }


def run_refinement_sweep(cfg, jobs=1):
    """Mesh-refinement study under plain/smoothed transfers and reuse.

    Averaged iterations are reported at both granularities (per linear
    solve and per load step) since reports mix the two conventions.
    """
    rows = []
    for grid_over in cfg.grid_list:
        gen_cfg = _gen_with(cfg, **grid_over)
        system = _get_system(cfg, gen_cfg)
        for transfer in ("smoothed", "plain"):
            for reuse in (False, True):
                prec_cfg = _with_transfer(cfg.prec, transfer, reuse)
                stats = _run_load_steps(cfg, system, prec_cfg)
                per_step = np.array(stats["iterations"], dtype=float)
                per_load = per_step.reshape(cfg.load_steps, -1).mean(axis=1)
                rows.append([
                    "x".join(str(g) for g in gen_cfg.solid_grid),
                    system.n_beam, system.n_solid, system.n_beam + system.n_solid,
                    transfer, reuse, stats["setups"],
                    f"{stats['mean_iterations']:.1f}", f"{per_load.mean():.1f}",
                    stats["converged"],
                    f"{stats['setup_seconds']:.3f}", f"{stats['solve_seconds']:.3f}",
                    f"{stats['setup_seconds'] + stats['solve_seconds']:.3f}",
                ])
    return _csv(rows, REFINEMENT_HEADER)


def _with_transfer(prec_cfg, transfer, reuse):
    amg = AmgConfig(**{**asdict(prec_cfg.amg), "transfer_kind": transfer})
    return BlockPrecConfig(
        kappa=prec_cfg.kappa, smoother_iters=prec_cfg.smoother_iters,
        spai=prec_cfg.spai, amg=amg, schur_cycles=prec_cfg.schur_cycles,
        reuse_policy="reuse_within_load_step" if reuse else "rebuild_each_solve",
    )


COMPARE_HEADER = [
    "grid", "n_total", "method", "reuse", "mean_iterations", "converged",
    "setup_seconds", "solve_seconds", "total_seconds", "speedup_vs_direct",
]


def run_solver_compare(cfg, jobs=1):
    """Direct LU vs naive one-level ILUT vs the block preconditioner."""
    rows = []
    for grid_over in cfg.grid_list:
        gen_cfg = _gen_with(cfg, **grid_over)
        system = _get_system(cfg, gen_cfg)
        grid_name = "x".join(str(g) for g in gen_cfg.solid_grid)
        n_total = system.n_beam + system.n_solid
        mono = system.monolithic()
        n_solves = cfg.load_steps * cfg.newton_steps_per_load_step

        # direct sparse LU, factored once per solve
        t0 = time.monotonic()
        lu = spla.splu(mono.tocsc())
        direct_setup = time.monotonic() - t0
        t0 = time.monotonic()
        for step in range(n_solves):
            lu.solve(_newton_rhs(system, step, cfg.gen.seed))
        direct_solve = time.monotonic() - t0
        direct_total = direct_setup * n_solves + direct_solve
        rows.append([grid_name, n_total, "direct", False, "", True,
                     f"{direct_setup * n_solves:.3f}", f"{direct_solve:.3f}",
                     f"{direct_total:.3f}", ""])

        # naive one-level ILUT
        t0 = time.monotonic()
        baseline = one_level_baseline(system, cfg.baseline_fill, cfg.baseline_drop)
        naive_setup = (time.monotonic() - t0) * n_solves
        its = []
        conv = True
        t0 = time.monotonic()
        for step in range(n_solves):
            _, rep = gmres(mono, _newton_rhs(system, step, cfg.gen.seed), cfg.gmres,
                           prec=baseline)
            its.append(rep.iterations)
            conv = conv and rep.converged
        naive_solve = time.monotonic() - t0
        naive_total = naive_setup + naive_solve
        rows.append([grid_name, n_total, "naive", False, f"{np.mean(its):.1f}", conv,
                     f"{naive_setup:.3f}", f"{naive_solve:.3f}", f"{naive_total:.3f}",
                     f"{direct_total / naive_total:.1f}" if conv else ""])

        # block preconditioner, rebuild and reuse
        for reuse in (False, True):
            prec_cfg = _with_transfer(cfg.prec, cfg.prec.amg.transfer_kind, reuse)
            stats = _run_load_steps(cfg, system, prec_cfg)
            total = stats["setup_seconds"] + stats["solve_seconds"]
            rows.append([
                grid_name, n_total, "block", reuse,
                f"{stats['mean_iterations']:.1f}", stats["converged"],
                f"{stats['setup_seconds']:.3f}", f"{stats['solve_seconds']:.3f}",
                f"{total:.3f}", f"{direct_total / total:.1f}" if total > 0 else "",
            ])
    return _csv(rows, COMPARE_HEADER)


def run_single_solve(cfg, solution_path=None):
    """One setup + solve with full diagnostics; returns (report dict, ok)."""
    system = _get_system(cfg)
    prec = prec_setup(system, cfg.prec)
    x, report = _solve_once(system, prec, cfg.gmres)
    doc = {
        "n_beam": int(system.n_beam),
        "n_solid": int(system.n_solid),
        "iterations": report.iterations,
        "converged": bool(report.converged),
        "residual_history": [float(r) for r in report.residual_history],
        "setup_seconds": round(prec.setup_seconds, 3),
        "solve_seconds": round(report.solve_seconds, 3),
        "total_seconds": round(prec.setup_seconds + report.solve_seconds, 3),
        "spai": prec.spai_result.stats(cfg.prec.spai.sigma, cfg.prec.spai.ell)
        if prec.spai_result else None,
        "amg": prec.amg_hierarchy.summary(),
    }
    if solution_path:
        from .mmio import write_vector
        write_vector(solution_path, x)
    return doc, report.converged


def _map_points(fn, cfg, points, jobs):
    if jobs <= 1 or len(points) <= 1:
        return [fn(cfg, *_as_tuple(p)) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, cfg, *_as_tuple(p)) for p in points]
        return [f.result() for f in futures]


def _as_tuple(p):
    return p if isinstance(p, tuple) else (p,)
