"""Sparse approximate inverse block preconditioning for penalty-coupled
fiber/bulk systems: CSR kernels, the SPAI pipeline, aggregation AMG,
the Block-LU preconditioner, restarted GMRES, a synthetic problem
generator, and an experiment harness.
"""

from .sparse import (BlockSystem, add_scaled, block_operator_apply, extract_graph,
                     matrix_norms, spgemm, spmv, transpose, validate_csr)
from .spai import SpaiConfig, SpaiResult, build_spai, graph_power, postfilter, prefilter, spai_minimize, spai_smooth
from .ilut import IlutFactors, ilut_factor
from .amg import (AmgConfig, AmgHierarchy, aggregate, build_hierarchy, galerkin,
                  smooth_prolongator, tentative_prolongator, vcycle)
from .blockprec import (BlockPrecConfig, BlockPreconditioner, DominanceReport,
                        dominance_report, exact_substitution, one_level_baseline, setup)
from .krylov import GmresConfig, SolveReport, SpectrumReport, gmres, lambda_extremes
from .probgen import GenConfig, GenMetadata, generate, load_system, save_system
from .harness import (ExperimentConfig, run_penalty_sweep, run_refinement_sweep,
                      run_single_solve, run_solver_compare, run_spai_study)

__version__ = "0.1.0"
