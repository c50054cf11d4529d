"""Phase-field consolidation of saturated porous media in one dimension.

Library layout:
  potential  -- double-well energy landscape, reactions, equilibria
  grid       -- staggered grids and field containers
  linalg     -- banded matrices, solves, structural diagnostics
  evolve     -- theta-scheme time stepping (compiled core + numpy fallback)
  mollifier  -- smoothing kernel and mollified gradients
  steady     -- stationary Newton solver and initial-guess strategies
  cli        -- command-line front end
"""

from .grid import (CellField, Grid1D, NodeField, build_grid, discrete_l2_norm,
                   sample_function)
from .potential import (EquilibriumPoint, ModelParams, PolynomialReaction,
                        bistability_interval, eval_polynomial_reaction,
                        f1_table, f2_table, find_coexistence_pressure,
                        find_equilibria, grad_psi, hessian_psi, psi_biot,
                        psi_total, reaction_f1, reaction_f2, truncate_reaction,
                        two_minima)
from .linalg import (BandedMatrix, is_entrywise_nonnegative,
                     is_irreducible_tridiagonal, is_strictly_diagonally_dominant,
                     solve_banded)
from .evolve import (EvolutionResult, EvolutionState, StabilityReport,
                     ThetaSchemeConfig, assemble_H, check_A3, compute_flux,
                     make_state, max_stable_tau, run_evolution, run_regularized,
                     step_density, step_strain, total_energy, update_b)
from .mollifier import (MollifierKernel, mollified_gradient, mollify,
                        standard_mollifier)
from .steady import (NewtonConfig, StationaryProblem, assemble_jacobian,
                     assemble_residual, continuation_in_k2, interface_crossings,
                     make_initial_guess, newton_solve)

__version__ = "0.1.0"


def backend_name() -> str:
    """'compiled' when the Cython core is importable, else 'python'."""
    try:
        from . import _kernels  # noqa: F401
        return "compiled"
    except ImportError:
        return "python"
