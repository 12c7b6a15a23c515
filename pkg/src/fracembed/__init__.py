"""Fractional embedding of differential operators and Lagrangian systems."""

from fracembed._core import BACKEND
from fracembed.embedding import (
    EmbeddedOperator,
    EquationSpec,
    OperatorForm,
    Term,
    apply_embedded,
    el_operator_form,
    embed_operator,
    evaluate_embedded,
    gel_operator_form,
    is_reversibility_preserving,
)
from fracembed.fields import (
    DensitySpec,
    Field,
    FieldGrid,
    felf_residual,
    mittag_leffler,
    mode_amplitude,
    solve_frac_diffusion,
    solve_frac_wave,
)
from fracembed.fracops import (
    FracParams,
    Grid,
    GridFn,
    OperatorMatrix,
    anchored_matrix,
    dab_mu_matrix,
    inner_product,
    rl_left_derivative_matrix,
    rl_left_integral,
    rl_right_derivative_matrix,
)
from fracembed.lagrangian import HigherLagrangianSpec, LagrangianSpec
from fracembed.ostro import (
    HigherBVProblem,
    fgel_residual,
    friction_reduction_check,
    solve_fgel,
    whittaker_check,
)
from fracembed.report import Check, Report
from fracembed.symbolic import diff, evaluate, parse, simplify, to_string
from fracembed.variational import (
    BVProblem,
    Solution,
    action,
    coherence_report,
    differential,
    fel_residual,
    legendre_transform,
    noether_residual,
    solve_fel,
    solve_frac_hamiltonian,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BVProblem",
    "Check",
    "DensitySpec",
    "EmbeddedOperator",
    "EquationSpec",
    "Field",
    "FieldGrid",
    "FracParams",
    "Grid",
    "GridFn",
    "HigherBVProblem",
    "HigherLagrangianSpec",
    "LagrangianSpec",
    "OperatorForm",
    "OperatorMatrix",
    "Report",
    "Solution",
    "Term",
    "action",
    "anchored_matrix",
    "apply_embedded",
    "coherence_report",
    "dab_mu_matrix",
    "diff",
    "differential",
    "el_operator_form",
    "embed_operator",
    "evaluate",
    "evaluate_embedded",
    "fel_residual",
    "felf_residual",
    "fgel_residual",
    "friction_reduction_check",
    "gel_operator_form",
    "inner_product",
    "is_reversibility_preserving",
    "legendre_transform",
    "mittag_leffler",
    "mode_amplitude",
    "noether_residual",
    "parse",
    "rl_left_derivative_matrix",
    "rl_left_integral",
    "rl_right_derivative_matrix",
    "simplify",
    "solve_fel",
    "solve_fgel",
    "solve_frac_diffusion",
    "solve_frac_hamiltonian",
    "solve_frac_wave",
    "to_string",
    "whittaker_check",
]
