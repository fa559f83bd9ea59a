"""Segregated Nash equilibria of two-population stationary mean field games in 1D."""

from __future__ import annotations

from .asymptotics import (
    count_critical_points,
    interface_report,
    joint_energy,
    limit_profile,
    scaling_law_report,
    segregation_metric,
)
from .continuation import (
    Branch,
    StepPolicy,
    bifurcation_points,
    expansion_coefficients,
    lyapunov_schmidt,
    trace_branch,
)
from .grid1d import Grid, NeumannLaplacian
from .hopfcole import mfg_residuals, to_mfg
from .interactions import InteractionPair, InteractionSpec, Linear, RationalPerturbed, linear_pair
from .nash import BestResponseConfig, SolutionState, identity_residuals, solve_nash
from .variational import VariationalProblem, gamma_limit_reference, minimize

__version__ = "0.1.0"
