"""Spectral toolkit for fractional semilinear heat and viscous Hamilton-Jacobi
equations in local Morrey and inhomogeneous Besov-Morrey spaces."""

from .grid import (
    ContractError,
    Field,
    GridSpec,
    forward_transform,
    inverse_transform,
    read_fbmf,
    resample,
    spectral_gradient,
    write_fbmf,
)
from .littlewood_paley import LPBank, build_bank, project, tail_smallness
from .norms import (
    MorreyGridPolicy,
    SpaceParams,
    besov_morrey_norm,
    besov_sup_norm,
    morrey_measure_norm,
    morrey_norm,
    solution_norm_X,
    solution_norm_Y,
)
from .semigroup import (
    SymbolSpec,
    apply_multiplier,
    dyadic_kernel_bound,
    frequency_split,
    semigroup_law_residual,
    smoothing_decay_fit,
)
from .initial_data import DataRecipe, admissibility_report, realize
from .solver import (
    IterationTrace,
    ProblemSpec,
    SolverControls,
    TimeMesh,
    bootstrap_schedule,
    duhamel_integral,
    linf_monitor,
    picard_solve,
    threshold_scan,
)

__version__ = "0.1.0"
