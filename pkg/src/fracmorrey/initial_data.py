"""Benchmark initial data and their admissibility for the existence theorems."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft

from .grid import Field, GridSpec, spectral_gradient
from .littlewood_paley import LPBank, build_bank, tail_smallness
from .norms import INFINITY, MorreyGridPolicy, besov_morrey_norm
from .semigroup import heat

KINDS = ("power_law", "log_power", "dirac", "dirac_derivative", "random_shell", "constant")


class SingularDataWarning(UserWarning):
    """The continuum profile is not locally ``L^q`` integrable."""


@dataclass(frozen=True)
class DataRecipe:
    """Initial-data description.

    ``beta`` is the power-law exponent, ``order`` the derivative order of a
    Dirac derivative, ``s`` and ``seed`` drive ``random_shell``, ``theta`` the
    log-corrected profile. ``smoothing > 0`` applies the ``theta = 2`` heat
    flow for that time after construction (mollified data).
    """

    kind: str
    amplitude: float = 1.0
    beta: float | None = None
    order: int = 1
    s: float = 0.0
    seed: int = 0
    theta: float | None = None
    smoothing: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.kind == "power_law" and not (self.beta is not None and self.beta > 0):
            raise ValueError("power_law needs beta > 0")
        if self.kind == "log_power" and not (self.theta is not None and self.theta > 0):
            raise ValueError("log_power needs theta > 0")
        if self.kind == "dirac_derivative" and (int(self.order) != self.order or self.order < 1):
            raise ValueError("dirac_derivative needs an integer order >= 1")
        if self.smoothing < 0:
            raise ValueError("smoothing must be non-negative")

    def scaled(self, c: float) -> "DataRecipe":
        d = asdict(self)
        d["amplitude"] = c
        return DataRecipe(**d)


def _capped_distance(grid: GridSpec) -> np.ndarray:
    return np.maximum(grid.distance, grid.spacing)


def shell_index(grid: GridSpec) -> np.ndarray:
    """Hard dyadic shell of each lattice mode: 0 for ``|xi| < 2``, else ``floor(log2 |xi|)``."""
    r = grid.xi_norm
    j = np.zeros(r.shape, dtype=int)
    big = r >= 2.0
    j[big] = np.floor(np.log2(r[big])).astype(int)
    return j


def random_shell(grid: GridSpec, s: float, seed: int, amplitude: float = 1.0) -> np.ndarray:
    """Real Gaussian field whose shell ``j`` has RMS amplitude ``amplitude * 2^(-s j)``."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape)
    W = sfft.fftn(noise, norm="ortho")
    j = shell_index(grid)
    counts = np.bincount(j.ravel())
    n_total = grid.points ** grid.dim
    amp = amplitude * 2.0 ** (-s * j) * np.sqrt(n_total / counts[j])
    return np.real(sfft.ifftn(amp * W, norm="ortho"))


def realize(recipe: DataRecipe, grid: GridSpec, q: float | None = None) -> Field:
    """Sample ``recipe`` on ``grid``. Singular profiles are capped at one cell."""
    c = recipe.amplitude
    n = grid.dim
    k = recipe.kind
    if k == "constant":
        v = np.full(grid.shape, float(c))
    elif k == "power_law":
        if q is not None and recipe.beta >= n / q:
            warnings.warn(f"|x|^-{recipe.beta} is not locally L^{q} in dimension {n}",
                          SingularDataWarning, stacklevel=2)
        v = c * _capped_distance(grid) ** (-recipe.beta)
    elif k == "log_power":
        d = _capped_distance(grid)
        v = c * d ** (-n) * np.abs(np.log(np.e + 1.0 / d)) ** (-n / recipe.theta - 1.0)
    elif k in ("dirac", "dirac_derivative"):
        v = np.zeros(grid.shape)
        v[(0,) * n] = c / grid.cell_volume
        if k == "dirac_derivative":
            f = Field.physical(grid, v)
            for _ in range(int(recipe.order)):
                f = spectral_gradient(f, 0)
            v = np.real(f.values)
    else:
        v = random_shell(grid, recipe.s, recipe.seed, c)
    f = Field.physical(grid, v.astype(float))
    if recipe.smoothing > 0:
        f = Field.physical(grid, heat(f, 2.0, recipe.smoothing).real)
    return f


@dataclass
class AdmissibilityReport:
    tail: float
    full_norm: float
    index_check: bool
    violations: list
    refinement_trend: tuple | None = None


def admissibility_report(f: Field, bank: LPBank, spec, jwin: int = 3,
                         policy: MorreyGridPolicy | None = None,
                         recipe: DataRecipe | None = None) -> AdmissibilityReport:
    """Tail smallness, full ``N^s_{p,q,inf}`` norm and index check for ``f``.

    When ``recipe`` is given the tail is also evaluated on the doubled grid
    and reported as ``(tail at M, tail at 2M)``.
    """
    params = spec.space.with_(r=INFINITY)
    tail = tail_smallness(bank, f, params, jwin, policy)
    full = besov_morrey_norm(bank, f, params, policy)
    violations = spec.violations(f.grid.dim)
    trend = None
    if recipe is not None:
        fine = f.grid.refined(2)
        stride = policy.center_stride if policy is not None else 4
        fine_tail = tail_smallness(build_bank(fine), realize(recipe, fine), params, jwin,
                                   MorreyGridPolicy.dyadic(fine, stride))
        trend = (tail, fine_tail)
    return AdmissibilityReport(tail, full, not violations, violations, trend)
