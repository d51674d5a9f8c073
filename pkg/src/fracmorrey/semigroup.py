"""Fractional heat semigroup ``exp(-t |xi|^theta)``, its gradient variant and kernel diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import PHYSICAL, ContractError, Field, GridSpec, _require, fwd, gradient_symbol, inv
from .littlewood_paley import LPBank, block_symbol, low_symbol
from .norms import ONE, MorreyGridPolicy, ParameterError, SpaceParams, besov_morrey_norm

HEAT = "heat"
GRAD_HEAT = "grad_heat"
CUSTOM = "custom"


@lru_cache(maxsize=64)
def frac_power(grid: GridSpec, theta: float) -> np.ndarray:
    """``|xi|^theta`` on the lattice with the value at ``xi = 0`` set to 0."""
    r = grid.xi_norm
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** theta
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SymbolSpec:
    """Fourier multiplier description.

    ``heat``: ``exp(-t |xi|^theta)``; ``grad_heat``: ``i xi_axis exp(-t |xi|^theta)``;
    ``custom``: ``func(xi)`` where ``xi`` has shape ``(dim, *grid.shape)``.
    """

    kind: str
    theta: float = 2.0
    t: float = 0.0
    axis: int = 0
    func: Callable | None = None

    @classmethod
    def heat(cls, theta: float, t: float) -> "SymbolSpec":
        return cls(HEAT, theta, t)

    @classmethod
    def grad_heat(cls, theta: float, t: float, axis: int = 0) -> "SymbolSpec":
        return cls(GRAD_HEAT, theta, t, axis)

    @classmethod
    def custom(cls, func: Callable) -> "SymbolSpec":
        return cls(CUSTOM, func=func)

    def __post_init__(self):
        if self.kind not in (HEAT, GRAD_HEAT, CUSTOM):
            raise ParameterError(f"unknown symbol kind {self.kind!r}")
        if self.kind == CUSTOM:
            if self.func is None:
                raise ParameterError("custom symbol needs a callable")
            return
        if not self.theta > 0:
            raise ParameterError(f"theta must be positive, got {self.theta}")
        if self.t < 0:
            raise ParameterError(f"t must be non-negative, got {self.t}")

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        if self.kind == CUSTOM:
            return np.asarray(self.func(np.stack(grid.xi)), dtype=complex)
        heat = np.exp(-self.t * frac_power(grid, self.theta))
        if self.kind == HEAT:
            return heat
        return gradient_symbol(grid, self.axis) * heat


def apply_multiplier(f: Field, sym: SymbolSpec) -> Field:
    """``F^-1 (P(xi) F f)``."""
    _require(f, PHYSICAL)
    P = sym.evaluate(f.grid)
    return Field(f.grid, inv(P * fwd(f.values, f.grid), f.grid))


def heat(f: Field, theta: float, t: float) -> Field:
    return apply_multiplier(f, SymbolSpec.heat(theta, t))


def semigroup_law_residual(f: Field, theta: float, t1: float, t2: float) -> float:
    """``max|S(t1) S(t2) f - S(t1 + t2) f| / max|f|``."""
    if t1 < 0 or t2 < 0:
        raise ParameterError("times must be non-negative")
    a = heat(heat(f, theta, t2), theta, t1).values
    b = heat(f, theta, t1 + t2).values
    scale = np.max(np.abs(f.values))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / scale)


def smoothing_decay_fit(bank: LPBank, f: Field, theta: float, source: SpaceParams,
                        sigma: float, times, policy: MorreyGridPolicy | None = None):
    """Least-squares slope of ``log |S(t) f|_{N^sigma_{p,q,1}}`` against ``log t``.

    Returns ``(slope, residual, norms)``; ``residual`` is the RMS deviation of
    the log-norms from the fitted line. For data with a full dyadic tail the
    slope approaches ``(s - sigma) / theta``.
    """
    times = np.asarray(sorted(times), dtype=float)
    if sigma < source.s:
        raise ParameterError("target smoothness sigma must be >= source s")
    if times.size < 5 or np.any(times <= 0) or np.any(times >= 1):
        raise ParameterError("need at least 5 times inside (0, 1)")
    if times[-1] / times[0] < 100 * (1 - 1e-9):
        raise ParameterError("times must span at least two decades")
    target = source.with_(s=sigma, r=ONE)
    F = fwd(f.values, f.grid)
    lam = frac_power(f.grid, theta)
    norms = np.array([
        besov_morrey_norm(bank, Field(f.grid, inv(np.exp(-t * lam) * F, f.grid)), target, policy)
        for t in times
    ])
    if np.all(norms < 1e-14):
        raise ParameterError("all norms vanish; data too smooth for a decay fit")
    x, y = np.log(times), np.log(norms)
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return float(slope), resid, norms


def _quadrature_grid(bank_grid: GridSpec, j: int, max_points: int) -> GridSpec:
    # Nyquist at least twice the outer edge of Phi_j = phi_(j-1)+phi_j+phi_(j+1).
    need = 2.0 * (5.0 / 3.0) * 2.0 ** (j + 1)
    m = bank_grid.points
    while np.pi * m / bank_grid.box_length < need and (2 * m) ** bank_grid.dim <= max_points:
        m *= 2
    return GridSpec(bank_grid.dim, bank_grid.box_length, m)


def kernel_l1(grid: GridSpec, symbol: np.ndarray) -> float:
    """Riemann sum of ``|F^-1 symbol|`` over one period."""
    return float(np.sum(np.abs(inv(symbol, grid))) * grid.cell_volume)


def dyadic_kernel_bound(bank: LPBank, sym: SymbolSpec, m: float, jrange,
                        max_points: int = 2 ** 22, rel_tol: float = 0.01,
                        max_doublings: int = 4):
    """``(j, |F^-1(Phi_j P)|_{L^1} / 2^(m j))`` for every ``j`` in ``jrange``.

    Each kernel is evaluated on a lattice fine enough to contain the whole
    support of ``Phi_j``; the box length is doubled until the L^1 value moves
    by less than ``rel_tol``.
    """
    out = []
    for j in jrange:
        if not 1 <= j <= bank.jmax:
            raise IndexError(f"block {j} outside bank range [1, {bank.jmax}]")
        g = _quadrature_grid(bank.grid, j, max_points)
        prev = None
        for _ in range(max_doublings + 1):
            r = g.xi_norm
            triple = block_symbol(r, j - 1) + block_symbol(r, j) + block_symbol(r, j + 1)
            val = kernel_l1(g, triple * sym.evaluate(g))
            if prev is not None and abs(val - prev) <= rel_tol * abs(prev):
                break
            prev = val
            if (2 * g.points) ** g.dim > max_points:
                break
            g = GridSpec(g.dim, 2 * g.box_length, 2 * g.points)
        out.append((j, val / 2.0 ** (m * j)))
    return out


def low_kernel_bound(bank: LPBank, sym: SymbolSpec) -> float:
    """``|F^-1(Phi_(0) P)|_{L^1}`` with ``Phi_(0) = phi_(0) + phi_1``."""
    g = _quadrature_grid(bank.grid, 1, 2 ** 22)
    r = g.xi_norm
    return kernel_l1(g, (low_symbol(r) + block_symbol(r, 1)) * sym.evaluate(g))


def frequency_split(bank: LPBank, f: Field, m: int) -> tuple[Field, Field]:
    """``low = F^-1 phi_(0)(2^-m xi) F f`` and ``high = f - low``."""
    _require(f, PHYSICAL)
    if f.grid != bank.grid:
        raise ContractError("field and bank live on different grids")
    if not 1 <= m <= bank.jmax:
        raise ParameterError(f"m={m} outside [1, {bank.jmax}]")
    low = inv(low_symbol(f.grid.xi_norm, m) * fwd(f.values, f.grid), f.grid)
    return Field(f.grid, low), Field(f.grid, f.values - low)


def split_smallness(bank: LPBank, f: Field, theta: float, params: SpaceParams, sigma: float,
                    m: int, times, policy: MorreyGridPolicy | None = None) -> tuple[float, float]:
    """``sup_t t^((sigma - s)/theta) |S(t) part|_{N^sigma_{p,q,1}}`` for the high and low parts."""
    low, high = frequency_split(bank, f, m)
    target = params.with_(s=sigma, r=ONE)
    e = (sigma - params.s) / theta
    res = []
    for part in (high, low):
        res.append(max(t ** e * besov_morrey_norm(bank, heat(part, theta, t), target, policy)
                       for t in times))
    return res[0], res[1]
