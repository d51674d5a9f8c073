"""Smooth dyadic partition of unity on the frequency lattice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import PHYSICAL, ContractError, Field, GridSpec, _require, fwd, inv

ZETA_PROFILE = "exp-smoothstep[3/2,5/3]"

_Z_FLAT = 1.5
_Z_CUT = 5.0 / 3.0


def zeta(t) -> np.ndarray:
    """Cutoff equal to 1 on ``[0, 3/2]``, 0 on ``[5/3, inf)``, C-infinity in between."""
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t)
    out = np.where(flat <= _Z_FLAT, 1.0, 0.0)
    b = (flat - _Z_FLAT) / (_Z_CUT - _Z_FLAT)
    mid = (b > 0.0) & (b < 1.0)
    if np.any(mid):
        bm = b[mid]
        g0 = np.exp(-1.0 / bm)
        g1 = np.exp(-1.0 / (1.0 - bm))
        out[mid] = g1 / (g0 + g1)
    return out.reshape(t.shape)


def block_symbol(xi_norm: np.ndarray, j: int) -> np.ndarray:
    """``phi_j(xi) = zeta(2^-j |xi|) - zeta(2^(1-j) |xi|)`` for any integer ``j``."""
    return zeta(xi_norm * 2.0 ** (-j)) - zeta(xi_norm * 2.0 ** (1 - j))


def low_symbol(xi_norm: np.ndarray, scale: int = 0) -> np.ndarray:
    """``phi_(0)(2^-scale xi) = zeta(2^-scale |xi|)``."""
    return zeta(xi_norm * 2.0 ** (-scale))


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LPBank:
    """Littlewood-Paley multipliers ``[phi_(0), phi_1, ..., phi_jmax]`` sampled on a lattice."""

    grid: GridSpec
    jmax: int
    blocks: tuple
    zeta_profile: str = ZETA_PROFILE

    def block(self, j: int) -> np.ndarray:
        self._check_index(j)
        return self.blocks[j]

    def triple_block(self, j: int) -> np.ndarray:
        """``Phi_j = phi_(j-1) + phi_j + phi_(j+1)``, equal to 1 on the support of ``phi_j``."""
        if j < 1:
            raise IndexError("triple block is defined for j >= 1")
        r = self.grid.xi_norm
        return block_symbol(r, j - 1) + block_symbol(r, j) + block_symbol(r, j + 1)

    def low_pair(self) -> np.ndarray:
        """``Phi_(0) = phi_(0) + phi_1``."""
        return self.blocks[0] + self.blocks[1]

    def _check_index(self, j: int) -> None:
        if not 0 <= j <= self.jmax:
            raise IndexError(f"block index {j} outside [0, {self.jmax}]")

    def partition_residual(self) -> np.ndarray:
        """Pointwise ``|sum of blocks - 1|`` over the lattice."""
        return np.abs(np.sum(self.blocks, axis=0) - 1.0)

    def coefficients(self, f: Field) -> np.ndarray:
        """Stack of physical block projections, shape ``(jmax + 1, *grid.shape)``."""
        _require(f, PHYSICAL)
        if f.grid != self.grid:
            raise ContractError("field and bank live on different grids")
        F = fwd(f.values, self.grid)
        return inv(np.stack(self.blocks) * F, self.grid)


def build_bank(grid: GridSpec) -> LPBank:
    """Sample the dyadic blocks up to the first scale that covers the whole lattice.

    ``jmax`` is the smallest ``j`` with ``max |xi| <= (3/2) 2^j``; block ``jmax``
    is then non-empty and the blocks sum to one at every lattice point.
    """
    r = grid.xi_norm
    rmax = float(r.max())
    if rmax < 4.0 / 3.0:
        raise ConfigurationError(
            f"lattice too coarse: max |xi| = {rmax:.4g} < 4/3, no room for block 1"
        )
    jmax = max(1, int(np.ceil(np.log2(rmax / _Z_FLAT))))
    while rmax > _Z_FLAT * 2.0 ** jmax:
        jmax += 1
    blocks = [low_symbol(r)] + [block_symbol(r, j) for j in range(1, jmax + 1)]
    return LPBank(grid, jmax, tuple(blocks))


def project(bank: LPBank, f: Field, j: int) -> Field:
    """``F^-1 (phi_j F f)``; ``j = 0`` selects the low-frequency block."""
    _require(f, PHYSICAL)
    bank._check_index(j)
    if f.grid != bank.grid:
        raise ContractError("field and bank live on different grids")
    return Field(f.grid, inv(bank.blocks[j] * fwd(f.values, f.grid), f.grid))


def tail_smallness(bank: LPBank, f: Field, params, jwin: int = 3, policy=None) -> float:
    """Largest weighted block norm ``2^(s j) |Delta_j f|_{M^p_q}`` over the top ``jwin`` blocks.

    Stand-in for the ``limsup`` over ``j`` at finite resolution.
    """
    from .norms import morrey_norms_batch

    if jwin < 1:
        raise ValueError("jwin must be >= 1")
    if jwin > bank.jmax:
        raise ValueError(f"jwin={jwin} exceeds jmax={bank.jmax}")
    _require(f, PHYSICAL)
    if f.grid != bank.grid:
        raise ContractError("field and bank live on different grids")
    js = np.arange(bank.jmax - jwin + 1, bank.jmax + 1)
    F = fwd(f.values, f.grid)
    parts = inv(np.stack([bank.blocks[j] for j in js]) * F, f.grid)
    norms = morrey_norms_batch(parts, bank.grid, params.p, params.q, policy)
    return float(np.max(2.0 ** (params.s * js) * norms))
