"""Local Morrey, Besov-Morrey and time-weighted solution norms on a periodic grid.

Ball integrals ``int_{B(x, rho)} |f|^q`` are evaluated for every centre at
once by FFT convolution with the ball indicator, then max-reduced over the
centre subset and the dyadic radius list of a :class:`MorreyGridPolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import PHYSICAL, ContractError, Field, GridSpec, _require, fft_workers, fwd, inv
from .littlewood_paley import LPBank

ONE = "one"
INFINITY = "infinity"


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceParams:
    """Indices ``(s, p, q, r)`` of ``N^s_{p,q,r}``; ``r`` is ``"one"`` or ``"infinity"``."""

    s: float
    p: float
    q: float
    r: str = INFINITY

    def __post_init__(self):
        if self.r not in (ONE, INFINITY):
            raise ParameterError(f"r must be 'one' or 'infinity', got {self.r!r}")
        _check_pq(self.p, self.q)

    def with_(self, **kw) -> "SpaceParams":
        d = dict(s=self.s, p=self.p, q=self.q, r=self.r)
        d.update(kw)
        return SpaceParams(**d)


def _check_pq(p: float, q: float) -> None:
    if not (1.0 <= q <= p < np.inf):
        raise ParameterError(f"need 1 <= q <= p < inf, got p={p}, q={q}")


@dataclass(frozen=True)
class MorreyGridPolicy:
    """Discretisation of the ``sup`` over centres and radii ``0 < rho <= 1``."""

    center_stride: int = 4
    radii: tuple = field(default=())

    def __post_init__(self):
        if self.center_stride < 1:
            raise ParameterError("center_stride must be >= 1")
        radii = tuple(float(r) for r in self.radii)
        if any(not 0 < r <= 1 for r in radii):
            raise ParameterError(f"radii must lie in (0, 1], got {radii}")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def dyadic(cls, grid: GridSpec, center_stride: int = 4) -> "MorreyGridPolicy":
        """Radii ``2^-k`` for every ``k >= 0`` with ``2^-k >= 2 dx``."""
        radii = []
        k = 0
        while 2.0 ** -k >= 2.0 * grid.spacing:
            radii.append(2.0 ** -k)
            k += 1
        return cls(center_stride, tuple(radii))


def _resolve(policy, grid: GridSpec) -> MorreyGridPolicy:
    if policy is None:
        policy = MorreyGridPolicy.dyadic(grid)
    if not policy.radii:
        raise ParameterError("Morrey policy has no radii")
    return policy


@lru_cache(maxsize=256)
def _ball_hat(grid: GridSpec, rho: float) -> np.ndarray:
    ball = (grid.distance < rho).astype(float)
    return sfft.rfftn(ball, axes=grid.axes)


def ball_integrals(density: np.ndarray, grid: GridSpec, policy: MorreyGridPolicy) -> np.ndarray:
    """``dx^N sum_{|y - x| < rho} density(y)`` at the policy centres.

    ``density`` may carry leading batch axes. Returns an array of shape
    ``(len(radii), *batch, *centres)``.
    """
    ax = grid.axes
    D = sfft.rfftn(density, axes=ax, workers=fft_workers())
    st = policy.center_stride
    sl = (Ellipsis,) + (slice(None, None, st),) * grid.dim
    out = []
    for rho in policy.radii:
        conv = sfft.irfftn(D * _ball_hat(grid, rho), s=grid.shape, axes=ax, workers=fft_workers())
        out.append(np.clip(conv[sl], 0.0, None) * grid.cell_volume)
    return np.stack(out)


def morrey_norms_batch(values: np.ndarray, grid: GridSpec, p: float, q: float,
                       policy: MorreyGridPolicy | None = None) -> np.ndarray:
    """Morrey norms of a stack of fields (leading axes are batch axes)."""
    _check_pq(p, q)
    policy = _resolve(policy, grid)
    values = np.asarray(values)
    sums = ball_integrals(np.abs(values) ** q, grid, policy)
    red = tuple(range(sums.ndim - grid.dim, sums.ndim))
    peak = sums.max(axis=red) ** (1.0 / q)
    n = grid.dim
    w = np.asarray(policy.radii) ** (n / p - n / q)
    w = w.reshape((-1,) + (1,) * (peak.ndim - 1))
    return (w * peak).max(axis=0)


def morrey_norm(f: Field, p: float, q: float, policy: MorreyGridPolicy | None = None) -> float:
    """``sup rho^(N/p - N/q) |f|_{L^q(B(x, rho))}`` over the policy centres and radii."""
    _require(f, PHYSICAL)
    return float(morrey_norms_batch(f.values, f.grid, p, q, policy))


def morrey_norm_direct(f: Field, p: float, q: float, policy: MorreyGridPolicy | None = None) -> float:
    """Same quantity as :func:`morrey_norm` by explicit summation over each ball. Slow."""
    _require(f, PHYSICAL)
    _check_pq(p, q)
    grid = f.grid
    policy = _resolve(policy, grid)
    a = np.abs(f.values) ** q
    n = grid.dim
    idx = np.arange(grid.points)
    centres = idx[:: policy.center_stride]
    best = 0.0
    for rho in policy.radii:
        mask = grid.distance < rho
        offs = np.argwhere(mask)
        offs = np.where(offs > grid.points // 2, offs - grid.points, offs)
        for c in np.array(np.meshgrid(*([centres] * n), indexing="ij")).reshape(n, -1).T:
            pts = (c[None, :] + offs) % grid.points
            s = a[tuple(pts.T)].sum() * grid.cell_volume
            best = max(best, rho ** (n / p - n / q) * s ** (1.0 / q))
    return float(best)


def morrey_measure_norm(weights: Field, p: float, policy: MorreyGridPolicy | None = None) -> float:
    """``sup rho^(N/p - N) |mu|(B(x, rho))`` for the atomic measure ``weights * dx^N``."""
    _require(weights, PHYSICAL)
    if not 1.0 <= p < np.inf:
        raise ParameterError(f"need 1 <= p < inf, got {p}")
    grid = weights.grid
    policy = _resolve(policy, grid)
    sums = ball_integrals(np.abs(weights.values), grid, policy)
    n = grid.dim
    red = tuple(range(1, sums.ndim))
    w = np.asarray(policy.radii) ** (n / p - n)
    return float(np.max(w * sums.max(axis=red)))


def _check_bank(bank: LPBank, f: Field) -> None:
    _require(f, PHYSICAL)
    if f.grid != bank.grid:
        raise ContractError("field and bank live on different grids")


def _aggregate(block_norms: np.ndarray, s: float, r: str) -> np.ndarray:
    j = np.arange(1, block_norms.shape[0])
    w = (2.0 ** (s * j)).reshape((-1,) + (1,) * (block_norms.ndim - 1))
    weighted = w * block_norms[1:]
    if r == INFINITY:
        tail = weighted.max(axis=0)
    elif r == ONE:
        tail = weighted.sum(axis=0)
    else:
        raise ParameterError(f"r must be 'one' or 'infinity', got {r!r}")
    return block_norms[0] + tail


def block_morrey_norms(bank: LPBank, f: Field, p: float, q: float,
                       policy: MorreyGridPolicy | None = None) -> np.ndarray:
    """Unweighted ``|Delta_j f|_{M^p_q}`` for ``j = 0..jmax``."""
    _check_bank(bank, f)
    return morrey_norms_batch(bank.coefficients(f), bank.grid, p, q, policy)


def besov_morrey_norm(bank: LPBank, f: Field, params: SpaceParams,
                      policy: MorreyGridPolicy | None = None) -> float:
    """Inhomogeneous Besov-Morrey norm with ``r`` in ``{one, infinity}``."""
    norms = block_morrey_norms(bank, f, params.p, params.q, policy)
    return float(_aggregate(norms, params.s, params.r))


def besov_sup_norm(bank: LPBank, f: Field, s: float, r: str = INFINITY) -> float:
    """``B^s_{inf,r}`` norm: block sup norms aggregated like :func:`besov_morrey_norm`."""
    _check_bank(bank, f)
    coeffs = bank.coefficients(f)
    red = tuple(range(1, coeffs.ndim))
    return float(_aggregate(np.abs(coeffs).max(axis=red), s, r))


def _weighted_sup(times, norms, weight_exp: float) -> float:
    t = np.asarray(times, dtype=float)
    if np.any(t <= 0):
        raise ParameterError("trace times must be positive")
    return float(np.max(t ** weight_exp * np.asarray(norms)))


def solution_norm_X(trace, s: float, theta: float, p: float, q: float,
                    policy: MorreyGridPolicy | None = None) -> float:
    """``max_t t^(-s/theta) |u(t)|_{M^p_q}`` over a list of ``(t, Field)`` pairs."""
    if not trace:
        return 0.0
    times = [t for t, _ in trace]
    if any(t <= 0 for t in times):
        raise ParameterError("trace times must be positive")
    grid = trace[0][1].grid
    stack = np.stack([u.values for _, u in trace])
    return _weighted_sup(times, morrey_norms_batch(stack, grid, p, q, policy), -s / theta)


def gradient_magnitude(grads) -> np.ndarray:
    return np.sqrt(sum(np.abs(g) ** 2 for g in grads))


def solution_norm_Y(trace, s: float, theta: float, p: float, q: float,
                    policy: MorreyGridPolicy | None = None) -> float:
    """X-type norm plus ``max_t t^((1-s)/theta) | |grad u(t)| |_{M^p_q}``.

    ``trace`` holds ``(t, Field, [grad Fields])`` triples.
    """
    if not trace:
        return 0.0
    x = solution_norm_X([(t, u) for t, u, _ in trace], s, theta, p, q, policy)
    grid = trace[0][1].grid
    mags = np.stack([gradient_magnitude([g.values for g in gs]) for _, _, gs in trace])
    gnorm = morrey_norms_batch(mags, grid, p, q, policy)
    return x + _weighted_sup([t for t, _, _ in trace], gnorm, (1.0 - s) / theta)


def embedding_ratios(bank: LPBank, fields, params: SpaceParams, gamma: float,
                     policy: MorreyGridPolicy | None = None) -> dict[str, np.ndarray]:
    """Per-field ratios whose maxima are the fitted embedding constants.

    ``sup``     B^(s - N/p)_(inf, r) over N^s_(p,q,r)
    ``lift``    N^(s - N(1-l)/p)_(p/l, q/l, r) over N^s_(p,q,r), with l = 1/gamma
    ``lower``   N^0_(p,q,inf) over M^p_q
    ``upper``   M^p_q over N^0_(p,q,1)
    """
    n = bank.grid.dim
    lam = 1.0 / gamma
    out = {"sup": [], "lift": [], "lower": [], "upper": []}
    for f in fields:
        base = block_morrey_norms(bank, f, params.p, params.q, policy)
        lifted = block_morrey_norms(bank, f, params.p / lam, params.q / lam, policy)
        m = morrey_norm(f, params.p, params.q, policy)
        coeffs = bank.coefficients(f)
        sup_blocks = np.abs(coeffs).max(axis=tuple(range(1, coeffs.ndim)))
        bm = _aggregate(base, params.s, params.r)
        out["sup"].append(_aggregate(sup_blocks, params.s - n / params.p, params.r) / bm)
        s_lift = params.s - n * (1.0 - lam) / params.p
        out["lift"].append(_aggregate(lifted, s_lift, params.r) / bm)
        out["lower"].append(_aggregate(base, 0.0, INFINITY) / m)
        out["upper"].append(m / _aggregate(base, 0.0, ONE))
    return {k: np.asarray(v, dtype=float) for k, v in out.items()}
