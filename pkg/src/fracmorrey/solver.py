"""Picard iteration for the mild (Duhamel) form of

    u_t + (-Delta)^(theta/2) u = |u|^(gamma-1) u        (kind "power")
    u_t + (-Delta)^(theta/2) u = |grad u|^gamma         (kind "hamilton_jacobi")

on a graded time mesh. The semigroup factor of every Duhamel subinterval is
integrated exactly per Fourier mode; only the nonlinearity is frozen in time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, GridSpec, fwd, gradient_symbol, inv
from .norms import MorreyGridPolicy, ParameterError, SpaceParams, morrey_norms_batch
from .semigroup import frac_power

log = logging.getLogger(__name__)

POWER = "power"
HJ = "hamilton_jacobi"

CONVERGED = "converged"
DIVERGED = "diverged"
MAX_ITERS = "max_iters"


def hypothesis_violations(dim: int, theta: float, gamma: float, kind: str,
                          s: float, p: float, q: float) -> list[str]:
    """Index conditions of the existence theorem for ``kind`` that fail, as messages."""
    th, g, n = theta, gamma, dim
    if kind not in (POWER, HJ):
        return [f"unknown kind {kind!r}"]
    bad = []
    if not g > 1:
        return [f"gamma={g} must exceed 1"]
    if not g <= q <= p:
        bad.append(f"need gamma <= q <= p, got gamma={g}, q={q}, p={p}")
    if kind == POWER:
        if not th > 0:
            bad.append(f"theta={th} must be positive")
        if not -th / g < s < 0:
            bad.append(f"need -theta/gamma < s < 0, got s={s}")
        if not s >= n / p - th / (g - 1):
            bad.append(f"need s >= N/p - theta/(gamma-1) = {n / p - th / (g - 1):.6g}, got s={s}")
    else:
        if not 1 < g < th:
            return bad + [f"need 1 < gamma < theta, got gamma={g}, theta={th}"]
        if not p > n * (g - 1) / (th - 1):
            bad.append(f"need p > N(gamma-1)/(theta-1) = {n * (g - 1) / (th - 1):.6g}, got p={p}")
        if not 1 - th / g < s < 0:
            bad.append(f"need 1 - theta/gamma < s < 0, got s={s}")
        if not s >= n / p + (g - th) / (g - 1):
            bad.append(f"need s >= N/p + (gamma-theta)/(gamma-1) = {n / p + (g - th) / (g - 1):.6g}, got s={s}")
    return bad


@dataclass(frozen=True)
class ProblemSpec:
    theta: float
    gamma: float
    kind: str
    T: float
    space: SpaceParams

    def violations(self, dim: int) -> list[str]:
        bad = [] if 0 < self.T <= 1 else [f"T={self.T} outside (0, 1]"]
        sp = self.space
        return bad + hypothesis_violations(dim, self.theta, self.gamma, self.kind, sp.s, sp.p, sp.q)

    def validate(self, dim: int) -> None:
        bad = self.violations(dim)
        if bad:
            raise ParameterError("; ".join(bad))


@dataclass(frozen=True)
class TimeMesh:
    """Nodes ``t_k = T (k/K)^grading`` for ``k = 1..K``."""

    T: float
    K: int
    grading: float = 2.0

    def __post_init__(self):
        if self.K < 1 or not self.T > 0:
            raise ParameterError("need K >= 1 and T > 0")
        if self.grading < 1:
            raise ParameterError("grading must be >= 1")

    @property
    def nodes(self) -> np.ndarray:
        k = np.arange(1, self.K + 1)
        return self.T * (k / self.K) ** self.grading

    @property
    def steps(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.nodes]))


@dataclass(frozen=True)
class SolverControls:
    max_iters: int = 100
    tol: float = 1e-8
    policy: MorreyGridPolicy | None = None
    divergence_factor: float = 1e6
    filter_strength: float | None = None
    filter_order: int = 8
    store: str = "all"


@dataclass
class IterationTrace:
    grid: GridSpec
    times: np.ndarray
    kind: str
    iterates: list = field(default_factory=list)
    gradients: list = field(default_factory=list)
    x_norms: list = field(default_factory=list)
    diff_norms: list = field(default_factory=list)
    duhamel_norms: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    status: str = MAX_ITERS
    diagnostic: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_gradients(self) -> np.ndarray | None:
        return self.gradients[-1] if self.gradients else None

    @property
    def sweeps(self) -> int:
        return len(self.diff_norms)

    def field(self, k: int, sweep: int = -1) -> Field:
        return Field.physical(self.grid, self.iterates[sweep][k])


# -- Duhamel quadrature ----------------------------------------------------

def _phi1(lam: np.ndarray, dt: float) -> np.ndarray:
    """``int_0^dt exp(-r lam) dr = (1 - exp(-dt lam)) / lam`` with the ``lam = 0`` limit."""
    out = np.full(lam.shape, dt)
    nz = lam > 0
    out[nz] = -np.expm1(-dt * lam[nz]) / lam[nz]
    return out


def _frozen_values(F_hat: np.ndarray) -> np.ndarray:
    """Per-subinterval value of the nonlinearity: endpoint mean, right value on ``[0, t_1]``."""
    G = np.empty_like(F_hat)
    G[0] = F_hat[0]
    G[1:] = 0.5 * (F_hat[:-1] + F_hat[1:])
    return G


def duhamel_integral(history, mesh: TimeMesh, theta: float, t: float) -> Field:
    """``int_0^t S(t - tau) F(tau) dtau`` at the mesh node ``t``.

    ``history`` is a sequence of physical Fields, the nonlinearity at the
    mesh nodes up to (at least) ``t``.
    """
    nodes = mesh.nodes
    hit = np.nonzero(np.isclose(nodes, t, rtol=1e-12, atol=0.0))[0]
    if hit.size == 0:
        raise ParameterError(f"t={t} is not a mesh node")
    n = int(hit[0])
    if len(history) < n + 1:
        raise ParameterError(f"history covers {len(history)} nodes, need {n + 1}")
    grid = history[0].grid
    lam = frac_power(grid, theta)
    F_hat = fwd(np.stack([h.values for h in history[: n + 1]]), grid)
    G = _frozen_values(F_hat)
    steps = mesh.steps
    acc = np.zeros(grid.shape, dtype=complex)
    for k in range(n + 1):
        acc += np.exp(-(nodes[n] - nodes[k]) * lam) * _phi1(lam, steps[k]) * G[k]
    return Field(grid, inv(acc, grid))


def _duhamel_all_hat(F_hat: np.ndarray, mesh: TimeMesh, lam: np.ndarray) -> np.ndarray:
    """Duhamel integral at every node, in frequency space (exponential recursion)."""
    G = _frozen_values(F_hat)
    out = np.empty_like(F_hat)
    acc = np.zeros(F_hat.shape[1:], dtype=complex)
    for k, dt in enumerate(mesh.steps):
        acc = np.exp(-dt * lam) * acc + _phi1(lam, dt) * G[k]
        out[k] = acc
    return out


# -- Picard iteration ------------------------------------------------------

class _Problem:
    """Precomputed symbols and norm weights for one (spec, grid, mesh)."""

    def __init__(self, spec: ProblemSpec, grid: GridSpec, mesh: TimeMesh, controls: SolverControls):
        self.spec, self.grid, self.mesh, self.controls = spec, grid, mesh, controls
        self.policy = controls.policy or MorreyGridPolicy.dyadic(grid)
        self.lam = frac_power(grid, spec.theta)
        self.t = mesh.nodes
        s, th = spec.space.s, spec.theta
        self.w_u = self.t ** (-s / th)
        self.w_g = self.t ** ((1.0 - s) / th)
        self.grad_syms = [gradient_symbol(grid, a) for a in range(grid.dim)]
        self.filter = None
        if controls.filter_strength:
            r = grid.xi_norm / grid.xi_norm.max()
            self.filter = np.exp(-controls.filter_strength * r ** controls.filter_order)
        self.hj = spec.kind == HJ

    def gradients(self, u_hat: np.ndarray) -> np.ndarray:
        return np.stack([np.real(inv(g * u_hat, self.grid)) for g in self.grad_syms], axis=1)

    def nonlinearity(self, u: np.ndarray, grads: np.ndarray | None) -> np.ndarray:
        g = self.spec.gamma
        if self.hj:
            mag = np.sqrt(np.sum(grads ** 2, axis=1))
            return mag ** g
        return np.abs(u) ** (g - 1.0) * u

    def morrey(self, values: np.ndarray) -> np.ndarray:
        sp = self.spec.space
        return morrey_norms_batch(values, self.grid, sp.p, sp.q, self.policy)

    def norm(self, u: np.ndarray, grads: np.ndarray | None) -> float:
        """X_T norm, or Y_T norm for the Hamilton-Jacobi kind."""
        val = float(np.max(self.w_u * self.morrey(u)))
        if self.hj:
            mag = np.sqrt(np.sum(grads ** 2, axis=1))
            val += float(np.max(self.w_g * self.morrey(mag)))
        return val

    def sweep(self, u0_hat: np.ndarray, u: np.ndarray, grads: np.ndarray | None):
        F = self.nonlinearity(u, grads)
        F_hat = fwd(F, self.grid)
        if self.filter is not None:
            F_hat = F_hat * self.filter
        u_hat = u0_hat + _duhamel_all_hat(F_hat, self.mesh, self.lam)
        u_new = np.real(inv(u_hat, self.grid))
        g_new = self.gradients(u_hat) if self.hj else None
        return u_new, g_new, u_hat


def _finite(*arrays) -> bool:
    return all(a is None or bool(np.all(np.isfinite(a))) for a in arrays)


def picard_solve(spec: ProblemSpec, phi: Field, mesh: TimeMesh,
                 controls: SolverControls | None = None, start=None) -> IterationTrace:
    """Run ``u_n = S(t) phi + int_0^t S(t - tau) N(u_(n-1)) dtau`` to a fixed point.

    ``start`` optionally replaces ``u_0`` as the state fed into the first
    sweep (an array of shape ``(K, *grid.shape)``); the free term stays
    ``S(t) phi``.
    """
    controls = controls or SolverControls()
    grid = phi.grid
    spec.validate(grid.dim)
    if abs(spec.T - mesh.T) > 1e-12 * spec.T:
        raise ParameterError(f"mesh horizon {mesh.T} differs from problem horizon {spec.T}")
    if np.any(np.abs(np.imag(phi.values)) > 1e-12 * max(phi.max_abs(), 1e-300)):
        raise ParameterError("initial data must be real")
    prob = _Problem(spec, grid, mesh, controls)
    phi_hat = fwd(np.real(phi.values), grid)
    u0_hat = np.exp(-prob.t.reshape((-1,) + (1,) * grid.dim) * prob.lam) * phi_hat
    u0 = np.real(inv(u0_hat, grid))
    g0 = prob.gradients(u0_hat) if prob.hj else None

    trace = IterationTrace(grid, prob.t, spec.kind)
    keep_all = controls.store == "all"
    trace.iterates.append(u0)
    if prob.hj:
        trace.gradients.append(g0)
    x0 = prob.norm(u0, g0)
    trace.x_norms.append(x0)

    u, g = u0, g0
    if start is not None:
        u = np.asarray(start, dtype=float).reshape(u0.shape)
        g = prob.gradients(fwd(u, grid)) if prob.hj else None
    scale = max(x0, np.finfo(float).tiny)

    for n in range(1, controls.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u_new, g_new, _ = prob.sweep(u0_hat, u, g)
        if not _finite(u_new, g_new):
            trace.status = DIVERGED
            trace.diagnostic = f"non-finite values in sweep {n}"
            break
        x = prob.norm(u_new, g_new)
        d = prob.norm(u_new - u, None if g is None else g_new - g)
        trace.duhamel_norms.append(prob.norm(u_new - u0, None if g0 is None else g_new - g0))
        if trace.diff_norms:
            prev = trace.diff_norms[-1]
            trace.contraction_ratios.append(d / prev if prev > 0 else math.inf)
        trace.diff_norms.append(d)
        trace.x_norms.append(x)
        if keep_all:
            trace.iterates.append(u_new)
            if prob.hj:
                trace.gradients.append(g_new)
        else:
            trace.iterates[-1:] = [u_new]
            if prob.hj:
                trace.gradients[-1:] = [g_new]
        u, g = u_new, g_new
        if not math.isfinite(x) or x > controls.divergence_factor * scale:
            trace.status = DIVERGED
            trace.diagnostic = f"norm grew to {x:.3e} (initial {x0:.3e}) in sweep {n}"
            break
        if d < controls.tol:
            trace.status = CONVERGED
            break
    log.debug("picard %s after %d sweeps: %s", trace.status, trace.sweeps, trace.diagnostic)
    return trace


def fixed_point_residual(trace: IterationTrace, spec: ProblemSpec, phi: Field, mesh: TimeMesh,
                         controls: SolverControls | None = None) -> float:
    """Solution-space norm of ``Picard(u) - u`` for the last iterate of ``trace``."""
    controls = controls or SolverControls()
    prob = _Problem(spec, phi.grid, mesh, controls)
    grid = phi.grid
    phi_hat = fwd(np.real(phi.values), grid)
    u0_hat = np.exp(-prob.t.reshape((-1,) + (1,) * grid.dim) * prob.lam) * phi_hat
    u = trace.final
    g = trace.final_gradients
    u_new, g_new, _ = prob.sweep(u0_hat, u, g)
    return prob.norm(u_new - u, None if g is None else g_new - g)


def growth_constants(trace: IterationTrace, gamma: float) -> np.ndarray:
    """``|u_(n+1) - u_0| / |u_n|^gamma`` per sweep (the growth-bound constant)."""
    x = np.asarray(trace.x_norms[:-1])
    dn = np.asarray(trace.duhamel_norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        return dn / x ** gamma


# -- scans, schedules, monitors --------------------------------------------

@dataclass
class ThresholdScan:
    rows: list
    c_ok: float | None
    c_bad: float | None
    monotone: bool


def threshold_scan(spec: ProblemSpec, shape: Field, amplitudes, mesh: TimeMesh,
                   controls: SolverControls | None = None) -> ThresholdScan:
    """Solve from ``c * shape`` for each amplitude and bracket the existence threshold.

    ``c_ok`` is the largest converged amplitude below the first failure and
    ``c_bad`` the smallest amplitude that did not converge. ``monotone`` is
    False when a converged run follows a failed one (resolution artefact).
    """
    amps = [float(a) for a in amplitudes]
    if any(a <= 0 for a in amps) or any(b <= a for a, b in zip(amps, amps[1:])):
        raise ParameterError("amplitudes must be positive and increasing")
    controls = controls or SolverControls()
    if controls.store == "all":
        controls = SolverControls(**{**controls.__dict__, "store": "last"})
    rows = []
    for c in amps:
        tr = picard_solve(spec, shape * c, mesh, controls)
        rows.append((c, tr.status, list(tr.contraction_ratios[-3:])))
    ok = [r[1] == CONVERGED for r in rows]
    first_bad = next((i for i, v in enumerate(ok) if not v), None)
    c_bad = None if first_bad is None else rows[first_bad][0]
    below = rows if first_bad is None else rows[:first_bad]
    c_ok = below[-1][0] if below else None
    monotone = first_bad is None or not any(ok[first_bad:])
    return ThresholdScan(rows, c_ok, c_bad, monotone)


class ScheduleError(ValueError):
    pass


def _ladder_step(theta: float, gamma: float, kind: str) -> float:
    return theta / gamma if kind == POWER else (theta - gamma) / gamma


def _default_s(dim: int, theta: float, gamma: float, p: float, kind: str) -> float:
    # midpoint of the admissible window for s
    if kind == POWER:
        lo = max(-theta / gamma, dim / p - theta / (gamma - 1))
    else:
        lo = max(1 - theta / gamma, dim / p + (gamma - theta) / (gamma - 1))
    return 0.5 * lo


def bootstrap_schedule(dim: int, theta: float, gamma: float, p: float, q: float,
                       kind: str = POWER, s: float | None = None) -> list[tuple[float, float, float]]:
    """Exponent ladder ``(p_j, q_j, s_j)``, ``j = 1..n``, used to reach ``L^infinity``.

    ``n`` is the smallest integer above ``N/(a p)`` with ``a = theta/gamma``
    (``(theta - gamma)/gamma`` for Hamilton-Jacobi). ``N/p_j`` decreases in
    equal steps from ``N/p`` to the midpoint of the window
    ``(max(0, N/p - (n-1) a), a)``; ``q`` and ``s`` follow from
    ``q_(j+1) = p_(j+1) q_j / p_j`` and ``s_(j+1) = N/p_(j+1) - N/p_j``.
    ``s`` is the first row's smoothness (midpoint of its admissible range
    when omitted).
    """
    if kind not in (POWER, HJ):
        raise ScheduleError(f"unknown kind {kind!r}")
    a = _ladder_step(theta, gamma, kind)
    if not a > 0:
        raise ScheduleError(f"ladder step {a} is not positive")
    s1 = _default_s(dim, theta, gamma, p, kind) if s is None else s
    x1 = dim / p
    n = int(math.floor(x1 / a)) + 1
    rows = [(p, q, s1)]
    if n > 1:
        target = 0.5 * (max(0.0, x1 - (n - 1) * a) + a)
        step = (x1 - target) / (n - 1)
        # q_j / p_j is invariant; reuse it so q = p stays exact.
        ratio = q / p
        x_prev = x1
        for _ in range(n - 1):
            x = x_prev - step
            p_new = dim / x
            rows.append((p_new, p_new * ratio, x - x_prev))
            x_prev = x
    problems = check_schedule(dim, theta, gamma, rows, kind)
    if problems:
        raise ScheduleError("; ".join(problems))
    return rows


def check_schedule(dim: int, theta: float, gamma: float, rows, kind: str = POWER) -> list[str]:
    """Every ladder inequality and per-row hypothesis that fails, as messages."""
    a = _ladder_step(theta, gamma, kind)
    problems = []
    for j, (pj, qj, sj) in enumerate(rows):
        problems += [f"row {j + 1}: {m}" for m in hypothesis_violations(dim, theta, gamma, kind, sj, pj, qj)]
    xs = [dim / r[0] for r in rows]
    for j in range(len(rows) - 1):
        if not xs[j + 1] > xs[j] - a:
            problems.append(f"row {j + 2}: N/p drops by {xs[j] - xs[j + 1]:.6g} >= {a:.6g}")
        if not xs[j + 1] < xs[j]:
            problems.append(f"row {j + 2}: N/p does not decrease")
        if not math.isclose(rows[j + 1][1], rows[j + 1][0] * rows[j][1] / rows[j][0], rel_tol=1e-12):
            problems.append(f"row {j + 2}: q not carried by p_(j+1) q_j / p_j")
        if not math.isclose(rows[j + 1][2], xs[j + 1] - xs[j], rel_tol=1e-12, abs_tol=1e-15):
            problems.append(f"row {j + 2}: s not equal to N/p_(j+1) - N/p_j")
    if not xs[-1] < a:
        problems.append(f"final N/p_n={xs[-1]:.6g} not below {a:.6g}")
    return problems


def linf_monitor(trace: IterationTrace, eps: float):
    """``(t, max|u|, max|grad u|)`` of the final iterate at every node ``t >= eps``."""
    u = trace.final
    g = trace.final_gradients
    red = tuple(range(1, u.ndim))
    umax = np.max(np.abs(u), axis=red)
    gmax = None
    if g is not None:
        gmag = np.sqrt(np.sum(g ** 2, axis=1))
        gmax = np.max(gmag, axis=red)
    out = []
    for k, t in enumerate(trace.times):
        if t >= eps:
            out.append((float(t), float(umax[k]), None if gmax is None else float(gmax[k])))
    return out


def weighted_profile(trace: IterationTrace, spec: ProblemSpec,
                     policy: MorreyGridPolicy | None = None, gradient: bool = False):
    """Per-node ``(t, morrey, weighted)`` of the final iterate (or of ``|grad u|``)."""
    grid = trace.grid
    policy = policy or MorreyGridPolicy.dyadic(grid)
    s, th = spec.space.s, spec.theta
    if gradient:
        vals = np.sqrt(np.sum(trace.final_gradients ** 2, axis=1))
        w = trace.times ** ((1.0 - s) / th)
    else:
        vals = trace.final
        w = trace.times ** (-s / th)
    m = morrey_norms_batch(vals, grid, spec.space.p, spec.space.q, policy)
    return trace.times, m, w * m
