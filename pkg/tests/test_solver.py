import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.integrate import quad

from fracmorrey.grid import Field, GridSpec
from fracmorrey.initial_data import DataRecipe, realize
from fracmorrey.norms import ParameterError, SpaceParams
from fracmorrey.solver import (
    CONVERGED,
    DIVERGED,
    HJ,
    POWER,
    ProblemSpec,
    ScheduleError,
    SolverControls,
    TimeMesh,
    bootstrap_schedule,
    check_schedule,
    duhamel_integral,
    fixed_point_residual,
    hypothesis_violations,
    growth_constants,
    linf_monitor,
    picard_solve,
    threshold_scan,
    weighted_profile,
)

DIRAC_SPEC = ProblemSpec(2.0, 1.5, POWER, 0.5, SpaceParams(-1 / 3, 1.5, 1.5))
CONST_SPEC = ProblemSpec(2.0, 2.0, POWER, 1.0, SpaceParams(-0.25, 2, 2))
HJ_SPEC = ProblemSpec(2.0, 1.3, HJ, 0.5, SpaceParams(-1 + 1 / 1.3, 1.3, 1.3))


@pytest.fixture(scope="module")
def dirac_run():
    g = GridSpec(1, 8.0, 256)
    mesh = TimeMesh(0.5, 64)
    phi = realize(DataRecipe("dirac", 0.05), g)
    return phi, mesh, picard_solve(DIRAC_SPEC, phi, mesh, SolverControls(tol=1e-10))


# -- problem and mesh ------------------------------------------------------

def test_problem_spec_hypotheses():
    assert DIRAC_SPEC.violations(1) == []
    assert HJ_SPEC.violations(1) == []
    assert ProblemSpec(2.0, 1.5, POWER, 2.0, DIRAC_SPEC.space).violations(1)  # T > 1
    assert hypothesis_violations(1, 2.0, 1.5, POWER, 0.1, 1.5, 1.5)  # s >= 0
    assert hypothesis_violations(1, 2.0, 1.5, POWER, -1 / 3, 2.0, 1.0)  # q < gamma
    assert hypothesis_violations(1, 2.0, 2.5, HJ, -0.1, 3.0, 3.0)  # gamma >= theta
    assert hypothesis_violations(3, 2.0, 1.5, HJ, -0.1, 1.5, 1.5)  # s below N/p + (gamma-theta)/(gamma-1)
    assert hypothesis_violations(1, 2.0, 1.5, "other", -0.1, 1.5, 1.5)
    with pytest.raises(ParameterError):
        ProblemSpec(2.0, 1.5, POWER, 0.5, SpaceParams(-2.0, 1.5, 1.5)).validate(1)


def test_time_mesh():
    m = TimeMesh(0.5, 10, 2.0)
    assert m.nodes[-1] == 0.5 and m.nodes[0] == pytest.approx(0.5 / 100)
    assert np.all(np.diff(m.nodes) > 0) and m.nodes[0] > 0
    assert m.steps.sum() == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        TimeMesh(0.5, 0)
    with pytest.raises(ParameterError):
        TimeMesh(0.5, 10, 0.5)


# -- Duhamel quadrature ----------------------------------------------------

def test_duhamel_of_zero_and_constant():
    g = GridSpec(1, 4.0, 32)
    mesh = TimeMesh(1.0, 16)
    zero = [Field.physical(g, np.zeros(32))] * 16
    assert np.all(duhamel_integral(zero, mesh, 1.5, mesh.nodes[7]).values == 0)
    c = [Field.physical(g, np.full(32, 0.7))] * 16
    for theta in (0.5, 2.0):
        for k in (0, 9, 15):
            v = duhamel_integral(c, mesh, theta, mesh.nodes[k]).values
            assert np.allclose(v, 0.7 * mesh.nodes[k], atol=1e-14)


def test_duhamel_errors():
    g = GridSpec(1, 4.0, 32)
    mesh = TimeMesh(1.0, 16)
    h = [Field.physical(g, np.zeros(32))] * 4
    with pytest.raises(ParameterError):
        duhamel_integral(h, mesh, 2.0, 0.123)
    with pytest.raises(ParameterError):
        duhamel_integral(h, mesh, 2.0, mesh.nodes[10])


def _plane_wave_error(K):
    g = GridSpec(1, 2 * np.pi, 16)
    mesh = TimeMesh(1.0, K, 2.0)
    wave = np.cos(g.offsets)
    hist = [Field.physical(g, np.cos(3 * t) * wave) for t in mesh.nodes]
    got = duhamel_integral(hist, mesh, 2.0, 1.0).values.real
    exact = quad(lambda tau: np.exp(-(1 - tau)) * np.cos(3 * tau), 0, 1, epsabs=1e-15, epsrel=1e-13)[0]
    return np.max(np.abs(got - exact * wave))


def test_duhamel_plane_wave_oracle():
    e128, e256, e1024 = _plane_wave_error(128), _plane_wave_error(256), _plane_wave_error(1024)
    assert e128 < 1e-4
    assert e1024 < 1e-6
    assert e128 / e256 == pytest.approx(4.0, rel=0.05)


def test_recursion_matches_direct_sum(dirac_run):
    phi, mesh, tr = dirac_run
    g = phi.grid
    u = tr.iterates[-2]
    F = [Field.physical(g, np.abs(u[k]) ** 0.5 * u[k]) for k in range(len(mesh.nodes))]
    from fracmorrey.grid import fwd, inv
    from fracmorrey.semigroup import frac_power

    lam = frac_power(g, 2.0)
    u0 = np.real(inv(np.exp(-mesh.nodes[:, None] * lam) * fwd(phi.values, g), g))
    for k in (0, 20, len(mesh.nodes) - 1):
        direct = u0[k] + duhamel_integral(F, mesh, 2.0, mesh.nodes[k]).values.real
        assert np.max(np.abs(direct - tr.iterates[-1][k])) < 1e-12 * np.max(np.abs(direct))


# -- Picard iteration -------------------------------------------------------

def test_zero_data_converges_in_one_sweep():
    g = GridSpec(1, 8.0, 64)
    tr = picard_solve(DIRAC_SPEC, Field.physical(g, np.zeros(64)), TimeMesh(0.5, 8))
    assert tr.status == CONVERGED and tr.sweeps == 1
    assert np.all(tr.final == 0)
    assert all(row[1] == 0 for row in linf_monitor(tr, 0.0))


def test_constant_data_follows_ode():
    g = GridSpec(1, 8.0, 32)
    mesh = TimeMesh(1.0, 256)
    tr = picard_solve(CONST_SPEC, realize(DataRecipe("constant", 0.1), g), mesh, SolverControls(max_iters=200))
    assert tr.status == CONVERGED
    assert tr.final[-1, 0] == pytest.approx(1 / 9, abs=1e-4)
    for t, umax, gmax in linf_monitor(tr, 0.0):
        assert umax == pytest.approx(0.1 / (1 - 0.1 * t), rel=1e-4)
        assert gmax is None


def test_constant_data_hj_stays_constant():
    g = GridSpec(1, 8.0, 64)
    tr = picard_solve(HJ_SPEC, realize(DataRecipe("constant", 0.3), g), TimeMesh(0.5, 32))
    assert tr.status == CONVERGED
    assert np.allclose(tr.final, 0.3, atol=1e-14)
    assert np.all(tr.final_gradients == 0)


def test_dirac_run_contracts(dirac_run):
    phi, mesh, tr = dirac_run
    assert tr.status == CONVERGED
    assert len(tr.contraction_ratios) == len(tr.diff_norms) - 1
    assert max(tr.contraction_ratios) <= 0.5
    assert fixed_point_residual(tr, DIRAC_SPEC, phi, mesh) < 10 * 1e-10


def test_growth_bound_constant_is_stable(dirac_run):
    _, _, tr = dirac_run
    c = growth_constants(tr, DIRAC_SPEC.gamma)
    assert np.all(c[1:] <= c[0] * 1.1)
    x0 = tr.x_norms[0]
    for n in range(1, len(tr.x_norms)):
        assert tr.x_norms[n] <= x0 + c[0] * 1.1 * tr.x_norms[n - 1] ** DIRAC_SPEC.gamma


def test_linf_monitor_on_dirac_run(dirac_run):
    _, mesh, tr = dirac_run
    rows = linf_monitor(tr, 1e-3)
    assert rows[0][0] >= 1e-3 and rows[-1][0] == mesh.nodes[-1]
    m = np.array([r[1] for r in rows])
    assert np.all(np.isfinite(m))
    assert np.all(np.diff(m[len(m) // 2:]) < 0)


def test_uniqueness_surrogate(dirac_run):
    phi, mesh, tr = dirac_run
    rng = np.random.default_rng(0)
    bump = 1e-3 * np.exp(-phi.grid.distance ** 2) * rng.uniform(0.5, 1.5)
    start = tr.iterates[0] + bump[None, :]
    tr2 = picard_solve(DIRAC_SPEC, phi, mesh, SolverControls(tol=1e-10), start=start)
    assert tr2.status == CONVERGED
    t, m, w = weighted_profile(tr, DIRAC_SPEC)
    from fracmorrey.norms import morrey_norms_batch

    diff = morrey_norms_batch(tr.final - tr2.final, phi.grid, 1.5, 1.5)
    assert np.max(t ** (1 / 6) * diff) < 10 * 1e-10


def test_even_data_gives_even_iterates():
    g = GridSpec(1, 8.0, 128)
    phi = Field.physical(g, 0.05 * np.exp(-4 * g.distance ** 2) / 0.886)
    tr = picard_solve(DIRAC_SPEC, phi, TimeMesh(0.5, 32))
    for u in tr.iterates:
        assert np.max(np.abs(u - np.roll(u[:, ::-1], 1, axis=1))) < 1e-10


def test_hj_run_converges():
    g = GridSpec(1, 8.0, 256)
    phi = realize(DataRecipe("dirac", 0.05, smoothing=1e-3), g)
    mesh = TimeMesh(0.5, 64)
    tr = picard_solve(HJ_SPEC, phi, mesh, SolverControls(tol=1e-9))
    assert tr.status == CONVERGED
    assert max(tr.contraction_ratios[1:]) <= 0.5
    assert fixed_point_residual(tr, HJ_SPEC, phi, mesh) < 1e-8
    assert all(r[2] is not None and np.isfinite(r[2]) for r in linf_monitor(tr, 1e-3))


def test_large_data_diverges():
    g = GridSpec(1, 8.0, 128)
    spec = ProblemSpec(2.0, 4.0, POWER, 0.05, SpaceParams(0.2 - 2 / 3, 5, 4))
    phi = realize(DataRecipe("power_law", 5.0, beta=2 / 3), g)
    tr = picard_solve(spec, phi, TimeMesh(0.05, 32), SolverControls(max_iters=300))
    assert tr.status == DIVERGED and tr.diagnostic


def test_parameter_checks():
    g = GridSpec(1, 8.0, 64)
    phi = Field.physical(g, np.zeros(64))
    with pytest.raises(ParameterError):
        picard_solve(ProblemSpec(2.0, 1.5, POWER, 0.5, SpaceParams(-2.0, 1.5, 1.5)), phi, TimeMesh(0.5, 8))
    with pytest.raises(ParameterError):
        picard_solve(DIRAC_SPEC, phi, TimeMesh(0.25, 8))
    with pytest.raises(ParameterError):
        picard_solve(DIRAC_SPEC, Field.physical(g, 1j * np.ones(64)), TimeMesh(0.5, 8))


def test_spectral_filter_damps_top_modes():
    g = GridSpec(1, 8.0, 128)
    phi = realize(DataRecipe("dirac", 0.05), g)
    mesh = TimeMesh(0.5, 16)
    plain = picard_solve(DIRAC_SPEC, phi, mesh)
    filt = picard_solve(DIRAC_SPEC, phi, mesh, SolverControls(filter_strength=36.0))
    assert filt.status == CONVERGED
    assert not np.array_equal(plain.final, filt.final)
    assert np.max(np.abs(plain.final - filt.final)) < 1e-2 * np.max(np.abs(plain.final))


# -- threshold scan ----------------------------------------------------------

def test_threshold_scan_tiny_amplitudes_converge():
    g = GridSpec(1, 8.0, 128)
    shape = realize(DataRecipe("dirac"), g)
    scan = threshold_scan(DIRAC_SPEC, shape, [1e-8, 1e-7, 1e-6], TimeMesh(0.5, 16))
    assert all(st == CONVERGED for _, st, _ in scan.rows)
    assert scan.c_ok == 1e-6 and scan.c_bad is None and scan.monotone


def test_threshold_scan_brackets_power_law():
    g = GridSpec(1, 8.0, 256)
    spec = ProblemSpec(2.0, 4.0, POWER, 0.05, SpaceParams(0.2 - 2 / 3, 5, 4))
    shape = realize(DataRecipe("power_law", beta=2 / 3), g)
    scan = threshold_scan(spec, shape, np.geomspace(0.05, 5, 9), TimeMesh(0.05, 64), SolverControls(max_iters=300))
    assert scan.c_ok is not None and scan.c_bad is not None and scan.c_ok < scan.c_bad
    assert scan.monotone


def test_threshold_scan_rejects_unsorted():
    g = GridSpec(1, 8.0, 64)
    with pytest.raises(ParameterError):
        threshold_scan(DIRAC_SPEC, realize(DataRecipe("dirac"), g), [0.1, 0.05], TimeMesh(0.5, 8))


# -- bootstrap ladder --------------------------------------------------------

def test_bootstrap_single_row():
    rows = bootstrap_schedule(1, 2.0, 1.5, 1.5, 1.5, POWER, s=-1 / 3)
    assert rows == [(1.5, 1.5, -1 / 3)]
    assert 1 / 1.5 < 2 / 1.5


def test_bootstrap_two_rows():
    rows = bootstrap_schedule(2, 2.0, 2.0, 2.0, 2.0)
    assert len(rows) == 2
    (p1, q1, _), (p2, q2, s2) = rows
    assert 2 / p2 < 1 and 2 / p2 > 2 / p1 - 1
    assert q2 == pytest.approx(p2 * q1 / p1) and s2 == pytest.approx(2 / p2 - 2 / p1)
    assert check_schedule(2, 2.0, 2.0, rows) == []


def test_bootstrap_near_integer_ratio():
    # N/(a p) = 1.98: a greedy step of a - 0.05 a from N/p cannot get below a in one step
    dim, theta, gamma, p = 3, 1.5, 2.0, 2.0 / 0.99
    a = theta / gamma
    assert dim / p - 0.95 * a >= a
    rows = bootstrap_schedule(dim, theta, gamma, p, 2.0)
    assert len(rows) == 2
    assert check_schedule(dim, theta, gamma, rows) == []


def test_bootstrap_rejects_bad_input():
    with pytest.raises(ScheduleError):
        bootstrap_schedule(1, 2.0, 1.5, 1.5, 1.5, "other")
    with pytest.raises(ScheduleError):
        bootstrap_schedule(1, 1.0, 1.5, 1.5, 1.5, HJ)  # theta - gamma < 0


@st.composite
def admissible(draw):
    kind = draw(st.sampled_from([POWER, HJ]))
    dim = draw(st.integers(1, 3))
    theta = draw(st.floats(1.2, 3.0))
    if kind == POWER:
        gamma = draw(st.floats(1.1, 4.0))
    else:
        gamma = draw(st.floats(1.05, theta - 0.1))
    p = draw(st.floats(max(gamma, 1.0), 8.0))
    q = draw(st.floats(gamma, p))
    return dim, theta, gamma, p, q, kind


@given(admissible())
def test_bootstrap_rows_satisfy_checker(args):
    dim, theta, gamma, p, q, kind = args
    a = theta / gamma if kind == POWER else (theta - gamma) / gamma
    assume(a > 0.05)
    lo = max(-theta / gamma, dim / p - theta / (gamma - 1)) if kind == POWER else \
        max(1 - theta / gamma, dim / p + (gamma - theta) / (gamma - 1))
    assume(lo < -1e-6)
    if kind == HJ:
        assume(p > dim * (gamma - 1) / (theta - 1))
    rows = bootstrap_schedule(dim, theta, gamma, p, q, kind)
    assert check_schedule(dim, theta, gamma, rows, kind) == []
    assert len(rows) == int(np.floor(dim / (a * p))) + 1


def test_bootstrap_q_equal_p_stays_exact():
    rows = bootstrap_schedule(3, 1.2, 1.1015625, 1.2, 1.2, POWER)
    assert all(q == p for p, q, _ in rows)
