import math

import numpy as np
import pytest

from ledsim.fluid import (
    FluidParams,
    FluidState,
    characteristic_polynomial,
    critical_zeta,
    dominant_decay_rate,
    empty_state,
    equilibrium,
    fit_decay_rate,
    fluid_rhs,
    integrate,
    jacobian,
    jacobian_eigen,
    lyapunov,
    params_from_link,
    root_residual,
)

C = 10e6 / 12000.0
P = FluidParams(N=2, C=C, R=0.05, tau=0.025, alpha=1.0, zeta=0.1)
GRID = [(n, z) for n in (1, 2, 5, 10) for z in (0.01, 0.1, 1.0, 5.0)]


def on_eq(p):
    eq = equilibrium(p)
    return FluidState(eq.X_star.copy(), eq.Q_star)


def test_equilibrium_default():
    eq = equilibrium(P)
    assert eq.X_star == pytest.approx([416.6667, 416.6667], rel=1e-6)
    assert eq.Q_star == pytest.approx(20.8333 + 10.0, rel=1e-5)
    assert eq.zeta_star == pytest.approx(0.03, rel=0.01)
    assert eq.theta == pytest.approx(0.24, rel=1e-9)


def test_single_flow_is_efficient():
    eq = equilibrium(FluidParams(N=1, C=C, R=0.05))
    assert eq.X_star[0] == C


def test_queue_target_error():
    for n, z in GRID:
        p = FluidParams(N=n, C=C, R=0.05, zeta=z)
        eq = equilibrium(p)
        assert eq.Q_star / C - p.tau == pytest.approx(n * p.alpha * p.tau / (C * z * p.R), rel=1e-12)


def test_theta_below_critical_zeta_uses_root():
    p = FluidParams(N=2, C=C, R=0.05, zeta=0.01)
    zs = critical_zeta(p)
    a = 1.0 / (C * 0.05**2)
    assert equilibrium(p).theta == pytest.approx(a * (1 + math.sqrt(1 - 0.01 / zs)) / 2)


def test_rhs_region_a_pure_increase():
    s = FluidState(np.array([100.0, 200.0]), 5.0)
    d = fluid_rhs(s, P)
    assert d[:2] == pytest.approx([1 / 0.05**2] * 2, rel=1e-15)
    assert d[2] == pytest.approx(300.0 - C)


def test_rhs_zero_at_equilibrium():
    d = fluid_rhs(on_eq(P), P)
    assert np.max(np.abs(d[:2])) < 1e-9 * C
    assert abs(d[2]) < 1e-9 * C


def test_rhs_empty_boundary():
    d = fluid_rhs(empty_state(P), P)
    assert d[2] == 0.0
    assert d[:2] == pytest.approx([400.0, 400.0])


def test_rhs_rejects_non_finite():
    with pytest.raises(ValueError):
        fluid_rhs(FluidState(np.array([math.nan, 1.0]), 1.0), P)


def test_not_started_flows_are_frozen():
    p = FluidParams(N=2, C=C, R=0.05, start_times=(0.0, 2.0))
    d = fluid_rhs(FluidState(np.zeros(2), 0.0, 1.0), p)
    assert d[1] == 0.0 and d[0] > 0


def test_parabola_in_region_a():
    p = FluidParams(N=1, C=C, R=0.05)
    x0, q0 = 900.0, 0.0
    traj = integrate(p, FluidState(np.array([x0]), q0), 0.01, dt=1e-4)
    for t, q in zip(traj.t, traj.Q):
        exact = q0 + (x0 - C) * t + 1 / (2 * 0.05**2) * t * t
        assert q < C * p.tau
        if t > 0:
            assert abs(q - exact) / exact < 1e-6


def test_fixed_point_is_stationary():
    s = on_eq(P)
    traj = integrate(P, s, 5.0)
    ref = np.append(s.X, s.Q)
    dev = np.abs(np.column_stack([traj.X, traj.Q]) - ref).max()
    assert dev < 1e-8 * ref.max()


def test_default_trajectory_reaches_equilibrium():
    p = FluidParams(N=2, C=C, R=0.05, zeta=0.1, start_times=(0.0, 2.0))
    traj = integrate(p, empty_state(p), 60.0)
    eq = equilibrium(p)
    assert traj.X[-1] == pytest.approx(eq.X_star, rel=1e-3)
    assert traj.Q[-1] == pytest.approx(eq.Q_star, rel=1e-3)
    assert np.all(traj.Q >= 0) and np.all(traj.X >= 0)


def test_step_halving_changes_little():
    p = FluidParams(N=2, C=C, R=0.05, start_times=(0.0, 2.0))
    a = integrate(p, empty_state(p), 30.0, dt=1e-3)
    b = integrate(p, empty_state(p), 30.0, dt=5e-4)
    assert b.Q[-1] == pytest.approx(a.Q[-1], rel=1e-4)
    assert b.X[-1] == pytest.approx(a.X[-1], rel=1e-4)


@pytest.mark.parametrize("n,z", GRID)
def test_newton_finds_unique_fixed_point(n, z):
    p = FluidParams(N=n, C=C, R=0.05, zeta=z)
    eq = equilibrium(p)
    ref = eq.vector
    rng = np.random.default_rng(n * 100 + int(z * 100))
    for _ in range(20):
        x = np.append(rng.uniform(0.1, 2.0, n) * C / n, C * p.tau * rng.uniform(1.05, 3.0))
        for _ in range(100):
            st = FluidState(x[:n], x[n])
            f = fluid_rhs(st, p)
            J = _numeric_jac(p, x)
            step = np.linalg.solve(J, -f)
            x = x + step
            x[:n] = np.maximum(x[:n], 1e-9)
            x[n] = max(x[n], C * p.tau * (1 + 1e-9))
            if np.max(np.abs(step) / np.abs(ref)) < 1e-13:
                break
        assert np.max(np.abs(x - ref) / np.abs(ref)) < 1e-6


def _numeric_jac(p, x, h=1e-6):
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h * max(1.0, abs(x[j]))
        fp = fluid_rhs(FluidState((x + e)[:-1], (x + e)[-1]), p)
        fm = fluid_rhs(FluidState((x - e)[:-1], (x - e)[-1]), p)
        J[:, j] = (fp - fm) / (2 * e[j])
    return J


def test_exact_jacobian_matches_finite_differences():
    for n, z in GRID:
        p = FluidParams(N=n, C=C, R=0.05, zeta=z)
        assert jacobian(p) == pytest.approx(_numeric_jac(p, equilibrium(p).vector), rel=1e-5, abs=1e-8)


def test_global_convergence_from_random_states():
    rng = np.random.default_rng(11)
    for n, z in [(1, 0.1), (2, 1.0), (5, 0.01), (10, 5.0)]:
        p = FluidParams(N=n, C=C, R=0.05, zeta=z)
        eq = equilibrium(p)
        ref = eq.vector
        for _ in range(5):
            x0 = FluidState(rng.uniform(0, 2 * C / n, n), rng.uniform(0, 100))
            traj = integrate(p, x0, 80.0, dt=2e-3)
            end = np.append(traj.X[-1], traj.Q[-1])
            assert np.linalg.norm(end - ref) / np.linalg.norm(ref) < 0.01


def test_small_polynomial_residual_is_absolute():
    p = FluidParams(N=1, C=C, R=0.05)
    for r in jacobian_eigen(p):
        assert abs(characteristic_polynomial(p, r)) < 1e-12


def test_eigenvalue_structure():
    p1 = FluidParams(N=1, C=C, R=0.05, zeta=0.1)
    roots = jacobian_eigen(p1)
    assert len(roots) == 2
    a = 1 / (C * 0.05**2)
    assert all(r.real == pytest.approx(-a / 2) for r in roots)
    p3 = FluidParams(N=3, C=C, R=0.05)
    roots = jacobian_eigen(p3)
    assert len(roots) == 4
    assert sum(1 for r in roots if r == complex(-a)) == 2


@pytest.mark.parametrize("n,z", GRID)
def test_roots_satisfy_polynomial(n, z):
    p = FluidParams(N=n, C=C, R=0.05, zeta=z)
    for r in jacobian_eigen(p):
        assert r.real < 0
        assert root_residual(p, r) < 1e-12


def test_linearization_decay_rate():
    # slowest mode of the exact linearization: N*alpha/(2 C R^2) when oscillatory
    assert dominant_decay_rate(P) == pytest.approx(2 * 1 / (2 * C * 0.05**2), rel=1e-9)


def test_fit_recovers_linear_rate():
    p = FluidParams(N=2, C=C, R=0.05, zeta=0.1, start_times=(0.0, 2.0))
    traj = integrate(p, empty_state(p), 60.0)
    fit = fit_decay_rate(traj, 20.0, 50.0)
    assert fit == pytest.approx(dominant_decay_rate(p), rel=0.02)


def test_lyapunov_at_equilibrium_and_away():
    V, Vd = lyapunov(on_eq(P), P)
    assert V == pytest.approx(0.0, abs=1e-12) and Vd == 0.0
    eq = equilibrium(P)
    V, Vd = lyapunov(FluidState(eq.X_star * 2, eq.Q_star), P)
    assert V > 0 and Vd < 0
    with pytest.raises(ValueError):
        lyapunov(FluidState(np.zeros(2), 30.0), P)


def test_lyapunov_derivative_matches_trajectory():
    p = FluidParams(N=2, C=C, R=0.05)
    eq = equilibrium(p)
    s = FluidState(eq.X_star * 1.3, eq.Q_star + 5)
    h = 1e-5
    traj = integrate(p, s, h, dt=h)
    V0, Vd = lyapunov(s, p)
    V1, _ = lyapunov(traj.state(1), p)
    assert (V1 - V0) / h == pytest.approx(Vd, rel=1e-3)


def test_params_from_link():
    p = params_from_link(2, 10e6, 0.05, start_times=[0, 2])
    assert p.C == pytest.approx(C) and p.starts == (0.0, 2.0)


def test_invalid_params():
    with pytest.raises(ValueError):
        FluidParams(N=0, C=C, R=0.05)
    with pytest.raises(ValueError):
        FluidParams(N=1, C=C, R=-1)
    with pytest.raises(ValueError):
        FluidParams(N=2, C=C, R=0.05, start_times=(0.0,))
    with pytest.raises(ValueError):
        integrate(P, empty_state(P), 1.0, dt=0)
