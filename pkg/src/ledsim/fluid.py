"""Fluid model of N fLEDBAT flows on one bottleneck.

State is the vector of rates ``X`` (packets/s) and the queue ``Q``
(packets). Per flow::

    dX_i/dt = alpha/R^2 - zeta/(R tau) (Q/C - tau) X_i  [X_i >= 0][Q >= C tau]
    dQ/dt   = sum(X) - C                                 (Q held at 0 while sum(X) < C)

Flows contribute nothing before their start time. Besides integration the
module gives the closed-form equilibrium, a Lyapunov function for the
aggregate dynamics, the linearization eigenvalues and the convergence rate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

EVENT_RESOLUTION = 1e-6


@dataclass(frozen=True)
class FluidParams:
    N: int
    C: float
    R: float
    tau: float = 0.025
    alpha: float = 1.0
    zeta: float = 0.1
    start_times: tuple[float, ...] | None = None
    buffer: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        for name in ("C", "R", "tau", "alpha", "zeta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite (got {v!r})")
        if self.start_times is not None:
            if len(self.start_times) != self.N:
                raise ValueError("need one start time per flow")
            if any(s < 0 for s in self.start_times):
                raise ValueError("start times must be non-negative")
            object.__setattr__(self, "start_times", tuple(float(s) for s in self.start_times))
        if self.buffer is not None and self.buffer <= 0:
            raise ValueError("buffer must be positive")

    @property
    def starts(self) -> tuple[float, ...]:
        return self.start_times if self.start_times is not None else (0.0,) * self.N

    @property
    def target_queue(self) -> float:
        return self.C * self.tau


@dataclass
class FluidState:
    X: np.ndarray
    Q: float
    t: float = 0.0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)

    def vector(self) -> np.ndarray:
        return np.append(self.X, self.Q)


@dataclass
class Equilibrium:
    X_star: np.ndarray
    Q_star: float
    theta: float
    zeta_star: float

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.X_star, self.Q_star)


@dataclass
class FluidTrajectory:
    params: FluidParams
    t: np.ndarray
    X: np.ndarray  # shape (T, N)
    Q: np.ndarray
    crossings: list = field(default_factory=list)

    def state(self, k: int) -> FluidState:
        return FluidState(self.X[k].copy(), float(self.Q[k]), float(self.t[k]))

    def mean_rates(self, t0: float, t1: float) -> np.ndarray:
        m = (self.t >= t0) & (self.t <= t1)
        return self.X[m].mean(axis=0)


# --- right-hand side --------------------------------------------------------


def _rhs(t, X, Q, p: FluidParams, starts, k_dec, a_inc, Ctau):
    decreasing = Q >= Ctau
    excess = Q / p.C - p.tau
    dX = []
    total = 0.0
    for x, s in zip(X, starts):
        if t < s:
            dX.append(0.0)
            continue
        total += x
        d = a_inc
        if decreasing and x >= 0.0:
            d -= k_dec * excess * x
        dX.append(d)
    dQ = total - p.C
    if Q <= 0.0 and dQ < 0.0:
        dQ = 0.0
    if p.buffer is not None and Q >= p.buffer and dQ > 0.0:
        dQ = 0.0
    return dX, dQ


def _consts(p: FluidParams):
    return p.starts, p.zeta / (p.R * p.tau), p.alpha / (p.R * p.R), p.C * p.tau


def fluid_rhs(state: FluidState, params: FluidParams) -> np.ndarray:
    """Time derivative ``(dX_1, ..., dX_N, dQ)`` at ``state``."""
    X = [float(x) for x in state.X]
    if len(X) != params.N:
        raise ValueError(f"state has {len(X)} rates, params expect {params.N}")
    if not (all(math.isfinite(x) for x in X) and math.isfinite(state.Q) and math.isfinite(state.t)):
        raise ValueError("non-finite fluid state")
    dX, dQ = _rhs(state.t, X, float(state.Q), params, *_consts(params))
    return np.array(dX + [dQ])


# --- integration --------------------------------------------------------------


def _rk4(t, X, Q, h, p, c):
    k1x, k1q = _rhs(t, X, Q, p, *c)
    h2 = 0.5 * h
    X2 = [x + h2 * d for x, d in zip(X, k1x)]
    k2x, k2q = _rhs(t + h2, X2, Q + h2 * k1q, p, *c)
    X3 = [x + h2 * d for x, d in zip(X, k2x)]
    k3x, k3q = _rhs(t + h2, X3, Q + h2 * k2q, p, *c)
    X4 = [x + h * d for x, d in zip(X, k3x)]
    k4x, k4q = _rhs(t + h, X4, Q + h * k3q, p, *c)
    h6 = h / 6.0
    Xn = [
        x + h6 * (a + 2.0 * b + 2.0 * cc + d)
        for x, a, b, cc, d in zip(X, k1x, k2x, k3x, k4x)
    ]
    Qn = Q + h6 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    if Qn < 0.0:
        Qn = 0.0
    if p.buffer is not None and Qn > p.buffer:
        Qn = p.buffer
    return Xn, Qn


def _regime(Q, Ctau, buffer):
    return (Q >= Ctau, Q > 0.0, buffer is not None and Q >= buffer)


def _advance(t, X, Q, h, p, c, crossings):
    """Advance by ``h``, splitting the step where the queue crosses a
    switching surface (C*tau, 0 or the buffer cap)."""
    Ctau = c[3]
    remaining = h
    while remaining > 0.0:
        before = _regime(Q, Ctau, p.buffer)
        Xn, Qn = _rk4(t, X, Q, remaining, p, c)
        if _regime(Qn, Ctau, p.buffer) == before:
            return Xn, Qn, t + remaining
        lo, hi = 0.0, remaining
        while hi - lo > EVENT_RESOLUTION:
            mid = 0.5 * (lo + hi)
            _, Qm = _rk4(t, X, Q, mid, p, c)
            if _regime(Qm, Ctau, p.buffer) == before:
                lo = mid
            else:
                hi = mid
        X, Q = _rk4(t, X, Q, hi, p, c)
        t += hi
        remaining -= hi
        crossings.append(t)
    return X, Q, t


def integrate(
    params: FluidParams,
    x0: FluidState,
    t_end: float,
    dt: float = 1e-3,
) -> FluidTrajectory:
    """Fixed-step RK4 from ``x0`` to ``t_end``, sampled every ``dt``.

    Steps are split at flow start times and refined by bisection (to 1e-6 s)
    where the queue crosses C*tau, 0 or the buffer cap, since the right-hand
    side is discontinuous there.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= x0.t:
        raise ValueError("t_end must be after the initial time")
    p = params
    c = _consts(p)
    X = [float(x) for x in x0.X]
    Q = float(x0.Q)
    t0 = float(x0.t)
    if len(X) != p.N:
        raise ValueError("initial state has the wrong number of flows")
    n = int(math.floor((t_end - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n + 1)
    if grid[-1] < t_end - 1e-12:
        grid = np.append(grid, t_end)
    breaks = sorted(s for s in set(p.starts) if t0 < s < t_end)
    out_X = np.empty((len(grid), p.N))
    out_Q = np.empty(len(grid))
    out_X[0] = X
    out_Q[0] = Q
    crossings: list = []
    t = t0
    bi = 0
    for k in range(1, len(grid)):
        target = float(grid[k])
        while bi < len(breaks) and breaks[bi] <= target:
            b = breaks[bi]
            if b > t:
                X, Q, t = _advance(t, X, Q, b - t, p, c, crossings)
            t = b
            bi += 1
        if target > t:
            X, Q, t = _advance(t, X, Q, target - t, p, c, crossings)
        t = target
        if not (math.isfinite(Q) and all(math.isfinite(x) for x in X)):
            raise FloatingPointError(f"fluid state diverged at t={t}")
        out_X[k] = X
        out_Q[k] = Q
    return FluidTrajectory(p, grid, out_X, out_Q, crossings)


def empty_state(params: FluidParams, t: float = 0.0) -> FluidState:
    return FluidState(np.zeros(params.N), 0.0, t)


# --- analysis -----------------------------------------------------------------


def critical_zeta(params: FluidParams) -> float:
    p = params
    return p.alpha**2 * p.tau / (4.0 * p.N * p.C * p.R**3)


def equilibrium(params: FluidParams) -> Equilibrium:
    p = params
    x_star = np.full(p.N, p.C / p.N)
    q_star = p.C * p.tau + p.N * p.alpha * p.tau / (p.zeta * p.R)
    z_star = critical_zeta(p)
    a = p.alpha / (p.C * p.R**2)
    # rate as stated: the square-root term only enters when zeta <= zeta*
    root = math.sqrt(1.0 - p.zeta / z_star) if p.zeta <= z_star else 0.0
    theta = a * (1.0 + root) / 2.0
    return Equilibrium(x_star, q_star, theta, z_star)


def _stable_log_term(x: float, x_star: float) -> float:
    """x - x* - x* log(x/x*) without cancellation near x*."""
    u = (x - x_star) / x_star
    if abs(u) < 1e-3:
        # u - log1p(u) = u^2/2 - u^3/3 + u^4/4 - ...
        s, term, sign = 0.0, u * u, 1.0
        for k in range(2, 12):
            s += sign * term / k
            term *= u
            sign = -sign
        return x_star * s
    return x_star * (u - math.log1p(u))


def lyapunov(state: FluidState, params: FluidParams) -> tuple[float, float]:
    """Lyapunov function of the aggregate (X, Q) dynamics outside region A,
    and its time derivative.

    ``V = (X - X*) - X* log(X/X*) + zeta (Q - Q*)^2 / (2 R C tau)`` with
    ``X = sum(X_i)`` and ``X* = C``. Along trajectories with ``Q >= C tau``
    its derivative is ``-N alpha (X - X*)^2 / (X X* R^2)``.
    """
    p = params
    X = float(np.sum(state.X))
    if X <= 0:
        raise ValueError("aggregate rate must be positive")
    eq = equilibrium(p)
    x_star = p.C
    V = _stable_log_term(X, x_star) + p.zeta * (state.Q - eq.Q_star) ** 2 / (2.0 * p.R * p.C * p.tau)
    Vdot = -p.N * p.alpha * (X - x_star) ** 2 / (X * x_star * p.R**2)
    return V, Vdot


def characteristic_coefficients(params: FluidParams) -> tuple[float, float, float]:
    """``(a, b, c)`` with characteristic polynomial ``(l + a)^(N-1) (l^2 + b l + c)``."""
    p = params
    a = p.alpha / (p.C * p.R**2)
    return a, a, p.N * p.zeta / (p.C * p.tau * p.R)


def jacobian_eigen(params: FluidParams) -> list[complex]:
    """Roots of the factored characteristic polynomial, in closed form."""
    a, b, c = characteristic_coefficients(params)
    disc = cmath.sqrt(b * b - 4.0 * c)
    pair = [(-b + disc) / 2.0, (-b - disc) / 2.0]
    return [complex(-a)] * (params.N - 1) + pair


def characteristic_polynomial(params: FluidParams, lam: complex) -> complex:
    a, b, c = characteristic_coefficients(params)
    return (lam + a) ** (params.N - 1) * (lam * lam + b * lam + c)


def root_residual(params: FluidParams, lam: complex) -> float:
    """``|p(lam)|`` relative to the same product evaluated on magnitudes.

    The absolute value of a degree N+1 polynomial at a rounded root scales
    with ``|lam|^(N+1)``; this normalization makes residuals comparable to
    machine precision for every N.
    """
    a, b, c = characteristic_coefficients(params)
    m = abs(lam)
    scale = (m + a) ** (params.N - 1) * (m * m + b * m + c)
    return abs(characteristic_polynomial(params, lam)) / scale


def jacobian(params: FluidParams) -> np.ndarray:
    """Exact Jacobian of the right-hand side at the equilibrium (all flows
    started, decrease region active)."""
    p = params
    eq = equilibrium(p)
    k = p.zeta / (p.R * p.tau)
    J = np.zeros((p.N + 1, p.N + 1))
    for i in range(p.N):
        J[i, i] = -k * (eq.Q_star / p.C - p.tau)
        J[i, p.N] = -k * eq.X_star[i] / p.C
        J[p.N, i] = 1.0
    return J


def dominant_decay_rate(params: FluidParams) -> float:
    """Slowest decay rate of the exact linearization."""
    return float(-np.max(np.linalg.eigvals(jacobian(params)).real))


def fit_decay_rate(traj: FluidTrajectory, t0: float, t1: float | None = None) -> float:
    """Exponential decay rate of ``||X(t) - X*||`` over ``[t0, t1]``.

    Uses the local maxima of the deviation so oscillating modes do not bias
    the log-linear fit.
    """
    eq = equilibrium(traj.params)
    t1 = traj.t[-1] if t1 is None else t1
    m = (traj.t >= t0) & (traj.t <= t1)
    t = traj.t[m]
    dev = np.linalg.norm(traj.X[m] - eq.X_star, axis=1)
    peaks = np.flatnonzero((dev[1:-1] > dev[:-2]) & (dev[1:-1] >= dev[2:])) + 1
    if len(peaks) >= 3:
        t, dev = t[peaks], dev[peaks]
    ok = dev > 0
    if ok.sum() < 2:
        raise ValueError("not enough nonzero deviation samples to fit")
    slope = np.polyfit(t[ok], np.log(dev[ok]), 1)[0]
    return float(-slope)


def params_from_link(
    n_flows: int,
    capacity_bps: float,
    rtt: float,
    packet_bytes: int = 1500,
    tau: float = 0.025,
    alpha: float = 1.0,
    zeta: float = 0.1,
    start_times=None,
    buffer=None,
) -> FluidParams:
    return FluidParams(
        N=n_flows,
        C=capacity_bps / (8.0 * packet_bytes),
        R=rtt,
        tau=tau,
        alpha=alpha,
        zeta=zeta,
        start_times=None if start_times is None else tuple(start_times),
        buffer=buffer,
    )
