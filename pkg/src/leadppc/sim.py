"""Closed-loop leader-follower dynamics and their integration.

Node dynamics are ``xdot = -L x + B u`` with the funnel control

    u = -D_i J(x_hat, t) G eps(x_hat)

applied to the leaders only (``leader_ppc``), to nobody (``no_control``), or to
every agent with ``B = I`` (``all_agents_ppc``).

The control gain grows like ``g / rho(t)**2`` as the funnel closes, so the
closed loop turns stiff late in a run; the default integrator is therefore the
implicit Radau IIA scheme sampled on a fixed ``dt`` grid. Classical fixed-step
RK4 is kept for non-stiff runs and the linear reference checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .graph import DerivedMatrices, Topology, derive_matrices
from .performance import EdgeChannel, OutOfFunnel, transform, jacobian

CLAMP_MARGIN = 1e-9


class Mode(str, enum.Enum):
    NO_CONTROL = "no_control"
    LEADER_PPC = "leader_ppc"
    ALL_AGENTS_PPC = "all_agents_ppc"


class InitialConditionOutsideFunnel(ValueError):
    pass


class NumericalBlowup(FloatingPointError):
    pass


@dataclass
class SimConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    violation_margin: float = 0.0
    # None resolves to the smallest rho_inf over the edges
    consensus_tol: float | None = None
    mode: Mode = Mode.LEADER_PPC
    # weight on the quadratic term of the monitored Lyapunov function
    gamma: float = 1.0
    # "radau": implicit, sampled every dt; "rk4": classical fixed step dt
    method: str = "radau"
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.method not in ("radau", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.dt < self.t_end:
            raise ValueError(f"need 0 < dt < t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.consensus_tol is not None and self.consensus_tol <= 0:
            raise ValueError("consensus_tol must be positive")
        if self.violation_margin < 0:
            raise ValueError("violation_margin must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass(frozen=True)
class Violation:
    time: float
    edge: int  # 0-based edge index
    value: float
    bound: float


@dataclass
class SimTrace:
    times: np.ndarray
    x: np.ndarray  # (steps, n)
    xbar: np.ndarray  # (steps, m)
    rho: np.ndarray  # (steps, m)
    V: np.ndarray
    u: np.ndarray  # (steps, number of actuated agents)
    violations: list[Violation] = field(default_factory=list)
    converged_at: float | None = None
    clamped_steps: list[int] = field(default_factory=list)

    @property
    def violated_edges(self) -> set[int]:
        return {v.edge for v in self.violations}


class ChannelBank:
    """Vectorized view of a list of :class:`EdgeChannel`."""

    def __init__(self, channels: Sequence[EdgeChannel]):
        self.channels = tuple(channels)
        as_arr = lambda f: np.array([f(c) for c in self.channels], dtype=float)
        self.lo = as_arr(lambda c: c.region_lo)
        self.hi = as_arr(lambda c: c.region_hi)
        self.offset = as_arr(lambda c: c.t_offset)
        self.g = as_arr(lambda c: c.g)
        self.rho0 = as_arr(lambda c: c.spec.rho0)
        self.rho_inf = as_arr(lambda c: c.spec.rho_inf)
        self.l = as_arr(lambda c: c.spec.l)

    def __len__(self):
        return len(self.channels)

    def rho(self, t: float) -> np.ndarray:
        return (self.rho0 - self.rho_inf) * np.exp(-self.l * t) + self.rho_inf

    def modulated(self, xbar: np.ndarray, t: float) -> np.ndarray:
        return xbar / self.rho(t)

    def eps_jac(self, xbar, t, idx=None, clamp=False):
        """Transformed errors and normalized Jacobians on edges ``idx``.

        Returns ``(eps, J, clamped)``. Outside the region either raises
        :class:`OutOfFunnel` or, with ``clamp``, evaluates at the nearest point
        ``CLAMP_MARGIN`` inside the boundary.
        """
        if idx is None:
            idx = np.arange(len(self))
        r = self.rho(t)[idx]
        xh = np.asarray(xbar, dtype=float)[idx] / r
        lo, hi = self.lo[idx], self.hi[idx]
        bad = ~((lo < xh) & (xh < hi))
        clamped = bool(bad.any())
        if clamped:
            if not clamp:
                k = int(idx[np.argmax(bad)])
                raise OutOfFunnel(f"edge {k} modulated error outside its region", edge=k)
            xh = np.clip(xh, lo + CLAMP_MARGIN, hi - CLAMP_MARGIN)
        eps = np.log((xh - lo) / (hi - xh)) - self.offset[idx]
        jac = (1.0 / (xh - lo) + 1.0 / (hi - xh)) / r
        return eps, jac, clamped


def _bank(channels) -> ChannelBank:
    return channels if isinstance(channels, ChannelBank) else ChannelBank(channels)


def control_input(dm: DerivedMatrices, channels, x, t: float, clamp: bool = False) -> np.ndarray:
    """Leader inputs ``-D_i J G eps`` (length ``n_l``).

    Only edges touching a leader contribute, so follower-only edges are never
    pushed through the transformation.
    """
    u, _ = _leader_input(dm, _bank(channels), np.asarray(x, dtype=float), t, clamp)
    return u


def _leader_input(dm, bank, x, t, clamp):
    idx = dm.leader_edges
    xbar = dm.D.T @ x
    eps, jac, clamped = bank.eps_jac(xbar, t, idx, clamp)
    return -dm.D_i[:, idx] @ (jac * bank.g[idx] * eps), clamped


def _full_input(dm, bank, x, t, clamp):
    xbar = dm.D.T @ x
    eps, jac, clamped = bank.eps_jac(xbar, t, None, clamp)
    return -dm.D @ (jac * bank.g * eps), clamped


def control_input_per_leader(t_: Topology, channels: Sequence[EdgeChannel], x, t: float) -> np.ndarray:
    """Neighbour-sum form of the leader control, one leader at a time.

    Each leader ``i`` sums ``g_ij * J_ij * eps_ij`` over its neighbours using its
    own orientation ``x_i - x_j``; on reversed edges the channel is mirrored so
    that ``eps_ij = -eps_ji``.
    """
    x = np.asarray(x, dtype=float)
    u = np.zeros(t_.n_l)
    for pos, i in enumerate(sorted(t_.leaders)):
        total = 0.0
        for k, (a, b) in enumerate(t_.edges):
            if i not in (a, b):
                continue
            j = b if a == i else a
            ch = channels[k]
            if a != i:
                ch = EdgeChannel(ch.spec, -ch.region_hi, -ch.region_lo, ch.g)
            r = (ch.spec.rho0 - ch.spec.rho_inf) * math.exp(-ch.spec.l * t) + ch.spec.rho_inf
            x_hat = (x[i - 1] - x[j - 1]) / r
            total += ch.g * jacobian(ch, x_hat, t) * transform(ch, x_hat)
        u[pos] = -total
    return u


def node_rhs(dm: DerivedMatrices, channels, x, t: float, mode=Mode.LEADER_PPC, clamp: bool = False) -> np.ndarray:
    xdot, _, _ = _rhs(dm, _bank(channels), np.asarray(x, dtype=float), t, Mode(mode), clamp)
    return xdot


def _rhs(dm, bank, x, t, mode, clamp):
    xdot = -dm.L @ x
    if mode is Mode.NO_CONTROL:
        return xdot, np.zeros(0), False
    if mode is Mode.LEADER_PPC:
        u, clamped = _leader_input(dm, bank, x, t, clamp)
        xdot[dm.topology.n_f:] += u
        return xdot, u, clamped
    u, clamped = _full_input(dm, bank, x, t, clamp)
    return xdot + u, u, clamped


def lyapunov(channels, gamma: float, xbar, t: float) -> float:
    """``0.5 eps^T G eps + 0.5 gamma xbar^T xbar``."""
    bank = _bank(channels)
    xbar = np.asarray(xbar, dtype=float)
    eps, _, _ = bank.eps_jac(xbar, t)
    return 0.5 * float(eps @ (bank.g * eps)) + 0.5 * gamma * float(xbar @ xbar)


def centroid(x) -> float:
    return float(np.mean(x))


def _control_jacobian(dm, bank, x, t, idx, actuated):
    """d(u)/dx for ``u = -actuated @ (g J eps)`` restricted to edges ``idx``."""
    r = bank.rho(t)[idx]
    xh = (dm.D[:, idx].T @ x) / r
    lo, hi = bank.lo[idx], bank.hi[idx]
    xh = np.clip(xh, lo + CLAMP_MARGIN, hi - CLAMP_MARGIN)
    eps = np.log((xh - lo) / (hi - xh)) - bank.offset[idx]
    d1 = 1.0 / (xh - lo) + 1.0 / (hi - xh)
    d2 = -1.0 / (xh - lo) ** 2 + 1.0 / (hi - xh) ** 2
    # d(J eps)/d xbar = J * d eps/d xbar + eps * dJ/d xbar
    w = bank.g[idx] * (d1 * d1 + eps * d2) / r**2
    return -(actuated * w) @ dm.D[:, idx].T


def _rhs_jacobian(dm, bank, x, t, mode):
    jac = -dm.L.copy()
    if mode is Mode.LEADER_PPC:
        idx = dm.leader_edges
        jac[dm.topology.n_f:] += _control_jacobian(dm, bank, x, t, idx, dm.D_i[:, idx])
    elif mode is Mode.ALL_AGENTS_PPC:
        idx = np.arange(len(bank))
        jac += _control_jacobian(dm, bank, x, t, idx, dm.D)
    return jac


def rk4_step(f, t: float, y: np.ndarray, h: float):
    """One classical Runge-Kutta step; ``f`` returns ``(dy, flag)``."""
    k1, f1 = f(t, y)
    k2, f2 = f(t + h / 2, y + h / 2 * k1)
    k3, f3 = f(t + h / 2, y + h / 2 * k2)
    k4, f4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), f1 or f2 or f3 or f4


def integrate_rk4(f: Callable, y0, dt: float, n_steps: int) -> np.ndarray:
    """Fixed-step RK4 for ``y' = f(t, y)``; returns the ``n_steps + 1`` states."""
    ys = np.empty((n_steps + 1, len(y0)))
    ys[0] = y = np.array(y0, dtype=float)
    for k in range(n_steps):
        y, _ = rk4_step(lambda t, v: (f(t, v), False), k * dt, y, dt)
        ys[k + 1] = y
    return ys


def integrate(
    topology: Topology,
    channels: Sequence[EdgeChannel],
    x0,
    cfg: SimConfig | None = None,
    leader_input: Callable[[float, np.ndarray], np.ndarray] | None = None,
) -> SimTrace:
    """Integrate the closed loop over ``[0, cfg.t_end]``, sampled every ``cfg.dt``.

    Funnel exits at sampled states are recorded as :class:`Violation` rather
    than raised. Internal stage states outside a funnel are evaluated clamped
    ``CLAMP_MARGIN`` inside the boundary; for RK4 the affected step indices go to
    ``clamped_steps``.

    ``leader_input(t, x)``, if given, replaces the funnel control on the leaders
    (``cfg.mode`` must then be ``leader_ppc``).
    """
    cfg = cfg or SimConfig()
    dm = derive_matrices(topology)
    if len(channels) != topology.m:
        raise ValueError(f"need {topology.m} channels, got {len(channels)}")
    bank = ChannelBank(channels)
    x = np.array(x0, dtype=float)
    if x.shape != (topology.n,):
        raise ValueError(f"x0 must have length {topology.n}")
    if leader_input is not None and cfg.mode is not Mode.LEADER_PPC:
        raise ValueError("leader_input requires mode leader_ppc")

    xbar0 = dm.D.T @ x
    xh0 = bank.modulated(xbar0, 0.0)
    outside = ~((bank.lo < xh0) & (xh0 < bank.hi))
    if outside.any():
        k = int(np.argmax(outside))
        raise InitialConditionOutsideFunnel(
            f"edge {k}: initial relative state {xbar0[k]} outside its funnel"
        )

    mode = cfg.mode
    steps = cfg.n_steps
    times = cfg.dt * np.arange(steps + 1)
    n_f = topology.n_f

    if leader_input is None:
        def f(t, y):
            dy, _, flag = _rhs(dm, bank, y, t, mode, True)
            return dy, flag

        def inputs(t, y):
            return _rhs(dm, bank, y, t, mode, True)[1]
    else:
        def f(t, y):
            dy = -dm.L @ y
            dy[n_f:] += leader_input(t, y)
            return dy, False

        def inputs(t, y):
            return np.asarray(leader_input(t, y), dtype=float)

    clamped_steps: list[int] = []
    if cfg.method == "rk4":
        xs = np.empty((steps + 1, topology.n))
        xs[0] = x
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(steps):
                x, flagged = rk4_step(f, times[k], x, cfg.dt)
                if not np.all(np.isfinite(x)):
                    raise NumericalBlowup(f"non-finite state at t={times[k + 1]:.6g}")
                if flagged:
                    clamped_steps.append(k + 1)
                xs[k + 1] = x
    else:
        jac = None if leader_input is not None else (lambda t, y: _rhs_jacobian(dm, bank, y, t, mode))
        sol = solve_ivp(
            lambda t, y: f(t, y)[0],
            (0.0, times[-1]),
            x,
            method="Radau",
            t_eval=times,
            jac=jac,
            rtol=cfg.rtol,
            atol=cfg.atol,
        )
        if not sol.success or sol.y.shape[1] != times.size or not np.all(np.isfinite(sol.y)):
            raise NumericalBlowup(f"implicit integration failed: {sol.message}")
        xs = sol.y.T.copy()
        xs[0] = x

    return _build_trace(dm, bank, cfg, times, xs, inputs, clamped_steps)


def _build_trace(dm, bank, cfg, times, xs, inputs, clamped_steps) -> SimTrace:
    mode = cfg.mode
    steps = times.size - 1
    xbars = xs @ dm.D
    rhos = np.stack([bank.rho(t) for t in times])
    n_u = {Mode.NO_CONTROL: 0, Mode.LEADER_PPC: dm.topology.n_l, Mode.ALL_AGENTS_PPC: dm.topology.n}[mode]
    us = np.zeros((steps + 1, n_u))
    V = np.full(steps + 1, np.inf)
    violations: list[Violation] = []
    scale = 1.0 + cfg.violation_margin
    for k, t in enumerate(times):
        xb = xbars[k]
        upper = bank.hi * rhos[k] * scale
        lower = bank.lo * rhos[k] * scale
        for e in np.flatnonzero((xb >= upper) | (xb <= lower)):
            bound = upper[e] if xb[e] >= upper[e] else lower[e]
            violations.append(Violation(float(t), int(e), float(xb[e]), float(bound)))
        if n_u:
            us[k] = inputs(t, xs[k])
        xh = xb / rhos[k]
        if np.all((bank.lo < xh) & (xh < bank.hi)):
            V[k] = lyapunov(bank, cfg.gamma, xb, t)

    tol = cfg.consensus_tol if cfg.consensus_tol is not None else float(bank.rho_inf.min())
    err = np.max(np.abs(xbars), axis=1)
    above = np.flatnonzero(err >= tol)
    converged_at = None
    if above.size == 0:
        converged_at = 0.0
    elif above[-1] < steps:
        converged_at = float(times[above[-1] + 1])

    return SimTrace(
        times=times,
        x=xs,
        xbar=xbars,
        rho=rhos,
        V=V,
        u=us,
        violations=violations,
        converged_at=converged_at,
        clamped_steps=clamped_steps,
    )
