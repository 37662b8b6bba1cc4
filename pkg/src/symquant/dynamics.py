"""Concrete plant models and fixed-step integrators.

Delay-free systems are integrated with classical RK4 under a constant input.
Time-delay systems use the method of steps: the substep is capped at the
smallest positive delay so every delayed argument falls in the already
computed part of the trajectory, which is stored on a fine uniform grid and
linearly interpolated.  Input delays are restricted to integer multiples of
the sampling period, so the delayed input is a buffered previous sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .expr import Expression, parse, validate


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampledCurve:
    """A curve on [t0, t1] sampled on a uniform grid, linearly interpolated."""

    t0: float
    t1: float
    values: np.ndarray  # shape (k+1, n); single row means a constant point

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("values must be a (k+1, n) array")
        object.__setattr__(self, "values", v)
        if self.t1 < self.t0:
            raise ValueError(f"t1 < t0: [{self.t0}, {self.t1}]")
        if self.t1 == self.t0 and v.shape[0] != 1:
            raise ValueError("degenerate interval needs exactly one sample")

    @property
    def spacing(self) -> float:
        k = self.values.shape[0] - 1
        return (self.t1 - self.t0) / k if k else 0.0

    def __call__(self, t: float) -> np.ndarray:
        if self.values.shape[0] == 1:
            return self.values[0]
        s = (t - self.t0) / self.spacing
        s = min(max(s, 0.0), float(self.values.shape[0] - 1))
        i = int(s)
        if i >= self.values.shape[0] - 1:
            return self.values[-1]
        frac = s - i
        return (1.0 - frac) * self.values[i] + frac * self.values[i + 1]

    @staticmethod
    def constant(t0: float, t1: float, x, k: int = 1) -> "SampledCurve":
        x = np.asarray(x, dtype=float)
        if t1 == t0:
            return SampledCurve(t0, t1, x[None, :])
        return SampledCurve(t0, t1, np.tile(x, (k + 1, 1)))


def _validate_rhs(f: Sequence[Expression], n: int, m: int, max_theta: float) -> None:
    if len(f) != n:
        raise ValueError(f"need {n} right-hand sides, got {len(f)}")
    for i, e in enumerate(f):
        try:
            validate(e, n, m, max_theta)
        except ValueError as err:
            raise ValueError(f"rhs[{i}]: {err}") from err


@dataclass(frozen=True)
class ControlSystem:
    """Delay-free plant: dims, state/input boxes, and n rhs expressions."""

    n: int
    m: int
    state_lo: np.ndarray
    state_hi: np.ndarray
    input_lo: np.ndarray
    input_hi: np.ndarray
    f: Tuple[Expression, ...]

    def __post_init__(self):
        for name in ("state_lo", "state_hi", "input_lo", "input_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.state_lo) != self.n or len(self.state_hi) != self.n:
            raise ValueError("state box dimension mismatch")
        if len(self.input_lo) != self.m or len(self.input_hi) != self.m:
            raise ValueError("input box dimension mismatch")
        if not np.all(self.state_lo < self.state_hi):
            raise ValueError("state box must have nonempty interior")
        if not np.all(self.input_lo <= self.input_hi):
            raise ValueError("input box empty")
        object.__setattr__(self, "f", tuple(self.f))
        _validate_rhs(self.f, self.n, self.m, max_theta=0.0)

    @staticmethod
    def from_strings(rhs: Sequence[str], state_lo, state_hi, input_lo, input_hi) -> "ControlSystem":
        f = tuple(parse(s) for s in rhs)
        return ControlSystem(len(f), len(np.atleast_1d(input_lo)),
                             state_lo, state_hi,
                             np.atleast_1d(input_lo), np.atleast_1d(input_hi), f)


@dataclass(frozen=True)
class TimeDelaySystem:
    """Time-delay plant: rhs may contain delay(xi, theta) terms with theta <= Theta.

    r is the input delay; it must be an integer multiple of the sampling
    period so the delayed input is a buffered sample (checked at use sites).
    xi0 is the initial functional on [-Theta, 0].
    """

    n: int
    m: int
    state_lo: np.ndarray
    state_hi: np.ndarray
    input_lo: np.ndarray
    input_hi: np.ndarray
    f: Tuple[Expression, ...]
    Theta: float
    r: float
    xi0: Optional[SampledCurve] = None

    def __post_init__(self):
        for name in ("state_lo", "state_hi", "input_lo", "input_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.Theta < 0 or self.r < 0:
            raise ValueError("Theta and r must be nonnegative")
        object.__setattr__(self, "f", tuple(self.f))
        _validate_rhs(self.f, self.n, self.m, max_theta=self.Theta)
        if self.xi0 is not None:
            if not np.all(self.xi0.values >= self.state_lo - 1e-12) or \
               not np.all(self.xi0.values <= self.state_hi + 1e-12):
                raise ValueError("xi0 leaves the state box")

    @staticmethod
    def from_strings(rhs: Sequence[str], state_lo, state_hi, input_lo, input_hi,
                     Theta: float, r: float = 0.0,
                     xi0: Optional[SampledCurve] = None) -> "TimeDelaySystem":
        f = tuple(parse(s) for s in rhs)
        return TimeDelaySystem(len(f), len(np.atleast_1d(input_lo)),
                               state_lo, state_hi,
                               np.atleast_1d(input_lo), np.atleast_1d(input_hi),
                               f, Theta, r, xi0)

    def min_positive_delay(self) -> float:
        thetas = [th for e in self.f for (_, th) in e.delays() if th > 0.0]
        return min(thetas) if thetas else math.inf

    def input_delay_periods(self, tau: float) -> int:
        """r as an integer number of sampling periods; raises if not integral."""
        k = self.r / tau
        ki = int(round(k))
        if abs(k - ki) > 1e-9:
            raise ValueError(f"input delay r={self.r} is not an integer multiple of tau={tau}")
        return ki


# ---------------------------------------------------------------------------
# delay-free RK4

DEFAULT_STEPS = 20


def integrate(sys: ControlSystem, x0, u, tau: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Endpoint of the trajectory from x0 under constant input u over tau.

    Fixed-step classical RK4 with step tau/steps.  The trajectory is not
    confined to the state box; callers decide what leaving it means.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    fns = [e.fn for e in sys.f]
    u = [float(v) for v in np.atleast_1d(u)]
    x = [float(v) for v in np.atleast_1d(x0)]
    h = tau / steps
    n = len(x)
    for k in range(steps):
        try:
            k1 = [fn(x, u, None) for fn in fns]
            x2 = [x[i] + 0.5 * h * k1[i] for i in range(n)]
            k2 = [fn(x2, u, None) for fn in fns]
            x3 = [x[i] + 0.5 * h * k2[i] for i in range(n)]
            k3 = [fn(x3, u, None) for fn in fns]
            x4 = [x[i] + h * k3[i] for i in range(n)]
            k4 = [fn(x4, u, None) for fn in fns]
        except (OverflowError, ValueError) as err:
            raise IntegrationError(
                f"derivative evaluation failed at t={k * h:.6g}: {err}") from err
        x = [x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
             for i in range(n)]
        if not all(math.isfinite(v) for v in x):
            raise IntegrationError(
                f"non-finite state at t={(k + 1) * h:.6g} from x0={list(np.atleast_1d(x0))}, u={u}")
    return np.array(x)


# ---------------------------------------------------------------------------
# method of steps for time-delay systems


def integrate_delay(sys: TimeDelaySystem, history: SampledCurve,
                    u_past: Sequence, u_now, tau: float,
                    steps: int = DEFAULT_STEPS) -> SampledCurve:
    """Advance the functional state one sampling period.

    history is x on [-Theta, 0] on a uniform grid whose spacing divides both
    Theta and tau.  u_past buffers the inputs of the last r/tau periods
    (oldest first); the input active on [0, tau] is u_past[0] when r > 0 and
    u_now when r = 0.  Returns x(tau + theta) for theta in [-Theta, 0] on the
    same grid.
    """
    if abs(history.t0 - (-sys.Theta)) > 1e-9 or abs(history.t1) > 1e-9:
        raise ValueError(f"history must cover [-Theta, 0], got [{history.t0}, {history.t1}]")
    periods = sys.input_delay_periods(tau)
    if periods > 0:
        if len(u_past) < periods:
            raise ValueError(f"need {periods} buffered inputs for r={sys.r}, got {len(u_past)}")
        u_eff = u_past[0]
    else:
        u_eff = u_now
    u_eff = [float(v) for v in np.atleast_1d(u_eff)]

    n_hist = history.values.shape[0] - 1  # grid intervals over [-Theta, 0]
    if sys.Theta > 0.0:
        h_hist = sys.Theta / max(n_hist, 1)
        per = tau / h_hist
        if abs(per - round(per)) > 1e-9:
            raise ValueError(
                f"history spacing {h_hist:.6g} does not divide tau={tau}")
        n_tau_coarse = int(round(per))
    else:
        h_hist = tau
        n_tau_coarse = 1

    # fine substep: at most tau/steps, at most the smallest positive delay,
    # and an integer fraction of the history spacing
    h_des = min(tau / steps, sys.min_positive_delay())
    m_sub = max(1, int(math.ceil(h_hist / h_des - 1e-12)))
    h = h_hist / m_sub
    fns = [e.fn for e in sys.f]
    n = sys.n

    # trajectory samples on the fine grid from -Theta to tau, filled as we go
    n_past = n_hist * m_sub
    n_fwd = n_tau_coarse * m_sub
    traj = np.empty((n_past + n_fwd + 1, n))
    for j in range(n_past + 1):
        traj[j] = history(-sys.Theta + j * h)

    def sample(t: float) -> np.ndarray:
        s = (t + sys.Theta) / h
        i = int(s)
        if i >= n_past + n_fwd:
            return traj[n_past + n_fwd]
        if i < 0:
            return traj[0]
        frac = s - i
        if frac == 0.0:
            return traj[i]
        return (1.0 - frac) * traj[i] + frac * traj[i + 1]

    def stage(t: float, x: List[float]) -> List[float]:
        def hist(theta: float):
            if theta == 0.0:
                return x
            return sample(t - theta)
        return [fn(x, u_eff, hist) for fn in fns]

    x = [float(v) for v in traj[n_past]]
    for k in range(n_fwd):
        t = k * h
        try:
            k1 = stage(t, x)
            k2 = stage(t + 0.5 * h, [x[i] + 0.5 * h * k1[i] for i in range(n)])
            k3 = stage(t + 0.5 * h, [x[i] + 0.5 * h * k2[i] for i in range(n)])
            k4 = stage(t + h, [x[i] + h * k3[i] for i in range(n)])
        except (OverflowError, ValueError) as err:
            raise IntegrationError(
                f"derivative evaluation failed at t={t:.6g}: {err}") from err
        x = [x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
             for i in range(n)]
        if not all(math.isfinite(v) for v in x):
            raise IntegrationError(f"non-finite state at t={t + h:.6g}")
        traj[n_past + k + 1] = x

    if sys.Theta == 0.0:
        return SampledCurve(0.0, 0.0, traj[-1][None, :])
    last = n_past + n_fwd
    out = traj[last - n_hist * m_sub:last + 1:m_sub]
    return SampledCurve(-sys.Theta, 0.0, out.copy())


# ---------------------------------------------------------------------------
# Lipschitz estimation

SAFETY = 1.1
_FD_EPS = 1e-6


def _axis_samples(lo: float, hi: float) -> List[float]:
    return [lo, 0.5 * (lo + hi), hi]


def estimate_lipschitz(sys: Union[ControlSystem, TimeDelaySystem], cell,
                       mode: Union[str, float] = "sampled-jacobian") -> float:
    """Lipschitz constant of f in the state over one cell.

    mode 'sampled-jacobian': max infinity-norm of the Jacobian over the
    3^n grid of cell corners and midpoints (crossed with the input box grid),
    central finite differences, times a 1.1 safety factor.  Delayed arguments
    count as independent columns, so the estimate bounds the increment with
    respect to the supremum norm of the functional.  A numeric mode is
    returned verbatim (user-supplied constant).
    """
    if isinstance(mode, (int, float)):
        return float(mode)
    if mode != "sampled-jacobian":
        raise ValueError(f"unknown mode {mode!r}")

    fns = [e.fn for e in sys.f]
    delay_cols = sorted({(i - 1, th) for e in sys.f for (i, th) in e.delays()})
    n, m = sys.n, sys.m

    grids_x = [_axis_samples(float(cell.lower[i]), float(cell.upper[i])) for i in range(n)]
    grids_u = [_axis_samples(float(sys.input_lo[j]), float(sys.input_hi[j])) for j in range(m)]

    def f_at(x: List[float], u: List[float], bumps: dict, base=None) -> List[float]:
        # bumps: (coord, theta) -> offset on that delayed argument; delayed
        # arguments are evaluated at `base` (the unperturbed point) so state
        # and delay columns stay independent
        anchor = x if base is None else base

        def hist(theta: float):
            if not bumps:
                return anchor
            out = list(anchor)
            for (i, th), off in bumps.items():
                if th == theta:
                    out[i] = out[i] + off
            return out
        vals = [fn(x, u, hist if delay_cols else None) for fn in fns]
        if not all(math.isfinite(v) for v in vals):
            raise IntegrationError(f"non-finite derivative sample at x={x}, u={u}")
        return vals

    best = 0.0
    for xi in np.ndindex(*[3] * n):
        x = [grids_x[i][xi[i]] for i in range(n)]
        for uj in np.ndindex(*[3] * m):
            u = [grids_u[j][uj[j]] for j in range(m)]
            rows = [0.0] * n
            for i in range(n):
                eps = _FD_EPS * max(1.0, abs(x[i]))
                xp = list(x); xp[i] += eps
                xm = list(x); xm[i] -= eps
                fp = f_at(xp, u, {}, base=x)
                fm = f_at(xm, u, {}, base=x)
                for j in range(n):
                    rows[j] += abs(fp[j] - fm[j]) / (2 * eps)
            for col in delay_cols:
                i = col[0]
                eps = _FD_EPS * max(1.0, abs(x[i]))
                fp = f_at(x, u, {col: +eps})
                fm = f_at(x, u, {col: -eps})
                for j in range(n):
                    rows[j] += abs(fp[j] - fm[j]) / (2 * eps)
            best = max(best, max(rows))
    return best * SAFETY
