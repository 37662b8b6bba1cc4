"""Closed-loop simulation of the concrete plant under the refined controller.

The loop is sample, quantize, look up, hold: at every multiple of the
sampling period the state (or functional state) is located in the abstract
partition, the current phase's table supplies the input, and the plant runs
one period under that constant input.  The phase advances when the located
abstract state enters the current waypoint set (one advance per sampling
instant); completion means all phases have advanced.  Time-delay runs keep
an input buffer primed with zeros, so the controller gains authority only
r seconds after the start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .abstraction import TransitionSystem
from .dynamics import (ControlSystem, SampledCurve, TimeDelaySystem,
                       DEFAULT_STEPS, integrate, integrate_delay)
from .frr import RefinementMap
from .synthesis import Controller


@dataclass
class TrajectorySample:
    t: float
    x: np.ndarray
    u: np.ndarray
    input_id: int  # -1 on the terminal row (no input applied)
    phase: int
    cell_id: int


@dataclass
class Trajectory:
    samples: List[TrajectorySample]

    def __len__(self):
        return len(self.samples)


@dataclass
class CompletionReport:
    completed: bool
    steps: int
    time: float
    phase_reached: int
    n_phases: int
    reason: str

    def as_text(self) -> str:
        status = "completed" if self.completed else "incomplete"
        return (f"run {status}: phases {self.phase_reached}/{self.n_phases}, "
                f"steps {self.steps}, time {self.time:.9g} s ({self.reason})")


def _advance_phase(controller: Controller, phase: int, cid: int) -> int:
    if phase < controller.n_phases and cid in controller.waypoints[phase]:
        return phase + 1
    return phase


def run_closed_loop(sys, controller: Controller, F: RefinementMap,
                    x0=None, xi0: Optional[SampledCurve] = None,
                    tau: float = 0.2, max_steps: int = 500,
                    steps: int = DEFAULT_STEPS) -> Tuple[Trajectory, CompletionReport]:
    """Simulate until the waypoint sequence completes or max_steps elapse.

    Exactly one of x0 (delay-free) and xi0 (functional initial state) must
    be given.  The terminal row of the trajectory carries a zero input and
    input_id -1.
    """
    if (x0 is None) == (xi0 is None):
        raise ValueError("give exactly one of x0 and xi0")
    if x0 is not None:
        return _run_delayfree(sys, controller, F, np.asarray(x0, dtype=float),
                              tau, max_steps, steps)
    return _run_timedelay(sys, controller, F, xi0, tau, max_steps, steps)


def _report(completed, k, tau, phase, n_phases, reason):
    return CompletionReport(completed, k, k * tau, phase, n_phases, reason)


def _run_delayfree(sys: ControlSystem, controller, F, x0, tau, max_steps, steps):
    m = sys.m
    rows: List[TrajectorySample] = []
    x = x0
    phase = 0
    for k in range(max_steps + 1):
        t = k * tau
        if np.any(x < sys.state_lo) or np.any(x > sys.state_hi):
            return Trajectory(rows), _report(
                False, k, tau, phase, controller.n_phases,
                f"state {x.tolist()} left the state box at t={t:.9g}")
        cid = F.locate(x)
        phase = _advance_phase(controller, phase, cid)
        if phase == controller.n_phases:
            rows.append(TrajectorySample(t, x, np.zeros(m), -1, phase, cid))
            return Trajectory(rows), _report(
                True, k, tau, phase, controller.n_phases,
                "all waypoints visited")
        iid = controller.input_at(phase, cid)
        if iid is None:
            rows.append(TrajectorySample(t, x, np.zeros(m), -1, phase, cid))
            reason = (f"abstract state {cid} has no assignment in phase {phase}"
                      if k else
                      f"initial state lies outside the phase-0 winning domain "
                      f"(abstract state {cid})")
            return Trajectory(rows), _report(
                False, k, tau, phase, controller.n_phases, reason)
        u = controller.inputs[iid]
        rows.append(TrajectorySample(t, x, u, iid, phase, cid))
        x = integrate(sys, x, u, tau, steps)
    return Trajectory(rows), _report(
        False, max_steps, tau, phase, controller.n_phases,
        f"max_steps={max_steps} reached")


def _run_timedelay(sys: TimeDelaySystem, controller, F, xi0, tau, max_steps, steps):
    m = sys.m
    periods = sys.input_delay_periods(tau)
    buffer: List[np.ndarray] = [np.zeros(m)] * periods
    hist = xi0
    rows: List[TrajectorySample] = []
    phase = 0
    for k in range(max_steps + 1):
        t = k * tau
        x_now = hist(hist.t1)
        tid = F.tube_of(hist)
        if tid is None:
            return Trajectory(rows), _report(
                False, k, tau, phase, controller.n_phases,
                f"functional state maps to no abstract state at t={t:.9g}")
        phase = _advance_phase(controller, phase, tid)
        if phase == controller.n_phases:
            rows.append(TrajectorySample(t, x_now, np.zeros(m), -1, phase, tid))
            return Trajectory(rows), _report(
                True, k, tau, phase, controller.n_phases, "all waypoints visited")
        iid = controller.input_at(phase, tid)
        if iid is None:
            rows.append(TrajectorySample(t, x_now, np.zeros(m), -1, phase, tid))
            reason = (f"abstract state {tid} has no assignment in phase {phase}"
                      if k else
                      f"initial functional lies outside the phase-0 winning "
                      f"domain (abstract state {tid})")
            return Trajectory(rows), _report(
                False, k, tau, phase, controller.n_phases, reason)
        u = controller.inputs[iid]
        rows.append(TrajectorySample(t, x_now, u, iid, phase, tid))
        hist = integrate_delay(sys, hist, buffer, u, tau, steps)
        if periods:
            buffer = buffer[1:] + [u]
    return Trajectory(rows), _report(
        False, max_steps, tau, phase, controller.n_phases,
        f"max_steps={max_steps} reached")


def validate_path(ts: TransitionSystem, traj: Trajectory) -> Optional[int]:
    """Index of the first sample whose recorded step is not a transition of
    ts, or None when the whole cell sequence is an abstract run."""
    for i in range(len(traj.samples) - 1):
        a, b = traj.samples[i], traj.samples[i + 1]
        if a.input_id < 0:
            continue
        if b.cell_id not in ts.successors(a.cell_id, a.input_id):
            return i
    return None


def export_trajectory(traj: Trajectory, path: str) -> None:
    """CSV with columns t, x1..xn, u1..um, phase, cell_id at 9 significant digits."""
    if traj.samples:
        n = len(traj.samples[0].x)
        m = len(traj.samples[0].u)
    else:
        n = m = 0
    cols = (["t"] + [f"x{i + 1}" for i in range(n)]
            + [f"u{j + 1}" for j in range(m)] + ["phase", "cell_id"])
    lines = [",".join(cols)]
    for s in traj.samples:
        vals = [s.t] + [v + 0.0 for v in s.x] + [v + 0.0 for v in s.u]
        lines.append(",".join(f"{v:.9g}" for v in vals)
                     + f",{s.phase},{s.cell_id}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
