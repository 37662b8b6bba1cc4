"""Finite symbolic models of sampled control systems.

Delay-free construction: states are the logarithmic lattice cells, inputs a
quantized grid, and (cell, input) gets every cell intersecting the box
around the nominal endpoint integrate(q1, u, tau) of radius

    theta1 * e^(L*tau) * (|q1| + E)      theta1 = eta/(1-eta),

componentwise, where E marks zero components of the cell's quantized point
q1.  Zoom-refined subcells use the isotropic radius e^(L*tau) * s, s the
largest componentwise distance from q1 to the subcell faces (the
logarithmic formula has no analogue below the deadzone scale).

Time-delay construction: states are spline tubes, tuples of N+2 knot cells
on [-Theta, 0] sampled at the peaks of linear hat functions.  A tube's
quantized functional is the linear interpolant through the knot quantized
points; the successor test requires, at every knot time, intersection of the
knot cell with the box of radius 2*theta2*e^(L*tau) around the integrated
endpoint, theta2 collecting each knot's zoom width (unrefined knots
contribute their cell half-width).  Tubes are discovered by forward
exploration along nominal successors from psi2(xi0) under a state budget;
pairs whose nominal successor is undiscovered or leaves the state box are
blocked (no successors).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import (ControlSystem, SampledCurve, TimeDelaySystem,
                       DEFAULT_STEPS, estimate_lipschitz, integrate,
                       integrate_delay)
from .quantizers import (Cell, LogQuantizerParams, Partition,
                         ZoomQuantizerParams, log_quantize)


@dataclass(frozen=True)
class GrowthBound:
    radius: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radius, dtype=float)
        if np.any(r < 0):
            raise ValueError("growth radius must be nonnegative")
        object.__setattr__(self, "radius", r)


def growth_bound_delayfree(q1, eta: float, L1: float, tau: float) -> GrowthBound:
    """Box radius theta1*e^(L1 tau)*(|q1|+E), E = 1 on zero components."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0,1)")
    if L1 <= 0 or tau <= 0:
        raise ValueError("L1 and tau must be positive")
    q1 = np.asarray(q1, dtype=float)
    theta1 = eta / (1.0 - eta)
    qbar = np.abs(q1) + (q1 == 0.0).astype(float)
    return GrowthBound(theta1 * math.exp(L1 * tau) * qbar)


@dataclass(frozen=True)
class SplineTube:
    """Functional abstract state: cell ids at the N+2 hat-function knots."""

    knots: Tuple[int, ...]

    @property
    def N(self) -> int:
        return len(self.knots) - 2


@dataclass(eq=False)
class AbstractState:
    """One state of the symbolic model: a cell, or a tube over cells."""

    id: int
    cell: Optional[Cell] = None
    tube: Optional[SplineTube] = None


@dataclass
class _BuildContext:
    """Everything needed to recompute a transition's growth box later."""

    sys: object
    tau: float
    lipschitz: Union[str, float]
    steps: int
    growth_scale: float
    L_default: Optional[float] = None
    knot_thetas: Optional[List[float]] = None
    L2: Optional[float] = None


class TransitionSystem:
    """Finite transition system with identity output map.

    transitions maps (state id, input id) to a sorted tuple of successor
    state ids; a missing key is a blocked pair.  Construction is
    deterministic: same configuration, same serialized bytes.
    """

    def __init__(self, kind: str, states: List[AbstractState],
                 inputs: List[np.ndarray],
                 transitions: Dict[Tuple[int, int], Tuple[int, ...]],
                 initial: List[int],
                 partition: Optional[Partition] = None,
                 ctx: Optional[_BuildContext] = None):
        self.kind = kind
        self.states = states
        self.inputs = [np.atleast_1d(np.asarray(u, dtype=float)) for u in inputs]
        self.transitions = transitions
        self.initial = list(initial)
        self.partition = partition
        self._ctx = ctx
        self._by_id = {s.id: s for s in states}

    def state(self, sid: int) -> AbstractState:
        return self._by_id[sid]

    def state_ids(self) -> List[int]:
        return [s.id for s in self.states]

    def successors(self, sid: int, iid: int) -> Tuple[int, ...]:
        return self.transitions.get((sid, iid), ())

    def enabled(self, sid: int) -> List[int]:
        return [i for i in range(len(self.inputs)) if (sid, i) in self.transitions]

    @property
    def n_transitions(self) -> int:
        return sum(len(v) for v in self.transitions.values())

    def input_id_of(self, u) -> Optional[int]:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        for i, v in enumerate(self.inputs):
            if v.shape == u.shape and np.all(np.abs(v - u) <= 1e-9):
                return i
        return None


# ---------------------------------------------------------------------------
# input lattices


def uniform_input_lattice(lo, hi, mu: float) -> List[np.ndarray]:
    """Integer multiples of mu inside the closed input box, ascending."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if mu <= 0:
        raise ValueError("input grid spacing must be positive")
    axes = []
    for j in range(len(lo)):
        k_lo = int(math.ceil(lo[j] / mu - 1e-9))
        k_hi = int(math.floor(hi[j] / mu + 1e-9))
        axes.append([k * mu for k in range(k_lo, k_hi + 1)])
        if not axes[-1]:
            raise ValueError(f"input axis {j + 1} contains no multiple of {mu}")
    out = []
    for idx in np.ndindex(*[len(a) for a in axes]):
        out.append(np.array([axes[j][idx[j]] for j in range(len(lo))]))
    return out


def log_input_lattice(lo, hi, p: LogQuantizerParams) -> List[np.ndarray]:
    """Logarithmic quantizer levels (including 0) inside the input box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = []
    for j in range(len(lo)):
        vals = {0.0} if lo[j] <= 0.0 <= hi[j] else set()
        level = p.first_level
        while level <= max(abs(lo[j]), abs(hi[j])):
            if lo[j] <= level <= hi[j]:
                vals.add(level)
            if lo[j] <= -level <= hi[j]:
                vals.add(-level)
            level *= (1.0 + p.eta) / (1.0 - p.eta)
        if not vals:
            raise ValueError(f"input axis {j + 1} contains no quantizer level")
        axes.append(sorted(vals))
    out = []
    for idx in np.ndindex(*[len(a) for a in axes]):
        out.append(np.array([axes[j][idx[j]] for j in range(len(lo))]))
    return out


# ---------------------------------------------------------------------------
# delay-free model


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SYMQUANT_WORKERS", "1")))
    except ValueError:
        return 1


def _cell_radius(part: Partition, cell: Cell, eta: float, L: float,
                 tau: float, scale: float) -> np.ndarray:
    """Growth radius for one source cell (log formula or subcell spread)."""
    if part.zoom_params_of(cell.id) is not None:
        s = float(np.max(cell.spread()))
        r = np.full(len(cell.lower), math.exp(L * tau) * s)
    else:
        r = growth_bound_delayfree(cell.quantized_point, eta, L, tau).radius
    return scale * r


def build_delayfree(sys: ControlSystem, tau: float,
                    log_params: Union[LogQuantizerParams, Sequence[LogQuantizerParams]],
                    input_quantization=("uniform", 0.2),
                    lipschitz: Union[str, float] = "sampled-jacobian",
                    steps: int = DEFAULT_STEPS,
                    growth_scale: float = 1.0,
                    partition: Optional[Partition] = None) -> TransitionSystem:
    """Symbolic model of a delay-free system on the logarithmic lattice.

    input_quantization is ('uniform', mu) or ('log', LogQuantizerParams).
    growth_scale multiplies every growth radius (1.0 normally; 0 builds a
    deliberately unsound model for negative-control testing).  A
    pre-refined partition may be supplied; otherwise the plain lattice of
    log_params is used.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    part = partition if partition is not None else \
        Partition(sys.state_lo, sys.state_hi, log_params)
    kind, spec = input_quantization
    if kind == "uniform":
        inputs = uniform_input_lattice(sys.input_lo, sys.input_hi, spec)
    elif kind == "log":
        inputs = log_input_lattice(sys.input_lo, sys.input_hi, spec)
    else:
        raise ValueError(f"unknown input quantization {kind!r}")

    eta = part.params[0].eta
    cells = part.cells
    if not cells:
        raise ValueError("empty state lattice")

    def eval_cell(cell: Cell):
        L = estimate_lipschitz(sys, cell, lipschitz)
        radius = _cell_radius(part, cell, eta, L, tau, growth_scale)
        rows = {}
        for iid, u in enumerate(inputs):
            x1 = integrate(sys, cell.quantized_point, u, tau, steps)
            if np.any(x1 < sys.state_lo) or np.any(x1 > sys.state_hi):
                continue  # nominal endpoint leaves X: blocked pair
            succ = part.intersecting(x1 - radius, x1 + radius)
            rows[(cell.id, iid)] = tuple(succ)
        return rows

    workers = _workers()
    transitions: Dict[Tuple[int, int], Tuple[int, ...]] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for rows in ex.map(eval_cell, cells):
                transitions.update(rows)
    else:
        for cell in cells:
            transitions.update(eval_cell(cell))

    states = [AbstractState(c.id, cell=c) for c in cells]
    ctx = _BuildContext(sys=sys, tau=tau, lipschitz=lipschitz, steps=steps,
                        growth_scale=growth_scale)
    return TransitionSystem("delayfree", states, inputs, transitions,
                            initial=[c.id for c in cells], partition=part, ctx=ctx)


def refine_cells(ts: TransitionSystem,
                 assignments: Dict[int, ZoomQuantizerParams]) -> TransitionSystem:
    """Zoom-refine cells of a delay-free model; ids of kept cells are stable.

    Transitions are recomputed only for refined source cells (replaced by
    their subcells) and for pairs whose successor set touched a refined
    cell; everything else is carried over unchanged.
    """
    if ts.kind != "delayfree":
        raise ValueError("refine_cells applies to delay-free models")
    if ts._ctx is None or ts.partition is None:
        raise ValueError("model carries no build context; rebuild from config")
    if not assignments:
        return ts
    part = ts.partition.refined(assignments)
    ctx = ts._ctx
    sys = ctx.sys
    eta = part.params[0].eta
    refined_ids = set(assignments)

    transitions: Dict[Tuple[int, int], Tuple[int, ...]] = {}
    for (sid, iid), succ in ts.transitions.items():
        if sid in refined_ids:
            continue
        if any(s in refined_ids for s in succ):
            continue
        transitions[(sid, iid)] = succ

    redo_cells = [c for c in part.cells if c.id not in ts._by_id]
    redo_pairs = [(sid, iid) for (sid, iid), succ in ts.transitions.items()
                  if sid not in refined_ids and any(s in refined_ids for s in succ)]

    for cell in redo_cells:
        L = estimate_lipschitz(sys, cell, ctx.lipschitz)
        radius = _cell_radius(part, cell, eta, L, ctx.tau, ctx.growth_scale)
        for iid, u in enumerate(ts.inputs):
            x1 = integrate(sys, cell.quantized_point, u, ctx.tau, ctx.steps)
            if np.any(x1 < sys.state_lo) or np.any(x1 > sys.state_hi):
                continue
            transitions[(cell.id, iid)] = tuple(part.intersecting(x1 - radius, x1 + radius))

    for sid, iid in redo_pairs:
        cell = part.cell(sid)
        L = estimate_lipschitz(sys, cell, ctx.lipschitz)
        radius = _cell_radius(part, cell, eta, L, ctx.tau, ctx.growth_scale)
        x1 = integrate(sys, cell.quantized_point, ts.inputs[iid], ctx.tau, ctx.steps)
        transitions[(sid, iid)] = tuple(part.intersecting(x1 - radius, x1 + radius))

    states = [AbstractState(c.id, cell=c) for c in part.cells]
    return TransitionSystem("delayfree", states, ts.inputs, transitions,
                            initial=[c.id for c in part.cells],
                            partition=part, ctx=ctx)


# ---------------------------------------------------------------------------
# splines and tubes


def spline_basis(N: int, a: float, b: float):
    """The N+2 linear hat functions on [a, b], peaking at a+j*h, h=(b-a)/(N+1)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if not a < b:
        raise ValueError("need a < b")
    h = (b - a) / (N + 1)

    def make(j: int):
        peak = a + j * h
        return lambda t: max(0.0, 1.0 - abs(t - peak) / h)

    return [make(j) for j in range(N + 2)]


def knot_times(N: int, a: float, b: float) -> List[float]:
    if a == b:
        return [a] * (N + 2)
    h = (b - a) / (N + 1)
    return [a + j * h for j in range(N + 2)]


def psi2(curve: SampledCurve, partition: Partition, N: int) -> SplineTube:
    """Abstract a functional: locate the curve at the N+2 knot times."""
    times = knot_times(N, curve.t0, curve.t1)
    return SplineTube(tuple(partition.locate(curve(t)) for t in times))


def tube_interpolant(tube: SplineTube, partition: Partition,
                     Theta: float) -> SampledCurve:
    """The quantized functional of a tube: linear through knot quantized points."""
    pts = np.array([partition.cell(k).quantized_point for k in tube.knots])
    if Theta == 0.0:
        return SampledCurve(0.0, 0.0, pts[-1][None, :])
    return SampledCurve(-Theta, 0.0, pts)


def _tube_theta2(tube: SplineTube, partition: Partition) -> float:
    """max over knots of the zoom width, cell half-width where unrefined."""
    worst = 0.0
    for k in tube.knots:
        zp = partition.zoom_params_of(k)
        contrib = zp.width if zp is not None else partition.cell(k).half_width
        worst = max(worst, contrib)
    return worst


def build_timedelay(sys: TimeDelaySystem, tau: float,
                    log_params: Union[LogQuantizerParams, Sequence[LogQuantizerParams]],
                    zoom_assignments: Optional[Dict[int, ZoomQuantizerParams]] = None,
                    N: int = 0,
                    input_quantization=("uniform", 0.2),
                    lipschitz: Union[str, float] = "sampled-jacobian",
                    steps: int = DEFAULT_STEPS,
                    growth_scale: float = 1.0,
                    budget: int = 1000,
                    on_budget: str = "truncate") -> TransitionSystem:
    """Symbolic model of a time-delay system over spline tubes.

    States are discovered breadth-first from psi2(xi0) following nominal
    successors only, up to `budget` tubes; materialized successor sets are
    the discovered tubes passing the knot-wise growth-box test.  On budget
    exhaustion, on_budget='truncate' blocks the frontier pairs whose nominal
    successor was never discovered (ts.truncated is set); 'error' raises.
    """
    if sys.xi0 is None:
        raise ValueError("time-delay build needs the initial functional xi0")
    if tau <= 0:
        raise ValueError("tau must be positive")
    base = Partition(sys.state_lo, sys.state_hi, log_params)
    part = base.refined(zoom_assignments) if zoom_assignments else base
    kind, spec = input_quantization
    if kind == "uniform":
        inputs = uniform_input_lattice(sys.input_lo, sys.input_hi, spec)
    elif kind == "log":
        inputs = log_input_lattice(sys.input_lo, sys.input_hi, spec)
    else:
        raise ValueError(f"unknown input quantization {kind!r}")

    thetas = knot_times(N, -sys.Theta, 0.0)
    periods = sys.input_delay_periods(tau)
    if isinstance(lipschitz, (int, float)):
        L2 = float(lipschitz)
    else:
        whole = Cell(-1, sys.state_lo.copy(), sys.state_hi.copy(),
                     0.5 * (sys.state_lo + sys.state_hi))
        L2 = estimate_lipschitz(sys, whole, lipschitz)
    amp = 2.0 * math.exp(L2 * tau) * growth_scale

    init = psi2(sys.xi0, part, N)
    order: List[SplineTube] = [init]
    ids: Dict[SplineTube, int] = {init: 0}
    # kernel[(tid, iid)] = (nominal knot points, radius); blocked pairs absent
    kernel: Dict[Tuple[int, int], Tuple[np.ndarray, float]] = {}
    nominal: Dict[Tuple[int, int], SplineTube] = {}
    truncated = False

    head = 0
    while head < len(order):
        tube = order[head]
        tid = head
        head += 1
        hist = tube_interpolant(tube, part, sys.Theta)
        radius = _tube_theta2(tube, part) * amp
        for iid, u in enumerate(inputs):
            xtau = integrate_delay(sys, hist, [u] * periods, u, tau, steps)
            pts = np.array([xtau(th) for th in thetas])
            if np.any(pts < sys.state_lo) or np.any(pts > sys.state_hi):
                continue  # a nominal knot leaves X: blocked pair
            succ = SplineTube(tuple(part.locate(p) for p in pts))
            kernel[(tid, iid)] = (pts, radius)
            nominal[(tid, iid)] = succ
            if succ not in ids:
                if len(order) >= budget:
                    if on_budget == "error":
                        raise RuntimeError(
                            f"tube exploration exceeded the budget of {budget} states")
                    truncated = True
                    continue
                ids[succ] = len(order)
                order.append(succ)

    # index tubes by (knot slot, cell id) for successor matching
    n_knots = len(thetas)
    by_knot: List[Dict[int, set]] = [{} for _ in range(n_knots)]
    for t, tid in ids.items():
        for j, c in enumerate(t.knots):
            by_knot[j].setdefault(c, set()).add(tid)

    transitions: Dict[Tuple[int, int], Tuple[int, ...]] = {}
    for (tid, iid), (pts, radius) in kernel.items():
        if nominal[(tid, iid)] not in ids:
            continue  # nominal successor lost to truncation: blocked
        matched: Optional[set] = None
        for j in range(n_knots):
            cj = part.intersecting(pts[j] - radius, pts[j] + radius)
            hits: set = set()
            for c in cj:
                hits |= by_knot[j].get(c, set())
            matched = hits if matched is None else (matched & hits)
            if not matched:
                break
        if matched:
            transitions[(tid, iid)] = tuple(sorted(matched))

    states = [AbstractState(ids[t], tube=t) for t in order]
    ctx = _BuildContext(sys=sys, tau=tau, lipschitz=lipschitz, steps=steps,
                        growth_scale=growth_scale, knot_thetas=thetas, L2=L2)
    ts = TransitionSystem("timedelay", states, inputs, transitions,
                          initial=[0], partition=part, ctx=ctx)
    ts.truncated = truncated
    return ts
