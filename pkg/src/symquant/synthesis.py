"""Controller synthesis on the finite abstraction.

Two reach semantics are offered.  Mode 'robust' is the classical fixed
point on the nondeterministic model: a state wins when some input forces
every abstract successor into the current winning set; only this mode turns
the refinement relation into an unconditional concrete guarantee.  On
coarse logarithmic lattices it is typically empty for single-cell targets,
because every growth box spans several cells.  Mode 'hold' searches, per
state, for one input that, held constant over consecutive sampling periods,
drives the nominal trajectory of the cell's quantized point into the target
within a step cap; that matches controllers that hold one input per leg
for several periods, and the closed loop re-evaluates the table at every
sample, so deviations from the nominal path are corrected by feedback
rather than guarded a priori.

Waypoint sequences chain per-phase reach tables; the phase advances when
the trajectory's abstract state enters the current waypoint set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .abstraction import TransitionSystem
from .dynamics import integrate
from .frr import RefinementMap


class SynthesisError(ValueError):
    pass


@dataclass
class Specification:
    kind: str  # 'reach' or 'sequence'
    targets: List[Tuple[int, ...]]  # one set for reach, one per waypoint
    step_bound: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("reach", "sequence"):
            raise ValueError(f"unknown specification kind {self.kind!r}")
        if not self.targets or any(not t for t in self.targets):
            raise ValueError("targets must be nonempty")
        self.targets = [tuple(sorted(set(t))) for t in self.targets]


@dataclass
class Controller:
    """Phase-indexed input table with per-phase winning domains."""

    phases: List[Dict[int, int]]  # state id -> input id
    waypoints: List[Tuple[int, ...]]
    winning: List[Dict[int, int]]  # state id -> recorded step bound
    inputs: List[np.ndarray]
    mode: str

    def input_at(self, phase: int, sid: int) -> Optional[int]:
        return self.phases[phase].get(sid)

    @property
    def n_phases(self) -> int:
        return len(self.phases)


def _robust_reach(ts: TransitionSystem, target: Tuple[int, ...]):
    """Fixed point W_{k+1} = W_k + {q : exists u, {} != post(q,u) <= W_k}."""
    dist = {q: 0 for q in target}
    policy: Dict[int, int] = {}
    level = 0
    changed = True
    while changed:
        changed = False
        level += 1
        frontier = {}
        for s in ts.states:
            q = s.id
            if q in dist:
                continue
            for iid in ts.enabled(q):
                succ = ts.successors(q, iid)
                if succ and all(t in dist for t in succ):
                    frontier[q] = iid
                    break  # input ids ascend: first hit is the tie-break winner
        for q, iid in frontier.items():
            dist[q] = level
            policy[q] = iid
            changed = True
    return policy, dist


def _hold_sequences(ts: TransitionSystem, max_hold: int) -> Dict[Tuple[int, int], List[int]]:
    """Cell id sequence visited by holding each input from each state's
    quantized point, truncated at the state box or max_hold; memoized on ts."""
    cache = getattr(ts, "_hold_seqs", None)
    if cache is not None and cache[0] >= max_hold:
        return cache[1]
    ctx = ts._ctx
    if ctx is None or ts.partition is None:
        raise SynthesisError("model carries no build context; rebuild from config")
    sys, part = ctx.sys, ts.partition
    seqs: Dict[Tuple[int, int], List[int]] = {}
    for s in ts.states:
        for iid, u in enumerate(ts.inputs):
            x = s.cell.quantized_point
            visited: List[int] = []
            for _ in range(max_hold):
                x = integrate(sys, x, u, ctx.tau, ctx.steps)
                if np.any(x < sys.state_lo) or np.any(x > sys.state_hi):
                    break
                visited.append(part.locate(x))
            seqs[(s.id, iid)] = visited
    ts._hold_seqs = (max_hold, seqs)
    return seqs


def _hold_reach(ts: TransitionSystem, target: Tuple[int, ...], max_hold: int):
    """Per state, the first (steps, input id) whose held nominal trajectory
    from the cell's quantized point enters the target inside the state box."""
    if ts.kind != "delayfree":
        raise SynthesisError("hold mode needs a delay-free model")
    seqs = _hold_sequences(ts, max_hold)
    target_set = set(target)
    dist = {q: 0 for q in target}
    policy: Dict[int, int] = {}
    for s in ts.states:
        q = s.id
        if q in dist:
            continue
        best: Optional[Tuple[int, int]] = None
        for iid in range(len(ts.inputs)):
            seq = seqs[(q, iid)]
            k = next((i + 1 for i, c in enumerate(seq[:max_hold])
                      if c in target_set), None)
            if k is not None and (best is None or k < best[0]):
                best = (k, iid)
        if best is not None:
            dist[q] = best[0]
            policy[q] = best[1]
    return policy, dist


def synthesize_reach(ts: TransitionSystem, target: Sequence[int],
                     mode: str = "robust",
                     max_hold: int = 64) -> Tuple[Controller, Dict[int, int]]:
    """Reach controller and winning domain (state id -> step bound).

    Target states belong to the winning domain at distance 0; they are
    assigned their smallest enabled input so the table is total on the
    winning domain (a state with no enabled input stays unassigned).  An
    empty winning domain beyond the target is reported by the returned map,
    not raised.
    """
    target = tuple(sorted(set(target)))
    if not target:
        raise SynthesisError("target must be nonempty")
    known = set(ts.state_ids())
    missing = [q for q in target if q not in known]
    if missing:
        raise SynthesisError(f"target references unknown states {missing}")
    if mode == "robust":
        policy, dist = _robust_reach(ts, target)
    elif mode == "hold":
        policy, dist = _hold_reach(ts, target, max_hold)
    else:
        raise SynthesisError(f"unknown synthesis mode {mode!r}")
    for q in target:
        enabled = ts.enabled(q)
        if enabled:
            policy[q] = enabled[0]
    ctrl = Controller([policy], [target], [dist], list(ts.inputs), mode)
    return ctrl, dist


def synthesize_sequence(ts: TransitionSystem, spec: Specification,
                        mode: str = "hold",
                        max_hold: int = 64) -> Controller:
    """Chain reach controllers along the waypoint list.

    Each phase's table must cover the previous waypoint set (where that
    phase starts); the first phase's coverage is checked at run time against
    the actual initial state.
    """
    if spec.kind == "reach":
        ctrl, _ = synthesize_reach(ts, spec.targets[0], mode, max_hold)
        return ctrl
    phases: List[Dict[int, int]] = []
    winning: List[Dict[int, int]] = []
    for p, waypoint in enumerate(spec.targets):
        ctrl_p, dist = synthesize_reach(ts, waypoint, mode, max_hold)
        phases.append(ctrl_p.phases[0])
        winning.append(dist)
        if p > 0:
            start = spec.targets[p - 1]
            dead = [q for q in start if q not in dist]
            if dead:
                raise SynthesisError(
                    f"leg {p}: waypoint set {list(waypoint)} unreachable "
                    f"from previous waypoint states {dead}")
    return Controller(phases, list(spec.targets), winning, list(ts.inputs), mode)


@dataclass
class ConcreteLaw:
    """The abstract controller composed with the state quantizer."""

    controller: Controller
    F: RefinementMap

    def __call__(self, x, phase: int) -> np.ndarray:
        sid = self.F.locate(x)
        iid = self.controller.input_at(phase, sid)
        if iid is None:
            raise SynthesisError(
                f"state {list(np.atleast_1d(x))} (abstract {sid}) has no "
                f"assignment in phase {phase}")
        return self.controller.inputs[iid]


def refine_controller(c: Controller, F: RefinementMap) -> ConcreteLaw:
    return ConcreteLaw(c, F)
