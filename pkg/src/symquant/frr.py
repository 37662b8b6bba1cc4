"""Feedback refinement relation: exact finite check and randomized witnesses.

The relation holds from T1 to T2 under a map F when (i) every input enabled
at x2 = F(x1) is enabled at x1, and (ii) applying such an input from x1
leads only to states whose image under F is an abstract successor of x2.
For a finite pair of systems this is checked exhaustively.  Against the
concrete plant it is tested by sampling: concrete states are drawn inside
abstract states, advanced one sampling period, and their quantized image is
checked against the abstract successor set.  Zero violations is the
executable form of the soundness claim; a deliberately broken model
(zero growth radius) must produce violations, guarding the test itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .abstraction import (SplineTube, TransitionSystem, _tube_theta2,
                          psi2, tube_interpolant)
from .dynamics import SampledCurve, integrate, integrate_delay
from .quantizers import Partition


@dataclass
class RefinementMap:
    """Point location into abstract states: cells, or tubes via knot cells."""

    partition: Partition
    tube_index: Optional[Dict[SplineTube, int]] = None
    N: Optional[int] = None

    @staticmethod
    def from_ts(ts: TransitionSystem) -> "RefinementMap":
        if ts.partition is None:
            raise ValueError("model carries no partition; rebuild from config")
        if ts.kind == "timedelay":
            index = {s.tube: s.id for s in ts.states}
            n = len(ts.states[0].tube.knots) - 2
            return RefinementMap(ts.partition, index, n)
        return RefinementMap(ts.partition)

    def locate(self, x) -> int:
        return self.partition.locate(x)

    def tube_of(self, curve: SampledCurve) -> Optional[int]:
        """Tube id of a functional, or None if its knot tuple is undiscovered."""
        if self.tube_index is None or self.N is None:
            raise ValueError("map was not built over a tube model")
        tube = psi2(curve, self.partition, self.N)
        return self.tube_index.get(tube)


@dataclass
class Violation:
    x: np.ndarray
    u: np.ndarray
    x_next: object
    abstract_state: int
    observed: object
    allowed: Tuple[int, ...]
    detail: str = ""


@dataclass
class FrrReport:
    samples: int
    checked: int
    skipped: int
    violations: List[Violation]
    seed: int

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_text(self) -> str:
        lines = [f"frr-report seed={self.seed} samples={self.samples} "
                 f"checked={self.checked} skipped={self.skipped} "
                 f"violations={len(self.violations)}"]
        for i, v in enumerate(self.violations):
            x = " ".join(f"{c:.9g}" for c in np.atleast_1d(v.x).ravel())
            u = " ".join(f"{c:.9g}" for c in np.atleast_1d(v.u).ravel())
            lines.append(f"violation {i}: state={v.abstract_state} x=[{x}] u=[{u}] "
                         f"observed={v.observed} allowed={list(v.allowed)} {v.detail}".rstrip())
        return "\n".join(lines)


@dataclass
class Counterexample:
    x1: int
    x2: int
    input: Optional[np.ndarray]
    kind: str  # 'inputs' or 'successors'
    detail: str


def _input_map(T1: TransitionSystem, T2: TransitionSystem) -> Dict[int, int]:
    """T2 input id -> T1 input id by exact vector equality; U2 must be in U1."""
    mapping = {}
    for i2, u in enumerate(T2.inputs):
        i1 = T1.input_id_of(u)
        if i1 is None:
            raise ValueError(
                f"input set not nested: T2 input {u.tolist()} missing from T1")
        mapping[i2] = i1
    return mapping


def check_frr_finite(T1: TransitionSystem, T2: TransitionSystem,
                     F: Dict[int, int]) -> Tuple[bool, Optional[Counterexample]]:
    """Exhaustive check of the relation over all pairs related by F."""
    imap = _input_map(T1, T2)
    t2_ids = set(T2.state_ids())
    for x1, x2 in F.items():
        if x1 not in T1._by_id or x2 not in t2_ids:
            raise ValueError(f"F references unknown state pair ({x1}, {x2})")
    for x1, x2 in sorted(F.items()):
        enabled1 = set(T1.enabled(x1))
        for i2 in T2.enabled(x2):
            i1 = imap[i2]
            if i1 not in enabled1:
                return False, Counterexample(
                    x1, x2, T2.inputs[i2], "inputs",
                    f"input enabled at abstract {x2} but not at {x1}")
            allowed = set(T2.successors(x2, i2))
            for s in T1.successors(x1, i1):
                if s not in F:
                    raise ValueError(f"F undefined on successor state {s}")
                if F[s] not in allowed:
                    return False, Counterexample(
                        x1, x2, T2.inputs[i2], "successors",
                        f"F({s})={F[s]} not among successors {sorted(allowed)}")
    return True, None


# ---------------------------------------------------------------------------
# sampled witnesses against the concrete system


def _ctx_of(ts: TransitionSystem):
    if ts._ctx is None:
        raise ValueError("model carries no build context; rebuild from config")
    return ts._ctx


def sample_frr_delayfree(sys, ts: TransitionSystem, F: RefinementMap,
                         n_samples: int, seed: int) -> FrrReport:
    """Sampled soundness witness for delay-free models: quantized concrete
    successors must be abstract successors.  Out-of-domain successors are
    skipped, not failed."""
    ctx = _ctx_of(ts)
    rng = np.random.default_rng(seed)
    cells = [s.cell for s in ts.states]
    violations: List[Violation] = []
    checked = skipped = 0
    for _ in range(n_samples):
        cell = cells[int(rng.integers(len(cells)))]
        x = rng.uniform(cell.lower, cell.upper)
        x2 = F.locate(x)
        enabled = ts.enabled(x2)
        if not enabled:
            skipped += 1
            continue
        iid = enabled[int(rng.integers(len(enabled)))]
        x_next = integrate(sys, x, ts.inputs[iid], ctx.tau, ctx.steps)
        if np.any(x_next < sys.state_lo) or np.any(x_next > sys.state_hi):
            skipped += 1
            continue
        q_next = F.locate(x_next)
        allowed = ts.successors(x2, iid)
        checked += 1
        if q_next not in allowed:
            violations.append(Violation(x, ts.inputs[iid], x_next, x2,
                                        q_next, allowed))
    return FrrReport(n_samples, checked, skipped, violations, seed)


def _jitter_bounds(tube: SplineTube, part: Partition) -> List[float]:
    out = []
    for k in tube.knots:
        zp = part.zoom_params_of(k)
        out.append(zp.width if zp is not None else part.cell(k).half_width)
    return out


_EDGE = 1e-9


def sample_frr_timedelay(sys, ts: TransitionSystem, F: RefinementMap,
                         n_samples: int, seed: int) -> FrrReport:
    """Sampled soundness witness over functional states.

    Concrete functionals are linear interpolants through knot points
    jittered within each knot cell (clamped just inside the faces so point
    location recovers the sampled cell).  Successor membership is knot-wise:
    at every knot time, the cell of the sampled successor must intersect the
    growth box around the nominal successor of the tube's quantized
    functional.
    """
    ctx = _ctx_of(ts)
    part = ts.partition
    rng = np.random.default_rng(seed)
    periods = sys.input_delay_periods(ctx.tau)
    amp = 2.0 * math.exp(ctx.L2 * ctx.tau) * ctx.growth_scale
    thetas = ctx.knot_thetas
    nominal_cache: Dict[Tuple[int, int], np.ndarray] = {}
    violations: List[Violation] = []
    checked = skipped = 0

    for _ in range(n_samples):
        sid = int(rng.integers(len(ts.states)))
        tube = ts.states[sid].tube
        enabled = ts.enabled(sid)
        if not enabled:
            skipped += 1
            continue
        iid = enabled[int(rng.integers(len(enabled)))]
        u = ts.inputs[iid]

        bounds = _jitter_bounds(tube, part)
        pts = []
        for j, k in enumerate(tube.knots):
            c = part.cell(k)
            y = c.quantized_point + rng.uniform(-bounds[j], bounds[j], size=len(c.lower))
            width = c.upper - c.lower
            y = np.minimum(np.maximum(y, c.lower + _EDGE * width),
                           c.upper - _EDGE * width)
            pts.append(y)
        if sys.Theta == 0.0:
            curve = SampledCurve(0.0, 0.0, np.asarray(pts[-1])[None, :])
        else:
            curve = SampledCurve(-sys.Theta, 0.0, np.asarray(pts))

        x_next = integrate_delay(sys, curve, [u] * periods, u, ctx.tau, ctx.steps)
        samples = [x_next(th) for th in thetas]
        if any(np.any(s < sys.state_lo) or np.any(s > sys.state_hi) for s in samples):
            skipped += 1
            continue

        key = (sid, iid)
        if key not in nominal_cache:
            nom = integrate_delay(sys, tube_interpolant(tube, part, sys.Theta),
                                  [u] * periods, u, ctx.tau, ctx.steps)
            nominal_cache[key] = np.array([nom(th) for th in thetas])
        nom_pts = nominal_cache[key]
        radius = _tube_theta2(tube, part) * amp

        checked += 1
        bad = None
        got = []
        for j, s in enumerate(samples):
            c = part.cell(part.locate(s))
            got.append(c.id)
            if not c.intersects(nom_pts[j] - radius, nom_pts[j] + radius):
                bad = j
                break
        if bad is not None:
            violations.append(Violation(
                np.asarray(pts), u, np.asarray(samples), sid, tuple(got),
                ts.successors(sid, iid),
                detail=f"knot {bad} outside the growth box"))
    return FrrReport(n_samples, checked, skipped, violations, seed)
