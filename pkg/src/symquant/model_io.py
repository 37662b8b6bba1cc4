"""Plain-text persistence: STS v1 model files, controller tables, DOT graphs.

STS v1 layout, all floats at 9 significant digits, records sorted by id:

    STS 1 <n_states> <n_inputs> <n_transitions>
    S <id> <lower...> <upper...> <q...>
    T <id> <knot cell ids...>        (tube models only)
    I <id> <u...>
    E <src> <input> <dst>

For tube models the S records list the partition cells the knots refer to,
and n_states counts the T records.  Serialization is deterministic, and
serialize(parse(text)) == text byte for byte.

Controller tables:

    CTRL 1 <mode> <n_phases> <n_inputs> <n_entries>
    I <id> <u...>
    W <phase> <state id>
    C <phase> <state id> <input id>
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .abstraction import AbstractState, SplineTube, TransitionSystem
from .quantizers import Cell
from .synthesis import Controller


def _fmt(v: float) -> str:
    return "%.9g" % (float(v) + 0.0)


def _fmt_vec(vec) -> str:
    return " ".join(_fmt(v) for v in np.atleast_1d(vec))


class ModelFormatError(ValueError):
    pass


def _cells_for_serialization(ts: TransitionSystem) -> List[Cell]:
    if ts.partition is not None:
        return ts.partition.cells
    table = getattr(ts, "cell_table", None)
    if table is not None:
        return table
    raise ModelFormatError("tube model carries no cell table to serialize")


def serialize_ts(ts: TransitionSystem) -> str:
    lines = [f"STS 1 {len(ts.states)} {len(ts.inputs)} {ts.n_transitions}"]
    if ts.kind == "delayfree":
        for s in sorted(ts.states, key=lambda s: s.id):
            c = s.cell
            lines.append(f"S {s.id} {_fmt_vec(c.lower)} {_fmt_vec(c.upper)} "
                         f"{_fmt_vec(c.quantized_point)}")
    else:
        for c in sorted(_cells_for_serialization(ts), key=lambda c: c.id):
            lines.append(f"S {c.id} {_fmt_vec(c.lower)} {_fmt_vec(c.upper)} "
                         f"{_fmt_vec(c.quantized_point)}")
        for s in sorted(ts.states, key=lambda s: s.id):
            knots = " ".join(str(k) for k in s.tube.knots)
            lines.append(f"T {s.id} {knots}")
    for i, u in enumerate(ts.inputs):
        lines.append(f"I {i} {_fmt_vec(u)}")
    for (sid, iid) in sorted(ts.transitions):
        for dst in ts.transitions[(sid, iid)]:
            lines.append(f"E {sid} {iid} {dst}")
    return "\n".join(lines) + "\n"


def parse_sts(text: str) -> TransitionSystem:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("STS 1 "):
        raise ModelFormatError("missing STS 1 header")
    try:
        _, _, n_states, n_inputs, n_trans = lines[0].split()
        n_states, n_inputs, n_trans = int(n_states), int(n_inputs), int(n_trans)
    except ValueError as err:
        raise ModelFormatError(f"bad header: {lines[0]!r}") from err

    cells: List[Cell] = []
    tubes: List[Tuple[int, Tuple[int, ...]]] = []
    inputs: Dict[int, np.ndarray] = {}
    transitions: Dict[Tuple[int, int], List[int]] = {}
    for ln in lines[1:]:
        parts = ln.split()
        tag = parts[0]
        try:
            if tag == "S":
                nums = [float(v) for v in parts[2:]]
                if len(nums) % 3:
                    raise ModelFormatError(f"S record has {len(nums)} values: {ln!r}")
                n = len(nums) // 3
                cells.append(Cell(int(parts[1]), np.array(nums[:n]),
                                  np.array(nums[n:2 * n]), np.array(nums[2 * n:])))
            elif tag == "T":
                tubes.append((int(parts[1]), tuple(int(v) for v in parts[2:])))
            elif tag == "I":
                inputs[int(parts[1])] = np.array([float(v) for v in parts[2:]])
            elif tag == "E":
                src, iid, dst = int(parts[1]), int(parts[2]), int(parts[3])
                transitions.setdefault((src, iid), []).append(dst)
            else:
                raise ModelFormatError(f"unknown record tag {tag!r}")
        except (IndexError, ValueError) as err:
            if isinstance(err, ModelFormatError):
                raise
            raise ModelFormatError(f"malformed record: {ln!r}") from err

    if len(inputs) != n_inputs:
        raise ModelFormatError(f"header says {n_inputs} inputs, found {len(inputs)}")
    input_list = [inputs[i] for i in range(n_inputs)]
    trans = {k: tuple(v) for k, v in transitions.items()}

    if tubes:
        states = [AbstractState(tid, tube=SplineTube(knots)) for tid, knots in tubes]
        kind = "timedelay"
    else:
        states = [AbstractState(c.id, cell=c) for c in cells]
        kind = "delayfree"
    if len(states) != n_states:
        raise ModelFormatError(f"header says {n_states} states, found {len(states)}")
    known = {s.id for s in states}
    for (src, iid), dsts in trans.items():
        if src not in known or any(d not in known for d in dsts):
            raise ModelFormatError(f"transition references unknown state: "
                                   f"({src}, {iid}) -> {dsts}")
        if not 0 <= iid < n_inputs:
            raise ModelFormatError(f"transition references unknown input {iid}")
    ts = TransitionSystem(kind, states, input_list, trans,
                          initial=[s.id for s in states] if kind == "delayfree" else
                          [states[0].id] if states else [])
    if tubes:
        ts.cell_table = cells
    return ts


def write_ts(ts: TransitionSystem, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_ts(ts))


def load_ts(path: str) -> TransitionSystem:
    with open(path) as fh:
        return parse_sts(fh.read())


# ---------------------------------------------------------------------------
# controller tables


def serialize_controller(c: Controller) -> str:
    n_entries = sum(len(p) for p in c.phases)
    lines = [f"CTRL 1 {c.mode} {c.n_phases} {len(c.inputs)} {n_entries}"]
    for i, u in enumerate(c.inputs):
        lines.append(f"I {i} {_fmt_vec(u)}")
    for p, wp in enumerate(c.waypoints):
        for sid in sorted(wp):
            lines.append(f"W {p} {sid}")
    for p, table in enumerate(c.phases):
        for sid in sorted(table):
            lines.append(f"C {p} {sid} {table[sid]}")
    return "\n".join(lines) + "\n"


def parse_controller(text: str) -> Controller:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("CTRL 1 "):
        raise ModelFormatError("missing CTRL 1 header")
    try:
        _, _, mode, n_phases, n_inputs, n_entries = lines[0].split()
        n_phases, n_inputs, n_entries = int(n_phases), int(n_inputs), int(n_entries)
    except ValueError as err:
        raise ModelFormatError(f"bad header: {lines[0]!r}") from err
    inputs: Dict[int, np.ndarray] = {}
    waypoints: List[set] = [set() for _ in range(n_phases)]
    phases: List[Dict[int, int]] = [{} for _ in range(n_phases)]
    for ln in lines[1:]:
        parts = ln.split()
        try:
            if parts[0] == "I":
                inputs[int(parts[1])] = np.array([float(v) for v in parts[2:]])
            elif parts[0] == "W":
                waypoints[int(parts[1])].add(int(parts[2]))
            elif parts[0] == "C":
                phases[int(parts[1])][int(parts[2])] = int(parts[3])
            else:
                raise ModelFormatError(f"unknown record tag {parts[0]!r}")
        except (IndexError, ValueError) as err:
            if isinstance(err, ModelFormatError):
                raise
            raise ModelFormatError(f"malformed record: {ln!r}") from err
    if len(inputs) != n_inputs:
        raise ModelFormatError(f"header says {n_inputs} inputs, found {len(inputs)}")
    if sum(len(p) for p in phases) != n_entries:
        raise ModelFormatError("entry count does not match header")
    return Controller(phases, [tuple(sorted(w)) for w in waypoints],
                      [{} for _ in range(n_phases)],
                      [inputs[i] for i in range(n_inputs)], mode)


def write_controller(c: Controller, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_controller(c))


def load_controller(path: str) -> Controller:
    with open(path) as fh:
        return parse_controller(fh.read())


# ---------------------------------------------------------------------------
# DOT export


def export_dot(ts: TransitionSystem) -> str:
    """One node per abstract state, one labeled edge per (src, input, dst)."""
    lines = ["digraph sts {", "  rankdir=LR;"]
    for s in sorted(ts.states, key=lambda s: s.id):
        if s.cell is not None:
            label = "(" + ", ".join(_fmt(v) for v in s.cell.quantized_point) + ")"
        else:
            label = "knots " + " ".join(str(k) for k in s.tube.knots)
        lines.append(f'  s{s.id} [label="{label}"];')
    for (sid, iid) in sorted(ts.transitions):
        ulabel = " ".join(_fmt(v) for v in ts.inputs[iid])
        for dst in ts.transitions[(sid, iid)]:
            lines.append(f'  s{sid} -> s{dst} [label="{ulabel}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
