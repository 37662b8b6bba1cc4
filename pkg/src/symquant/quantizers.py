"""Logarithmic and zoom quantizers, lattices, and box partitions.

A logarithmic quantizer with density parameter eta in (0,1) has levels that
form a geometric sequence with ratio (1+eta)/(1-eta); the quantization region
of a positive level q is the interval [q/(1+eta), q/(1-eta)], mirrored for
negative levels, with a deadzone around zero mapping to 0.  Two level
placements are supported:

  EQ2   levels d, d*r, d*r^2, ...          deadzone radius d/(1+eta)
  EQ20  levels a(1+eta), a(1+eta)*r, ...   deadzone radius a

with r = (1+eta)/(1-eta) and d == a the base parameter.  Both variants obey
the sector bound |z - Q(z)| <= eta*|z| above the deadzone.

The zoom quantizer is a saturated uniform quantizer scaled by delta: it maps
z to k*Lambda*delta with k = round(z/(Lambda*delta)) clamped to [-M, M], so
its range is M*Lambda*delta and its error bound Lambda*delta inside the
range.

Lattices turn a quantizer into a cover of a box by axis-aligned cells.
Region slivers owned by levels outside the box are merged into the adjacent
outermost retained cell so that the cells cover the box exactly; a cell's
quantized point may then sit on (or outside) the clipped cell boundary.
Point location resolves shared boundaries deterministically: logarithmic
boundaries go to the smaller-magnitude level, zoom bins are half-open
[(k-0.5)w, (k+0.5)w).
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from math import floor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

VARIANTS = ("EQ2", "EQ20")


@dataclass(frozen=True)
class LogQuantizerParams:
    """Parameters of the logarithmic quantizer.

    eta: density parameter in (0,1); d: base level (the deadzone edge for
    variant EQ20, where it is traditionally called a).
    """

    eta: float
    d: float
    variant: str = "EQ20"

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0,1), got {self.eta}")
        if self.d <= 0.0:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def rho(self) -> float:
        return (1.0 - self.eta) / (1.0 + self.eta)

    @property
    def deadzone(self) -> float:
        """Radius of the region quantized to 0."""
        if self.variant == "EQ2":
            return self.d / (1.0 + self.eta)
        return self.d

    @property
    def first_level(self) -> float:
        if self.variant == "EQ2":
            return self.d
        return self.d * (1.0 + self.eta)


@dataclass(frozen=True)
class ZoomQuantizerParams:
    """Zoom quantizer parameters: range index M, error bound Lambda, zoom delta.

    delta = 0 disables refinement (the identity lattice).  The realized map
    has range M*Lambda*delta, error bound Lambda*delta and a zero bin of
    total width Lambda*delta.
    """

    M: int
    Lambda: float
    delta: float

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.Lambda <= 0.0:
            raise ValueError(f"Lambda must be positive, got {self.Lambda}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")

    @property
    def width(self) -> float:
        """Bin width Lambda*delta of the realized quantizer."""
        return self.Lambda * self.delta


@dataclass(eq=False)
class Cell:
    """An axis-aligned box region owning one quantized lattice point.

    The quantized point lies in the unclipped quantization region; after
    clipping to the state box and boundary merging it may sit on or outside
    the stored bounds.
    """

    id: int
    lower: np.ndarray
    upper: np.ndarray
    quantized_point: np.ndarray

    def contains(self, x) -> bool:
        return bool(np.all(self.lower <= x) and np.all(x <= self.upper))

    def intersects(self, box_lo, box_hi) -> bool:
        """Closed-box intersection test; boundary touching counts."""
        return bool(np.all(self.lower <= box_hi) and np.all(box_lo <= self.upper))

    @property
    def half_width(self) -> float:
        return float(np.max(self.upper - self.lower)) / 2.0

    def spread(self) -> np.ndarray:
        """Componentwise max distance from the quantized point to the cell."""
        return np.maximum(self.quantized_point - self.lower,
                          self.upper - self.quantized_point)


# ---------------------------------------------------------------------------
# logarithmic quantizer


def _boundaries_up_to(p: LogQuantizerParams, zmax: float) -> Tuple[List[float], List[float]]:
    """Positive levels and their shared region boundaries covering [0, zmax].

    Returns (levels, uppers) where region i is (uppers[i-1], uppers[i]] with
    uppers[-1] meaning the deadzone edge.  Adjacent regions share the exact
    same float boundary so covers tile without gaps.
    """
    ratio = (1.0 + p.eta) / (1.0 - p.eta)
    levels: List[float] = []
    uppers: List[float] = []
    level = p.first_level
    edge = p.deadzone
    while edge < zmax:
        levels.append(level)
        edge = level / (1.0 - p.eta)
        uppers.append(edge)
        level = level * ratio
        if len(levels) > 4096:
            raise ValueError("logarithmic level enumeration ran away; check eta/d")
    return levels, uppers


def log_quantize(z: float, p: LogQuantizerParams) -> float:
    """Quantize a scalar; odd symmetry, ties resolve to the smaller level."""
    az = abs(z)
    if az <= p.deadzone:
        return 0.0
    levels, uppers = _boundaries_up_to(p, az)
    # az lies in the last generated region (uppers[-2], uppers[-1]]
    q = levels[-1]
    return q if z > 0 else -q


@dataclass(frozen=True)
class AxisRegion:
    lower: float
    upper: float
    level: float


def _axis_regions(lo: float, hi: float, p: LogQuantizerParams) -> List[AxisRegion]:
    """1-D quantization regions covering [lo, hi] exactly, boundary-merged."""
    if not lo < hi:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    zmax = max(abs(lo), abs(hi))
    levels, uppers = _boundaries_up_to(p, zmax)
    dz = p.deadzone

    full: List[AxisRegion] = []
    for lvl, up, low in zip(levels[::-1], uppers[::-1],
                            ([dz] + uppers[:-1])[::-1]):
        full.append(AxisRegion(-up, -low, -lvl))
    full.append(AxisRegion(-dz, dz, 0.0))
    low = dz
    for lvl, up in zip(levels, uppers):
        full.append(AxisRegion(low, up, lvl))
        low = up

    clipped = [
        AxisRegion(max(r.lower, lo), min(r.upper, hi), r.level)
        for r in full
        if r.lower < hi and r.upper > lo
    ]
    inside = [i for i, r in enumerate(clipped) if lo <= r.level <= hi]
    if inside:
        i0, i1 = inside[0], inside[-1]
        merged = list(clipped[i0:i1 + 1])
        merged[0] = AxisRegion(lo, merged[0].upper, merged[0].level)
        merged[-1] = AxisRegion(merged[-1].lower, hi, merged[-1].level)
        return merged
    return clipped  # box touches no lattice point; keep the raw slivers


def _axis_locate(regions: List[AxisRegion], z: float) -> int:
    """Index of the region owning z; boundary ties go to the smaller level."""
    if z < regions[0].lower or z > regions[-1].upper:
        raise ValueError(f"{z} outside axis range [{regions[0].lower}, {regions[-1].upper}]")
    uppers = [r.upper for r in regions]
    i = bisect_left(uppers, z)
    if i == len(regions):
        i -= 1
    if z == uppers[i] and i + 1 < len(regions) and \
            abs(regions[i + 1].level) < abs(regions[i].level):
        i += 1
    return i


def _as_axis_params(p, n: int) -> List[LogQuantizerParams]:
    if isinstance(p, LogQuantizerParams):
        return [p] * n
    p = list(p)
    if len(p) != n:
        raise ValueError(f"need {n} per-axis parameter sets, got {len(p)}")
    return p


def log_lattice(box_lo, box_hi, p: Union[LogQuantizerParams, Sequence[LogQuantizerParams]]) -> List[Cell]:
    """Cover a box with logarithmic quantization cells (row-major ids)."""
    return log_partition(box_lo, box_hi, p).cells


def zoom_quantize(z: float, p: ZoomQuantizerParams) -> float:
    """Saturated uniform quantization k*Lambda*delta, half-open bins."""
    if p.delta <= 0.0:
        raise ValueError("zoom_quantize needs delta > 0 (delta = 0 disables refinement)")
    w = p.width
    k = _zoom_bin(z, w)
    k = max(-p.M, min(p.M, k))
    return k * w


def _zoom_bin(z: float, w: float) -> int:
    """Unclamped bin index under (k-0.5)w <= z < (k+0.5)w, float-exact."""
    k = floor(z / w + 0.5)
    while z < (k - 0.5) * w:
        k -= 1
    while z >= (k + 0.5) * w:
        k += 1
    return k


def _zoom_axis_ks(lo: float, hi: float, p: ZoomQuantizerParams) -> List[int]:
    """Retained bin indices: lattice points k*w inside [lo, hi], |k| <= M."""
    w = p.width
    tol = 1e-9 * w
    k_lo = int(np.ceil((lo - tol) / w))
    k_hi = int(np.floor((hi + tol) / w))
    ks = [k for k in range(k_lo, k_hi + 1)
          if -p.M <= k <= p.M and lo - tol <= k * w <= hi + tol]
    if not ks:
        # no lattice point falls inside: one saturated subcell covers it all
        k = max(-p.M, min(p.M, _zoom_bin(0.5 * (lo + hi), w)))
        ks = [k]
    return ks


def zoom_lattice(cell: Cell, p: ZoomQuantizerParams, start_id: int = 0) -> List[Cell]:
    """Refine one cell into zoom subcells (row-major ids from start_id).

    Subcells are the bins [(k-0.5)w, (k+0.5)w] clipped to the cell; leftover
    remainders at the cell edges join the outermost subcell.  delta = 0
    returns the cell unchanged.
    """
    if p.delta == 0.0:
        return [cell]
    n = len(cell.lower)
    w = p.width
    axis_bins: List[List[Tuple[float, float, float]]] = []
    for i in range(n):
        ks = _zoom_axis_ks(float(cell.lower[i]), float(cell.upper[i]), p)
        bins = []
        for j, k in enumerate(ks):
            b_lo = cell.lower[i] if j == 0 else (k - 0.5) * w
            b_hi = cell.upper[i] if j == len(ks) - 1 else (k + 0.5) * w
            bins.append((float(b_lo), float(b_hi), k * w))
        axis_bins.append(bins)

    cells: List[Cell] = []
    idx = [0] * n
    sid = start_id
    while True:
        lo = np.array([axis_bins[i][idx[i]][0] for i in range(n)])
        hi = np.array([axis_bins[i][idx[i]][1] for i in range(n)])
        q = np.array([axis_bins[i][idx[i]][2] for i in range(n)])
        cells.append(Cell(sid, lo, hi, q))
        sid += 1
        # row-major increment, last axis fastest
        for i in range(n - 1, -1, -1):
            idx[i] += 1
            if idx[i] < len(axis_bins[i]):
                break
            idx[i] = 0
        else:
            return cells


# ---------------------------------------------------------------------------
# partition of the state box with optional per-cell zoom refinement


@dataclass
class _ZoomedCell:
    params: ZoomQuantizerParams
    axis_ks: List[List[int]]  # retained bin indices per axis (consecutive)
    first_id: int
    shape: Tuple[int, ...]


class Partition:
    """A cover of a box by logarithmic cells, some zoom-refined.

    Owns deterministic point location (the refinement map F restricted to
    state vectors) and box-intersection queries used by the abstraction
    builder.  Cells keep stable ids across refinement: refined base cells
    retire their id and subcells receive fresh ids appended in order.
    """

    def __init__(self, box_lo, box_hi, params):
        self.box_lo = np.asarray(box_lo, dtype=float)
        self.box_hi = np.asarray(box_hi, dtype=float)
        self.n = len(self.box_lo)
        self.params = _as_axis_params(params, self.n)
        self.axes: List[List[AxisRegion]] = [
            _axis_regions(float(self.box_lo[i]), float(self.box_hi[i]), self.params[i])
            for i in range(self.n)
        ]
        self._shape = tuple(len(ax) for ax in self.axes)
        self.base_cells: List[Cell] = []
        for flat in range(int(np.prod(self._shape))):
            idx = np.unravel_index(flat, self._shape)
            lo = np.array([self.axes[i][idx[i]].lower for i in range(self.n)])
            hi = np.array([self.axes[i][idx[i]].upper for i in range(self.n)])
            q = np.array([self.axes[i][idx[i]].level for i in range(self.n)])
            self.base_cells.append(Cell(flat, lo, hi, q))
        self.zoom: Dict[int, _ZoomedCell] = {}
        self._rebuild_active()

    # -- construction ------------------------------------------------------

    def _rebuild_active(self) -> None:
        self.cells = [c for c in self.base_cells if c.id not in self.zoom]
        self._sub_cells: Dict[int, List[Cell]] = {}
        for bid in sorted(self.zoom):
            z = self.zoom[bid]
            base = self.base_cells[bid]
            subs = zoom_lattice(base, z.params, start_id=z.first_id)
            self._sub_cells[bid] = subs
            self.cells.extend(subs)
        self.cells.sort(key=lambda c: c.id)
        self._by_id = {c.id: c for c in self.cells}

    def refined(self, assignments: Dict[int, ZoomQuantizerParams]) -> "Partition":
        """New partition with the given base cells zoom-refined."""
        part = Partition(self.box_lo, self.box_hi, self.params)
        part.zoom = dict(self.zoom)
        next_id = max((c.id for c in self.cells), default=-1) + 1
        for bid in sorted(assignments):
            p = assignments[bid]
            if bid in part.zoom:
                raise ValueError(f"cell {bid} is already zoom-refined")
            if not 0 <= bid < len(self.base_cells):
                if bid in self._by_id:
                    raise ValueError(f"cell {bid} is a zoom subcell; refine base cells only")
                raise ValueError(f"unknown cell id {bid}")
            if p.delta == 0.0:
                continue  # keep the cell
            base = self.base_cells[bid]
            axis_ks = [
                _zoom_axis_ks(float(base.lower[i]), float(base.upper[i]), p)
                for i in range(self.n)
            ]
            shape = tuple(len(ks) for ks in axis_ks)
            part.zoom[bid] = _ZoomedCell(p, axis_ks, next_id, shape)
            next_id += int(np.prod(shape))
        part._rebuild_active()
        return part

    # -- queries -----------------------------------------------------------

    def cell(self, cid: int) -> Cell:
        return self._by_id[cid]

    def zoom_params_of(self, cid: int) -> Optional[ZoomQuantizerParams]:
        """Zoom parameters if cid is a subcell of a refined base cell."""
        for bid, z in self.zoom.items():
            size = int(np.prod(z.shape))
            if z.first_id <= cid < z.first_id + size:
                return z.params
        return None

    def locate(self, x) -> int:
        """Cell id containing x (deterministic tie-break); x must be in the box."""
        x = np.asarray(x, dtype=float)
        bidx = tuple(_axis_locate(self.axes[i], float(x[i])) for i in range(self.n))
        bid = int(np.ravel_multi_index(bidx, self._shape))
        z = self.zoom.get(bid)
        if z is None:
            return bid
        sub = []
        for i in range(self.n):
            ks = z.axis_ks[i]
            k = _zoom_bin(float(x[i]), z.params.width)
            k = max(ks[0], min(ks[-1], k))
            sub.append(k - ks[0])
        return z.first_id + int(np.ravel_multi_index(tuple(sub), z.shape))

    def _axis_range(self, regions: List[AxisRegion], lo: float, hi: float) -> range:
        """Indices of regions with closed overlap with [lo, hi]."""
        first = None
        last = None
        for i, r in enumerate(regions):
            if r.lower <= hi and lo <= r.upper:
                if first is None:
                    first = i
                last = i
        if first is None:
            return range(0)
        return range(first, last + 1)

    def intersecting(self, box_lo, box_hi) -> List[int]:
        """Ids of all cells whose closed region meets the closed box."""
        box_lo = np.asarray(box_lo, dtype=float)
        box_hi = np.asarray(box_hi, dtype=float)
        ranges = [
            self._axis_range(self.axes[i], float(box_lo[i]), float(box_hi[i]))
            for i in range(self.n)
        ]
        out: List[int] = []
        for bidx in np.ndindex(*[len(r) for r in ranges]):
            idx = tuple(ranges[i][bidx[i]] for i in range(self.n))
            bid = int(np.ravel_multi_index(idx, self._shape))
            z = self.zoom.get(bid)
            if z is None:
                out.append(bid)
                continue
            base = self.base_cells[bid]
            sub_ranges = []
            for i in range(self.n):
                ks = z.axis_ks[i]
                w = z.params.width
                hits = []
                for j, k in enumerate(ks):
                    b_lo = base.lower[i] if j == 0 else (k - 0.5) * w
                    b_hi = base.upper[i] if j == len(ks) - 1 else (k + 0.5) * w
                    if b_lo <= box_hi[i] and box_lo[i] <= b_hi:
                        hits.append(j)
                sub_ranges.append(hits)
            if all(sub_ranges):
                for sidx in np.ndindex(*[len(h) for h in sub_ranges]):
                    sub = tuple(sub_ranges[i][sidx[i]] for i in range(self.n))
                    out.append(z.first_id + int(np.ravel_multi_index(sub, z.shape)))
        return sorted(out)


def log_partition(box_lo, box_hi, params) -> Partition:
    return Partition(box_lo, box_hi, params)
