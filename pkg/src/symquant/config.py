"""INI configuration: every free parameter of the toolkit in one file.

Sections: [system] (dimensions, boxes, vector field, delays, initial
functional), [abstraction] (sampling period, quantizers, Lipschitz mode,
zoom assignments, spline count, exploration budget), [synthesis]
(specification kind, mode, waypoint points), [run] (initial state, step
limit, seed, sample count).  Multi-valued keys (vector field rows, zoom
assignments, waypoints, xi0 samples) use indented continuation lines.
Validation failures name the offending field, e.g. "abstraction.eta: must
be in (0, 1)".
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .abstraction import (TransitionSystem, build_delayfree, build_timedelay,
                          refine_cells)
from .dynamics import (ControlSystem, SampledCurve, TimeDelaySystem,
                       DEFAULT_STEPS)
from .expr import ExprError, parse as parse_expr
from .quantizers import LogQuantizerParams, ZoomQuantizerParams
from .synthesis import Specification


class ConfigError(ValueError):
    pass


def _rows(raw: str) -> List[str]:
    return [ln.strip() for ln in raw.splitlines() if ln.strip()]


@dataclass
class AppConfig:
    n: int
    m: int
    rhs: List[str]
    state_lo: np.ndarray
    state_hi: np.ndarray
    input_lo: np.ndarray
    input_hi: np.ndarray
    theta: float
    r: float
    xi0_rows: Optional[np.ndarray]

    tau: float
    variant: str
    eta: float
    d: float
    input_quantizer: str
    mu: float
    input_eta: float
    input_d: float
    lipschitz: Union[str, float]
    steps: int
    growth_scale: float
    zoom: Dict[int, ZoomQuantizerParams]
    N: Optional[int]
    budget: int

    spec_kind: str
    spec_mode: str
    target_points: List[np.ndarray]
    max_hold: int

    x0: Optional[np.ndarray]
    max_steps: int
    seed: int
    samples: int

    # -- derived builders ----------------------------------------------------

    def log_params(self) -> LogQuantizerParams:
        return LogQuantizerParams(self.eta, self.d, self.variant)

    def input_quantization(self):
        if self.input_quantizer == "uniform":
            return ("uniform", self.mu)
        return ("log", LogQuantizerParams(self.input_eta, self.input_d, self.variant))

    def is_timedelay(self) -> bool:
        return self.theta > 0 or self.r > 0 or any("delay(" in s for s in self.rhs)

    def system(self):
        exprs = tuple(parse_expr(s) for s in self.rhs)
        if not self.is_timedelay():
            return ControlSystem(self.n, self.m, self.state_lo, self.state_hi,
                                 self.input_lo, self.input_hi, exprs)
        xi0 = None
        if self.xi0_rows is not None:
            rows = self.xi0_rows
            if self.theta == 0.0:
                xi0 = SampledCurve(0.0, 0.0, rows[-1:])
            elif rows.shape[0] == 1:
                xi0 = SampledCurve.constant(-self.theta, 0.0, rows[0])
            else:
                xi0 = SampledCurve(-self.theta, 0.0, rows)
        return TimeDelaySystem(self.n, self.m, self.state_lo, self.state_hi,
                               self.input_lo, self.input_hi, exprs,
                               self.theta, self.r, xi0)

    def spline_N(self) -> int:
        if self.N is not None:
            return self.N
        if self.zoom:
            M = max(z.M for z in self.zoom.values())
            return max(0, min(8, M * M) - 2)
        return 0

    def build_model(self, refined: bool = False) -> TransitionSystem:
        sys = self.system()
        if self.is_timedelay():
            return build_timedelay(sys, self.tau, self.log_params(),
                                   zoom_assignments=self.zoom or None,
                                   N=self.spline_N(),
                                   input_quantization=self.input_quantization(),
                                   lipschitz=self.lipschitz, steps=self.steps,
                                   growth_scale=self.growth_scale,
                                   budget=self.budget)
        ts = build_delayfree(sys, self.tau, self.log_params(),
                             input_quantization=self.input_quantization(),
                             lipschitz=self.lipschitz, steps=self.steps,
                             growth_scale=self.growth_scale)
        if refined and self.zoom:
            ts = refine_cells(ts, self.zoom)
        return ts

    def specification(self, ts: TransitionSystem) -> Specification:
        if ts.partition is None:
            raise ConfigError("synthesis.targets: model has no partition to "
                              "resolve target points")
        targets = []
        for i, p in enumerate(self.target_points):
            try:
                cid = ts.partition.locate(p)
            except ValueError as err:
                raise ConfigError(f"synthesis.targets: row {i + 1}: {err}") from err
            if ts.kind == "timedelay":
                # a functional state is "at" the point when every knot of its
                # tube lies in the located cell
                ids = tuple(s.id for s in ts.states
                            if all(k == cid for k in s.tube.knots))
                if not ids:
                    raise ConfigError(
                        f"synthesis.targets: row {i + 1}: no reachable tube "
                        f"stays in cell {cid} over its whole memory window")
                targets.append(ids)
            else:
                targets.append((cid,))
        if self.spec_kind == "reach":
            targets = [targets[0]]
        return Specification(self.spec_kind, targets)


# ---------------------------------------------------------------------------
# parsing helpers: every failure names section.key


class _Section:
    def __init__(self, cp: configparser.ConfigParser, name: str):
        self.name = name
        self.present = cp.has_section(name)
        self._sec = cp[name] if self.present else {}

    def raw(self, key: str, default: Optional[str] = None) -> Optional[str]:
        val = self._sec.get(key)
        return val if val is not None else default

    def require(self, key: str) -> str:
        val = self._sec.get(key)
        if val is None:
            raise ConfigError(f"{self.name}.{key}: required key is missing")
        return val

    def floats(self, key: str, count: Optional[int] = None,
               default: Optional[str] = None) -> Optional[np.ndarray]:
        raw = self.raw(key, default)
        if raw is None:
            return None
        try:
            vals = np.array([float(v) for v in raw.split()])
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected numbers, got {raw!r}")
        if count is not None and len(vals) != count:
            raise ConfigError(f"{self.name}.{key}: expected {count} values, "
                              f"got {len(vals)}")
        return vals

    def number(self, key: str, default: Optional[str] = None) -> Optional[float]:
        raw = self.raw(key, default)
        if raw is None:
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected a number, got {raw!r}")

    def integer(self, key: str, default: Optional[str] = None) -> Optional[int]:
        raw = self.raw(key, default)
        if raw is None:
            return None
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: expected an integer, got {raw!r}")

    def choice(self, key: str, options: Tuple[str, ...], default: str) -> str:
        val = self.raw(key, default)
        if val not in options:
            raise ConfigError(f"{self.name}.{key}: expected one of {options}, "
                              f"got {val!r}")
        return val


def _check(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def load_config(path: str) -> AppConfig:
    cp = configparser.ConfigParser()
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config file not parseable: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parse_config(cp)


def parse_config_text(text: str) -> AppConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config file not parseable: {exc}") from exc
    return parse_config(cp)


def parse_config(cp: configparser.ConfigParser) -> AppConfig:
    sysc = _Section(cp, "system")
    absc = _Section(cp, "abstraction")
    sync = _Section(cp, "synthesis")
    runc = _Section(cp, "run")
    if not sysc.present:
        raise ConfigError("system: section is missing")
    if not absc.present:
        raise ConfigError("abstraction: section is missing")

    n = sysc.integer("n")
    m = sysc.integer("m")
    _check(n is not None and n >= 1, "system.n", "must be an integer >= 1")
    _check(m is not None and m >= 1, "system.m", "must be an integer >= 1")

    rhs = _rows(sysc.require("f"))
    _check(len(rhs) == n, "system.f", f"expected {n} expressions, got {len(rhs)}")
    for i, s in enumerate(rhs):
        try:
            parse_expr(s)
        except ExprError as err:
            raise ConfigError(f"system.f: row {i + 1}: {err}") from err

    state_lo = sysc.floats("state_lo", n) if sysc.raw("state_lo") else None
    _check(state_lo is not None, "system.state_lo", "required key is missing")
    state_hi = sysc.floats("state_hi", n) if sysc.raw("state_hi") else None
    _check(state_hi is not None, "system.state_hi", "required key is missing")
    _check(bool(np.all(state_lo < state_hi)), "system.state_lo",
           "state box must have nonempty interior")
    input_lo = sysc.floats("input_lo", m) if sysc.raw("input_lo") else None
    _check(input_lo is not None, "system.input_lo", "required key is missing")
    input_hi = sysc.floats("input_hi", m) if sysc.raw("input_hi") else None
    _check(input_hi is not None, "system.input_hi", "required key is missing")
    _check(bool(np.all(input_lo <= input_hi)), "system.input_lo", "input box empty")

    theta = sysc.number("theta", "0") or 0.0
    r = sysc.number("r", "0") or 0.0
    _check(theta >= 0, "system.theta", "must be nonnegative")
    _check(r >= 0, "system.r", "must be nonnegative")
    xi0_rows = None
    if sysc.raw("xi0"):
        rows = _rows(sysc.raw("xi0"))
        vals = []
        for i, row in enumerate(rows):
            try:
                v = [float(x) for x in row.split()]
            except ValueError:
                raise ConfigError(f"system.xi0: row {i + 1}: expected numbers")
            _check(len(v) == n, "system.xi0", f"row {i + 1}: expected {n} values")
            vals.append(v)
        xi0_rows = np.array(vals)

    tau = absc.number("tau")
    _check(tau is not None and tau > 0, "abstraction.tau", "must be positive")
    variant = absc.choice("variant", ("EQ2", "EQ20"), "EQ20")
    eta = absc.number("eta")
    _check(eta is not None and 0 < eta < 1, "abstraction.eta", "must be in (0, 1)")
    d = absc.number("d")
    _check(d is not None and d > 0, "abstraction.d", "must be positive")
    input_quantizer = absc.choice("input_quantizer", ("uniform", "log"), "uniform")
    mu = absc.number("mu", "0.2")
    _check(mu > 0, "abstraction.mu", "must be positive")
    input_eta = absc.number("input_eta", str(eta))
    input_d = absc.number("input_d", str(d))
    if input_quantizer == "log":
        _check(0 < input_eta < 1, "abstraction.input_eta", "must be in (0, 1)")
        _check(input_d > 0, "abstraction.input_d", "must be positive")

    lip_raw = absc.raw("lipschitz", "sampled")
    if lip_raw == "sampled":
        lipschitz: Union[str, float] = "sampled-jacobian"
    else:
        try:
            lipschitz = float(lip_raw)
        except ValueError:
            raise ConfigError("abstraction.lipschitz: expected 'sampled' or a number, "
                              f"got {lip_raw!r}")
        _check(lipschitz > 0, "abstraction.lipschitz", "must be positive")

    steps = absc.integer("steps", str(DEFAULT_STEPS))
    _check(steps >= 1, "abstraction.steps", "must be an integer >= 1")
    growth_scale = absc.number("growth_scale", "1")
    _check(growth_scale >= 0, "abstraction.growth_scale", "must be nonnegative")

    zoom: Dict[int, ZoomQuantizerParams] = {}
    if absc.raw("zoom"):
        for i, row in enumerate(_rows(absc.raw("zoom"))):
            parts = row.split()
            _check(len(parts) == 4, "abstraction.zoom",
                   f"row {i + 1}: expected 'cell M Lambda delta'")
            try:
                cid, M = int(parts[0]), int(parts[1])
                Lam, delta = float(parts[2]), float(parts[3])
            except ValueError:
                raise ConfigError(f"abstraction.zoom: row {i + 1}: malformed numbers")
            _check(cid >= 0, "abstraction.zoom", f"row {i + 1}: cell id must be >= 0")
            _check(cid not in zoom, "abstraction.zoom",
                   f"row {i + 1}: duplicate cell id {cid}")
            try:
                zoom[cid] = ZoomQuantizerParams(M, Lam, delta)
            except ValueError as err:
                raise ConfigError(f"abstraction.zoom: row {i + 1}: {err}") from err

    N = absc.integer("N") if absc.raw("N") else None
    if N is not None:
        _check(N >= 0, "abstraction.N", "must be an integer >= 0")
    budget = absc.integer("budget", "1000")
    _check(budget >= 1, "abstraction.budget", "must be an integer >= 1")

    spec_kind = sync.choice("kind", ("reach", "sequence"), "reach") \
        if sync.present else "reach"
    spec_mode = sync.choice("mode", ("hold", "robust"), "hold") \
        if sync.present else "hold"
    target_points: List[np.ndarray] = []
    if sync.present and sync.raw("targets"):
        for i, row in enumerate(_rows(sync.raw("targets"))):
            try:
                v = np.array([float(x) for x in row.split()])
            except ValueError:
                raise ConfigError(f"synthesis.targets: row {i + 1}: expected numbers")
            _check(len(v) == n, "synthesis.targets",
                   f"row {i + 1}: expected {n} values")
            target_points.append(v)
    max_hold = sync.integer("max_hold", "64") if sync.present else 64
    _check(max_hold >= 1, "synthesis.max_hold", "must be an integer >= 1")

    x0 = runc.floats("x0", n) if runc.present and runc.raw("x0") else None
    max_steps = runc.integer("max_steps", "500") if runc.present else 500
    _check(max_steps >= 1, "run.max_steps", "must be an integer >= 1")
    seed = runc.integer("seed", "1") if runc.present else 1
    samples = runc.integer("samples", "1000") if runc.present else 1000
    _check(samples >= 0, "run.samples", "must be nonnegative")

    if r > 0:
        k = r / tau
        _check(abs(k - round(k)) < 1e-9, "system.r",
               f"must be an integer multiple of tau={tau}")

    cfg = AppConfig(n=n, m=m, rhs=rhs, state_lo=state_lo, state_hi=state_hi,
                    input_lo=input_lo, input_hi=input_hi, theta=theta, r=r,
                    xi0_rows=xi0_rows, tau=tau, variant=variant, eta=eta, d=d,
                    input_quantizer=input_quantizer, mu=mu, input_eta=input_eta,
                    input_d=input_d, lipschitz=lipschitz, steps=steps,
                    growth_scale=growth_scale, zoom=zoom, N=N, budget=budget,
                    spec_kind=spec_kind, spec_mode=spec_mode,
                    target_points=target_points, max_hold=max_hold,
                    x0=x0, max_steps=max_steps, seed=seed, samples=samples)
    try:
        cfg.system()
    except (ValueError, ExprError) as err:
        raise ConfigError(f"system: {err}") from err
    return cfg
