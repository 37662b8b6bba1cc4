"""Command line front end.

Subcommands mirror the library pipeline: ``abstract`` builds a finite model
from a config file, ``refine`` re-partitions selected cells, ``synthesize``
computes a controller, ``simulate`` runs the refined controller on the
concrete system, ``verify-frr`` samples the refinement relation, and
``export-dot`` renders a stored model for graphviz.

Model files on disk carry no dynamics, so every subcommand that needs the
concrete system rebuilds it from the config and cross-checks the stored
state/input/transition counts against the rebuild before trusting either.

Exit codes: 0 on success, 1 on domain failures (validation errors, refinement
violations, unsolvable specifications, aborted simulations), 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import numpy as np

from .abstraction import TransitionSystem
from .config import AppConfig, ConfigError, load_config
from .dynamics import IntegrationError
from .frr import RefinementMap, sample_frr_delayfree, sample_frr_timedelay
from .model_io import (ModelFormatError, export_dot, load_controller, load_ts,
                       write_controller, write_ts)
from .sim import export_trajectory, run_closed_loop
from .synthesis import SynthesisError, refine_controller, synthesize_reach, \
    synthesize_sequence


class _DomainError(Exception):
    pass


def _load_model_checked(cfg: AppConfig, path: str, refined: bool) -> TransitionSystem:
    stored = load_ts(path)
    ts = cfg.build_model(refined=refined)
    mism = []
    if len(stored.states) != len(ts.states):
        mism.append(f"states {len(stored.states)} != {len(ts.states)}")
    if len(stored.inputs) != len(ts.inputs):
        mism.append(f"inputs {len(stored.inputs)} != {len(ts.inputs)}")
    if stored.n_transitions != ts.n_transitions:
        mism.append(f"transitions {stored.n_transitions} != {ts.n_transitions}")
    if mism:
        raise _DomainError(f"model file {path} does not match the config "
                           f"rebuild: " + "; ".join(mism))
    return ts


def cmd_abstract(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    ts = cfg.build_model(refined=False)
    write_ts(ts, args.out)
    kind = "time-delay" if ts.kind == "timedelay" else "delay-free"
    print(f"abstract: wrote {kind} model with {len(ts.states)} states, "
          f"{len(ts.inputs)} inputs, {ts.n_transitions} transitions to {args.out}")
    return 0


def cmd_refine(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if not cfg.zoom:
        raise _DomainError("config has no abstraction.zoom assignments to apply")
    if cfg.is_timedelay():
        raise _DomainError("refine applies to delay-free models; time-delay "
                           "models consume zoom assignments at build time")
    _load_model_checked(cfg, args.model, refined=False)
    ts = cfg.build_model(refined=True)
    write_ts(ts, args.out)
    print(f"refine: wrote refined model with {len(ts.states)} states, "
          f"{ts.n_transitions} transitions to {args.out}")
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    refined = bool(cfg.zoom) and not cfg.is_timedelay()
    ts = _load_model_checked(cfg, args.model, refined=refined)
    if not cfg.target_points:
        raise _DomainError("synthesis.targets: no target points configured")
    spec = cfg.specification(ts)
    if spec.kind == "reach":
        ctrl, _ = synthesize_reach(ts, spec.targets[0], mode=cfg.spec_mode,
                                   max_hold=cfg.max_hold)
    else:
        ctrl = synthesize_sequence(ts, spec, mode=cfg.spec_mode,
                                   max_hold=cfg.max_hold)
    write_controller(ctrl, args.out)
    n_entries = sum(len(p) for p in ctrl.phases)
    print(f"synthesize: wrote {spec.kind} controller with {ctrl.n_phases} "
          f"phase(s), {n_entries} entries to {args.out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    refined = bool(cfg.zoom) and not cfg.is_timedelay()
    ts = cfg.build_model(refined=refined)
    ctrl = load_controller(args.controller)
    fmap = RefinementMap.from_ts(ts)
    sys_ = cfg.system()
    if cfg.is_timedelay():
        xi0 = sys_.xi0
        if xi0 is None:
            raise _DomainError("system.xi0: required to simulate a time-delay "
                               "system")
        traj, report = run_closed_loop(sys_, ctrl, fmap, xi0=xi0, tau=cfg.tau,
                                       max_steps=cfg.max_steps, steps=cfg.steps)
    else:
        if cfg.x0 is None:
            raise _DomainError("run.x0: required to simulate")
        traj, report = run_closed_loop(sys_, ctrl, fmap, x0=np.asarray(cfg.x0),
                                       tau=cfg.tau, max_steps=cfg.max_steps,
                                       steps=cfg.steps)
    export_trajectory(traj, args.out)
    print(f"simulate: wrote {len(traj.samples)} samples to {args.out}")
    print(report.as_text())
    if not report.completed:
        raise _DomainError(f"simulation did not complete: {report.reason}")
    return 0


def cmd_verify_frr(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    refined = bool(cfg.zoom) and not cfg.is_timedelay()
    ts = _load_model_checked(cfg, args.model, refined=refined)
    fmap = RefinementMap.from_ts(ts)
    sys_ = cfg.system()
    samples = cfg.samples if args.samples is None else args.samples
    seed = cfg.seed if args.seed is None else args.seed
    if cfg.is_timedelay():
        report = sample_frr_timedelay(sys_, ts, fmap, samples, seed)
    else:
        report = sample_frr_delayfree(sys_, ts, fmap, samples, seed)
    print(report.as_text())
    if not report.passed:
        raise _DomainError(f"refinement check found {len(report.violations)} "
                           f"violation(s)")
    return 0


def cmd_export_dot(args: argparse.Namespace) -> int:
    ts = load_ts(args.model)
    dot = export_dot(ts)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dot)
        print(f"export-dot: wrote {args.out}")
    else:
        sys.stdout.write(dot)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="symquant",
        description="symbolic models of sampled control systems via "
                    "logarithmic quantization")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("abstract", help="build a finite model from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_abstract)

    p = sub.add_parser("refine", help="re-partition selected cells of a model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_refine)

    p = sub.add_parser("synthesize", help="compute a controller for the "
                                          "configured specification")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("simulate", help="run the refined controller on the "
                                        "concrete system")
    p.add_argument("--config", required=True)
    p.add_argument("--controller", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify-frr", help="sample the refinement relation")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_verify_frr)

    p = sub.add_parser("export-dot", help="render a stored model as graphviz")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_export_dot)

    return ap


def main(argv: Optional[list] = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ModelFormatError, SynthesisError, IntegrationError,
            _DomainError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
