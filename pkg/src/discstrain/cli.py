"""Command line front end.

``discstrain simulate <scenario>`` runs a benchmark (or a d_cr sweep of it)
and writes ``curve.csv``, field dumps and ``manifest.json`` per case.
``discstrain matpoint`` drives a single material point along a strain path
and, for uniaxial paths, sets the closed-form reference beside the kernel.

Exit codes: 0 success, 2 bad input, 3 non-convergence, 4 internal error.
The default output root is ``$DISCSTRAIN_OUT`` (``./runs`` if unset).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from ._yaml import load_yaml
from .constitutive import MaterialParams
from .fem.mesh import MeshError
from .fem.output import fmt, write_field_csv, write_vtk
from .fem.solver import NonConvergenceError, RunResult, run_history
from .matpoint import drive_strain_path, drive_uniaxial, load_path_file, sample_path, write_path_csv
from .oracle import OracleScopeError, refine_history, standard_uniaxial_cycle, uniaxial_closed_form
from .scenarios import TABLE_PARAMS, Scenario, ScenarioError, load_scenario

__all__ = ["main", "EXIT_OK", "EXIT_BAD_INPUT", "EXIT_NONCONVERGED", "EXIT_INTERNAL", "OUT_ENV"]

EXIT_OK, EXIT_BAD_INPUT, EXIT_NONCONVERGED, EXIT_INTERNAL = 0, 2, 3, 4
OUT_ENV = "DISCSTRAIN_OUT"
CURVE = "curve.csv"
MANIFEST = "manifest.json"

log = logging.getLogger("discstrain")


class BadInput(Exception):
    """User input rejected before anything is written."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _parse_dcr(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise BadInput(f"d_cr {text!r} is not a number") from None
    if not 0.0 < v <= 1.0:
        raise BadInput(f"d_cr must lie in (0, 1], got {v}")
    return v


def _case_dir_name(d_cr: float) -> str:
    return f"dcr_{d_cr:.2f}"


def _output_root(arg: str | None, name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV, "runs")) / name


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseJob:
    """Everything a worker needs to run one case (picklable)."""

    source: str
    overrides: tuple[str, ...]
    d_cr: float | None
    out: str
    vtk: bool


def _curve_rows(sc: Scenario, res: RunResult) -> tuple[list[str], list[list[str]]]:
    probes = [p.name for p in sc.benchmark.probes]
    s, d, sign = sc.benchmark.reaction
    area = sc.benchmark.area
    header = ["step", "time", *probes, "reaction"] + (["avg_stress"] if area else [])
    rows = [["0", fmt(0.0), *[fmt(0.0)] * len(probes), fmt(0.0)] + ([fmt(0.0)] if area else [])]
    for rec in res.steps:
        r = sign * rec.reactions[s][0 if d == "x" else 1]
        row = [str(rec.step), fmt(float(rec.time)), *[fmt(rec.probes[p]) for p in probes], fmt(r)]
        if area:
            row.append(fmt(r / area))
        rows.append(row)
    return header, rows


def _stats(res: RunResult) -> dict:
    steps = res.steps
    return {
        "steps_completed": len(steps),
        "iterations": res.total_iterations,
        "cuts": res.total_cuts,
        "max_cuts_per_step": max((s.cuts for s in steps), default=0),
        "loose_increments": res.total_loose,
        "damped_increments": res.total_damped,
        "max_damping": max((s.damping for s in steps), default=0.0),
        "max_residual": max((s.residual for s in steps), default=0.0),
        "max_balance": max((s.balance for s in steps), default=0.0),
        "triggered": [[k, t] for k, t in res.triggered],
    }


def run_case(job: CaseJob) -> tuple[int, str]:
    """Run one case and write its directory; returns (exit code, message)."""
    t0 = time.perf_counter()
    sc = load_scenario(job.source, job.overrides)
    if job.d_cr is not None:
        sc = sc.with_dcr(job.d_cr)
    out = Path(job.out)
    out.mkdir(parents=True, exist_ok=True)
    status, message, code = "completed", "", EXIT_OK
    try:
        res = run_history(sc.mesh, sc.histories(), sc.params, sc.config(), sc.benchmark.probes,
                          triggers=sc.triggers())  # fmt: skip
    except NonConvergenceError as exc:
        res = exc.partial
        status, message, code = "non-converged", str(exc), EXIT_NONCONVERGED

    files = []
    header, rows = _curve_rows(sc, res)
    with open(out / CURVE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    files.append(CURVE)
    for k in sorted(res.snapshots):
        name = f"fields_step{k:04d}.csv"
        write_field_csv(out / name, res.snapshots[k])
        files.append(name)
        if job.vtk:
            name = f"fields_step{k:04d}.vtk"
            write_vtk(out / name, sc.mesh, res.snapshots[k])
            files.append(name)

    mesh = sc.mesh
    manifest = {
        "scenario": sc.name,
        "version": __version__,
        "status": status,
        "message": message,
        "parameters": sc.params.as_dict(),
        "overrides": list(job.overrides),
        "protocol": sc.protocol,
        "histories": [
            {"set": h.node_set, "dof": h.dof, "times": list(h.times), "values": list(h.values)}
            for h in (res.histories or sc.histories())
        ],
        "mesh": {"checksum": mesh.checksum(), "nodes": mesh.n_nodes, "elements": len(mesh.elements),
                 "geometry": sc.benchmark.geometry},
        "steps": sc.steps,
        "convergence": _stats(res),
        "files": files,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }  # fmt: skip
    _write_atomic(out / MANIFEST, json.dumps(manifest, indent=2, default=float) + "\n")
    return code, message or f"{sc.name} d_cr={sc.params.d_cr:g}: {len(res.steps)} steps -> {out}"


def cmd_simulate(args: argparse.Namespace) -> int:
    overrides = list(args.set or [])
    if args.refine is not None:
        overrides.append(f"mesh.refinement={args.refine}")
    if args.steps is not None:
        overrides.append(f"steps={args.steps}")
    if args.dump:
        try:
            steps = [int(s) for s in args.dump.split(",")]
        except ValueError:
            raise BadInput(f"--dump expects comma-separated step numbers, got {args.dump!r}") from None
        overrides.append(f"dump_steps={steps}")
    sc = load_scenario(args.scenario, overrides)  # validates everything before writing

    if args.sweep_dcr is not None:
        values = sc.sweep if args.sweep_dcr == "" else [_parse_dcr(v) for v in args.sweep_dcr.split(",")]
        if not values:
            raise BadInput("scenario has no d_cr sweep; pass --sweep-dcr v1,v2,...")
    elif args.dcr is not None:
        values = [_parse_dcr(args.dcr)]
    else:
        values = [None]
    for v in values:
        if v is not None:
            sc.with_dcr(v)
    names = [_case_dir_name(v) for v in values if v is not None]
    if len(set(names)) != len(names):
        raise BadInput("sweep values must differ at two decimals")

    root = _output_root(args.out, sc.name)
    sweep = args.sweep_dcr is not None
    jobs = [
        CaseJob(str(args.scenario), tuple(overrides), v, str(root / _case_dir_name(v) if sweep else root), args.vtk)
        for v in values
    ]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(jobs))) as pool:
            outcomes = list(pool.map(run_case, jobs))
    else:
        outcomes = [run_case(j) for j in jobs]
    for code, msg in outcomes:
        (print if code == EXIT_OK else log.error)(msg)
    if sweep:
        index = {
            "scenario": sc.name,
            "cases": [
                {"d_cr": v, "directory": _case_dir_name(v), "exit_code": c} for v, (c, _) in zip(values, outcomes)
            ],
            "files": [f"{_case_dir_name(v)}/{MANIFEST}" for v in values],
        }
        _write_atomic(root / MANIFEST, json.dumps(index, indent=2) + "\n")
    return max(c for c, _ in outcomes)


# ---------------------------------------------------------------------------
# matpoint
# ---------------------------------------------------------------------------

_PARAM_FLAGS = ("E", "nu", "sigma_y", "a", "b", "d_cr")
DEFAULT_DCR = 0.45


def _params_from_args(args: argparse.Namespace) -> MaterialParams:
    values = dict(TABLE_PARAMS[args.preset])
    values["d_cr"] = DEFAULT_DCR
    if args.params:
        try:
            doc = load_yaml(Path(args.params).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise BadInput(f"cannot read parameters: {exc}") from None
        if not isinstance(doc, dict):
            raise BadInput(f"{args.params}: expected a mapping")
        unknown = set(doc) - set(_PARAM_FLAGS)
        if unknown:
            raise BadInput(f"{args.params}: unknown keys {sorted(unknown)}")
        values.update(doc)
    for k in _PARAM_FLAGS:
        v = getattr(args, k)
        if v is not None:
            values[k] = v
    try:
        return MaterialParams(**{k: float(v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise BadInput(f"invalid material parameters: {exc}") from None


def _path_from_args(args: argparse.Namespace, params: MaterialParams) -> dict:
    if args.template == "uniaxial":
        return {"mode": "uniaxial", "knots": standard_uniaxial_cycle(params), "steps": args.substeps or 512}
    try:
        path = load_path_file(args.path)
    except OSError as exc:
        raise BadInput(f"cannot read path file: {exc}") from None
    except ValueError as exc:
        raise BadInput(str(exc)) from None
    if args.substeps:
        path["steps"] = args.substeps
    if path["mode"] == "uniaxial" and path["knots"][0] != 0.0:
        raise BadInput("uniaxial paths start from the virgin state at zero strain")
    return path


def cmd_matpoint(args: argparse.Namespace) -> int:
    params = _params_from_args(args)
    path = _path_from_args(args, params)
    out = Path(args.out)
    if not out.parent.is_dir():
        raise BadInput(f"output directory {out.parent} does not exist")

    extra = {}
    summary = None
    if path["mode"] == "uniaxial":
        strains = refine_history(path["knots"], path["steps"])
        records = drive_uniaxial(params, strains)
        try:
            ref = uniaxial_closed_form(params, strains)
        except OracleScopeError as exc:
            print(f"oracle not applicable: {exc}", file=sys.stderr)
        else:
            s_ker = np.array([r.sigma.xx for r in records])
            s_ref = np.array(ref.stress)
            dev = float(np.max(np.abs(s_ker - s_ref)) / max(np.max(np.abs(s_ref)), params.sigma_y))
            extra = {"oracle_sig_xx": ref.stress, "oracle_damage": ref.damage, "oracle_segment": ref.regime}
            summary = dev
    else:
        records = drive_strain_path(params, sample_path(path["knots"], path["steps"]))
        print("oracle not applicable: closed form covers uniaxial-stress paths only", file=sys.stderr)

    tmp = out.with_name(f".{out.name}.tmp")
    write_path_csv(tmp, records, extra)
    os.replace(tmp, out)
    print(f"{len(records) - 1} increments -> {out}")
    if summary is not None:
        print(f"max relative deviation from closed form: {summary:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discstrain", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a benchmark scenario or a d_cr sweep")
    sim.add_argument("scenario", help="built-in name (opening_mode, mixed_mode, full_cycle) or a scenario file")
    grp = sim.add_mutually_exclusive_group()
    grp.add_argument("--dcr", help="critical damage for a single case")
    grp.add_argument("--sweep-dcr", nargs="?", const="", metavar="LIST",
                     help="comma-separated d_cr values; without a list, the scenario's sweep")  # fmt: skip
    sim.add_argument("--refine", type=int, help="mesh refinement level")
    sim.add_argument("--steps", type=int, help="number of load steps")
    sim.add_argument("--dump", metavar="STEPS", help="comma-separated steps with field dumps")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a scenario entry, e.g. material.a=90 (repeatable)")  # fmt: skip
    sim.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<scenario> or runs/<scenario>)")
    sim.add_argument("--vtk", action="store_true", help="also write legacy VTK field files")
    sim.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    sim.set_defaults(func=cmd_simulate)

    mp = sub.add_parser("matpoint", help="drive one material point along a strain path")
    src = mp.add_mutually_exclusive_group(required=True)
    src.add_argument("--path", help="path document (mode, knots, steps)")
    src.add_argument("--template", choices=["uniaxial"], help="built-in load-unload-reload-compress path")
    mp.add_argument("--out", required=True, help="CSV file to write")
    mp.add_argument("--params", help="YAML mapping with E, nu, sigma_y, a, b, d_cr")
    mp.add_argument("--preset", choices=sorted(TABLE_PARAMS), default="opening_mode",
                    help="material defaults before --params and flags")  # fmt: skip
    for k in _PARAM_FLAGS:
        flag = "--dcr" if k == "d_cr" else f"--{k.replace('_', '-')}"
        default = f" (default {DEFAULT_DCR})" if k == "d_cr" else ""
        mp.add_argument(flag, dest=k, type=float, help=f"override {k}{default}")
    mp.add_argument("--substeps", type=int, help="increments along the path (overrides the file)")
    mp.set_defaults(func=cmd_matpoint)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")  # fmt: skip
    try:
        return args.func(args)
    except (BadInput, ScenarioError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001 - anything else is a defect
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
