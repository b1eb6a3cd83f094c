"""Command-line entry point: ``abpcap <command> [options]``.

Exit status is 0 on success, 1 on malformed input and 2 when an inequality
violation is found (a replay file is written in that case).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__, constants
from .errors import ABPError, InputError

COMMANDS = ("partition", "check-abp", "phi-scan", "capillary", "neumann-chain", "fuzz")


def default_tolerances() -> dict:
    from .neumann import CHAIN_CONSTANT

    tol = {k: float(v) for k, v in vars(constants).items() if k.isupper() and isinstance(v, float)}
    tol["CHAIN_CONSTANT"] = float(CHAIN_CONSTANT)
    return tol


@dataclass
class RunConfig:
    command: str
    scene: Optional[str] = None
    seed: int = 0
    lam: Optional[float] = None
    lambda_grid: int = 257
    samples: int = 0
    out_json: Optional[str] = None
    out_csv: Optional[str] = None
    out_svg: Optional[str] = None
    replay: Optional[str] = None
    tolerances: dict = field(default_factory=default_tolerances)
    trials: int = 1000
    kind: str = "abp"
    mesh_h: float = 0.05


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _read_scene(path: Optional[str]) -> tuple[dict, str]:
    if path is None:
        raise InputError("--scene is required for this command")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read scene: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"scene is not valid JSON: {exc}") from exc
    return obj, hashlib.sha256(raw).hexdigest()


def _load_contacts(path):
    from .convexbody import ContactConfig
    from .schemas import CONTACT_SCENE, validate

    obj, digest = _read_scene(path)
    validate(obj, CONTACT_SCENE, "contact scene")
    return ContactConfig.from_json(obj), obj, digest


def _load_capillary(path, snap):
    from .capillary import CapillaryScene
    from .schemas import CAPILLARY_SCENE, validate

    obj, digest = _read_scene(path)
    validate(obj, CAPILLARY_SCENE, "capillary scene")
    obj = dict(obj)
    obj.setdefault("snap", snap)
    return CapillaryScene.from_json(obj), obj, digest


def _require_lambda(cfg: RunConfig) -> float:
    if cfg.lam is None:
        raise InputError("--lambda is required for this command")
    if not -1.0 < cfg.lam < 1.0:
        raise InputError("--lambda must lie in (-1, 1)")
    return cfg.lam


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _cmd_partition(cfg: RunConfig):
    from .partition import build_cells
    from .svg import render_partition

    contacts, _, digest = _load_contacts(cfg.scene)
    part = build_cells(contacts)
    result = part.to_json()
    result["active"] = list(part.active)
    _write(cfg.out_svg, render_partition(part, cfg.lam))
    return digest, result, False, None


def _cmd_check_abp(cfg: RunConfig):
    from .abp import abp_measure_exact, abp_measure_mc
    from .geom2d import cap_volume
    from .partition import build_cells
    from .svg import render_partition

    lam = _require_lambda(cfg)
    contacts, scene, digest = _load_contacts(cfg.scene)
    part = build_cells(contacts)
    exact = abp_measure_exact(part, lam, 1.0)
    cap = cap_volume(2, lam, 1.0)
    margin = exact.value - cap
    result = {
        "lambda": lam,
        "measure": exact.value,
        "cap": cap,
        "margin": margin,
        "per_cell": list(exact.per_cell),
    }
    if cfg.samples > 0:
        mc = abp_measure_mc(contacts, lam, 1.0, cfg.samples, cfg.seed)
        result["monte_carlo"] = {
            "value": mc.value,
            "stderr": mc.stderr,
            "samples": cfg.samples,
            "agrees": abs(mc.value - exact.value) <= 3 * mc.stderr,
        }
    _write(cfg.out_svg, render_partition(part, lam))
    violated = margin < -cfg.tolerances["INEQ_TOL"]
    return digest, result, violated, {"scene": scene, "lambda": lam}


def _cmd_phi_scan(cfg: RunConfig):
    from .abp import phi_scan
    from .partition import build_cells
    from .svg import render_partition

    contacts, scene, digest = _load_contacts(cfg.scene)
    part = build_cells(contacts)
    table = phi_scan(part, cfg.lambda_grid)
    if cfg.out_csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "phi_K", "phi_H", "margin", "crossing_count"])
        for lam, pk, ph, mg, cc in table.rows():
            writer.writerow([repr(lam), repr(pk), repr(ph), repr(mg), cc])
        _write(cfg.out_csv, buf.getvalue())
    tol = cfg.tolerances["INEQ_TOL"]
    end_err = max(abs(table.endpoints[0] - 2 * math.pi), abs(table.endpoints[1]))
    result = {
        "grid_size": cfg.lambda_grid,
        "min_margin": table.min_margin,
        "endpoints": list(table.endpoints),
        "max_derivative_error": table.max_derivative_error,
        "derivative_checks": int(len(table.derivative)),
    }
    _write(cfg.out_svg, render_partition(part, cfg.lam))
    violated = table.min_margin < -tol or end_err > tol
    return digest, result, violated, {"scene": scene}


def _cmd_capillary(cfg: RunConfig):
    from .capillary import capillary_energy
    from .svg import render_scene

    scene, obj, digest = _load_capillary(cfg.scene, cfg.tolerances["SNAP_TOL"])
    e = capillary_energy(scene)
    result = asdict(e)
    result["wetted_edges"] = list(e.wetted_edges)
    result["lambda"] = scene.lam
    _write(cfg.out_svg, render_scene(scene, e))
    return digest, result, e.margin < -cfg.tolerances["INEQ_TOL"], {"scene": obj}


def _cmd_neumann_chain(cfg: RunConfig):
    from .neumann import abp_chain_report, build_marked_mesh, solve_neumann
    from .svg import render_mesh

    scene, obj, digest = _load_capillary(cfg.scene, cfg.tolerances["SNAP_TOL"])
    samples = cfg.samples or 100_000
    mesh = build_marked_mesh(scene.droplet, scene.obstacle, cfg.mesh_h, scene.snap)
    sol = solve_neumann(mesh, scene.lam)
    report = abp_chain_report(sol, samples, cfg.seed, cfg.mesh_h, cfg.tolerances["CHAIN_CONSTANT"])
    result = report.to_json()
    result.update(
        {
            "samples": samples,
            "vertices": int(len(mesh.vertices)),
            "min_angle": mesh.min_angle,
            "residual": sol.residual,
        }
    )
    if cfg.out_svg:
        from .abp import sample_disk
        from .neumann import _TouchIndex

        xi = sample_disk(np.random.default_rng(cfg.seed), min(samples, 20_000), 1.0)
        idx = _TouchIndex(mesh.vertices, np.asarray(sol.u), np.arange(len(sol.u))).argmin(xi)
        _write(cfg.out_svg, render_mesh(mesh, np.bincount(idx, minlength=len(sol.u))))
    violated = not (report.upper_ok and report.lower_ok)
    return digest, result, violated, {"scene": obj, "mesh_h": cfg.mesh_h}


def _cmd_fuzz(cfg: RunConfig):
    from .abp import GeneratorSpec, fuzz_abp
    from .capillary import fuzz_capillary

    spec = {"kind": cfg.kind, "trials": cfg.trials, "lambda": cfg.lam}
    digest = hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()
    tol = cfg.tolerances["INEQ_TOL"]
    if cfg.kind == "capillary":
        result = fuzz_capillary(cfg.trials, cfg.seed)
        bad = [v for v in result["violations"] if v["margin"] < -tol]
    else:
        gen = GeneratorSpec(
            lam=cfg.lam,
            equal_normals=cfg.kind == "facet",
            phi_grid=cfg.lambda_grid if cfg.kind != "abp-fast" else 0,
        )
        result = fuzz_abp(gen, cfg.trials, cfg.seed).to_json()
        bad = result["violations"]
    return digest, result, bool(bad), {"violations": bad, "seed": cfg.seed}


HANDLERS = {
    "partition": _cmd_partition,
    "check-abp": _cmd_check_abp,
    "phi-scan": _cmd_phi_scan,
    "capillary": _cmd_capillary,
    "neumann-chain": _cmd_neumann_chain,
    "fuzz": _cmd_fuzz,
}


def run(cfg: RunConfig, stdout=None) -> int:
    from .schemas import validate_report

    stdout = stdout or sys.stdout
    try:
        digest, result, violated, replay = HANDLERS[cfg.command](cfg)
    except (ABPError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = {
        "command": cfg.command,
        "version": __version__,
        "seed": int(cfg.seed),
        "input_sha256": digest,
        "tolerances": dict(sorted(cfg.tolerances.items())),
        "status": "violation" if violated else "ok",
        "result": json.loads(dumps(result)),
    }
    validate_report(report)
    text = dumps(report)
    if cfg.out_json:
        _write(cfg.out_json, text)
    else:
        stdout.write(text)
    if violated:
        path = cfg.replay or ((cfg.out_json + ".replay.json") if cfg.out_json else "abpcap-replay.json")
        _write(path, dumps({"command": cfg.command, "seed": cfg.seed, "replay": replay}))
        return 2
    return 0


def _parse_override(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VAL, got {text!r}")
    key, val = text.split("=", 1)
    try:
        return key.strip(), float(val)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"tolerance {key} needs a number") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abpcap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"abpcap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scene")
        p.add_argument("--seed", type=int, default=0)
        grid = p.add_mutually_exclusive_group()
        grid.add_argument("--lambda", dest="lam", type=float)
        grid.add_argument("--lambda-grid", type=int, default=257)
        p.add_argument("--samples", type=int, default=0)
        p.add_argument("--out-json")
        p.add_argument("--out-csv")
        p.add_argument("--out-svg")
        p.add_argument("--replay")
        p.add_argument("--tol-override", action="append", type=_parse_override, default=[])
        if name == "fuzz":
            p.add_argument("--trials", type=int, default=1000)
            p.add_argument("--kind", choices=["abp", "abp-fast", "facet", "capillary"], default="abp")
        if name == "neumann-chain":
            p.add_argument("--mesh-h", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tolerances = default_tolerances()
    for key, val in args.tol_override:
        if key not in tolerances:
            print(f"error: unknown tolerance {key}", file=sys.stderr)
            return 1
        tolerances[key] = val
    cfg = RunConfig(
        command=args.command,
        scene=args.scene,
        seed=args.seed,
        lam=args.lam,
        lambda_grid=args.lambda_grid,
        samples=args.samples,
        out_json=args.out_json,
        out_csv=args.out_csv,
        out_svg=args.out_svg,
        replay=args.replay,
        tolerances=tolerances,
        trials=getattr(args, "trials", 1000),
        kind=getattr(args, "kind", "abp"),
        mesh_h=getattr(args, "mesh_h", 0.05),
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
