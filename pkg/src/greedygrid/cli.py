"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 resource-budget error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import PointCloudFormatError, RegistrationError, ResourceBudgetError
from .io import read_point_cloud, result_to_dict, write_json, write_result
from .metrics import PRESETS, EvalThresholds, evaluate
from .refine import IcpConfig, icp_refine
from .rotgrid import build_grid
from .solver import DEFAULT_MAX_CELLS, default_workers, register
from .voxel import VoxelConfig

log = logging.getLogger("greedygrid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class RunConfig:
    voxel_resolution: float | None = None
    angle_range: float = 90.0
    angle_step: float = 15.0
    pv: float = 5.0
    nv: float = -1.0
    engine: str = "fft"
    refine: str = "none"
    icp_variant: str = "point_to_point"
    icp_max_iter: int = 50
    icp_gate: float | None = None
    threads: int | None = None
    max_cells: int = DEFAULT_MAX_CELLS
    unit_scale: float = 1.0


# voxel resolution per dataset; the grid and cell values are shared
DATASET_PRESETS = {
    "kitti": {"voxel_resolution": 0.75},
    "eth": {"voxel_resolution": 0.60},
    "faustpartial": {"voxel_resolution": 0.06},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_register_args(p):
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--voxel-resolution", type=float, help="voxel edge in meters")
    p.add_argument("--preset", choices=sorted(DATASET_PRESETS))
    p.add_argument("--angle-range", type=float)
    p.add_argument("--angle-step", type=float)
    p.add_argument("--pv", type=float)
    p.add_argument("--nv", type=float)
    p.add_argument("--engine", choices=["fft", "direct"])
    p.add_argument("--refine", choices=["none", "icp"])
    p.add_argument("--icp-variant", choices=["point_to_point", "point_to_plane"])
    p.add_argument("--icp-max-iter", type=int)
    p.add_argument("--icp-gate", type=float, help="correspondence gate in meters (default 2 x VR)")
    p.add_argument("--threads", type=int)
    p.add_argument("--max-cells", type=int)
    p.add_argument("--unit-scale", type=float)
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--output", help="result JSON path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greedygrid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_register_args(sub.add_parser("register", help="register a source cloud onto a target"))

    ev = sub.add_parser("evaluate", help="score results against a benchmark manifest")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--results", required=True)
    ev.add_argument("--tau-r", type=float, help="rotation threshold, degrees")
    ev.add_argument("--tau-t", type=float, help="translation threshold, meters")
    ev.add_argument("--preset", choices=sorted(PRESETS))
    ev.add_argument("--report", help="output path; .csv writes per-pair rows, otherwise JSON")

    gb = sub.add_parser("generate-benchmark", help="cut scans into partial-view pairs")
    gb.add_argument("--scans", required=True, help="directory of PLY/XYZ scans")
    gb.add_argument("--out", required=True)
    gb.add_argument("--radius", type=float, default=1.5)
    gb.add_argument("--overlap-min", type=float, default=0.6)
    gb.add_argument("--overlap-eps", type=float, default=None)
    gb.add_argument("--hpr-radius-factor", type=float, default=10.0)
    gb.add_argument("--seed", type=int, default=0)
    gb.add_argument("--unit-scale", type=float, default=1.0)

    st = sub.add_parser("selftest", help="FFT-vs-direct oracle and synthetic recovery checks")
    st.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args) -> RunConfig:
    """Merge defaults, dataset preset, ``--config`` file and explicit flags, in that order."""
    values = asdict(RunConfig())
    if args.preset:
        values.update(DATASET_PRESETS[args.preset])
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        values.update(file_cfg)
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(**values)
    if cfg.voxel_resolution is None:
        raise UsageError("--voxel-resolution (or --preset) is required")
    if cfg.voxel_resolution <= 0 or cfg.angle_step <= 0 or cfg.angle_range < 0:
        raise UsageError("voxel resolution and angle step must be positive, angle range non-negative")
    if cfg.pv == cfg.nv:
        raise UsageError("--pv and --nv must differ")
    return cfg


def cmd_register(args) -> int:
    cfg = resolve_config(args)
    source = read_point_cloud(args.source, cfg.unit_scale)
    target = read_point_cloud(args.target, cfg.unit_scale)
    grid = build_grid(cfg.angle_range, cfg.angle_step)
    vcfg = VoxelConfig(cfg.voxel_resolution, cfg.pv, cfg.nv)
    result = register(
        source, target, grid, vcfg,
        engine=cfg.engine, workers=cfg.threads or default_workers(), max_cells=cfg.max_cells,
    )  # fmt: skip
    if cfg.refine == "icp":
        t0 = time.perf_counter()
        icp_cfg = IcpConfig(
            max_correspondence_dist_m=cfg.icp_gate or 2.0 * cfg.voxel_resolution,
            max_iterations=cfg.icp_max_iter,
            variant=cfg.icp_variant,
        )
        icp = icp_refine(source, target, result.coarse, icp_cfg)
        result.refined = icp.transform
        result.diagnostics["icp"] = {
            "converged": icp.converged,
            "iterations": icp.iterations,
            "final_mse": icp.mse_history[-1],
            "fitness": icp.fitness,
        }
        result.diagnostics["timings"]["refine"] = time.perf_counter() - t0
    config = asdict(cfg) | {"source": args.source, "target": args.target}
    if args.output:
        write_result(result, args.output, config)
    else:
        json.dump(result_to_dict(result, config), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.preset:
        th = PRESETS[args.preset]
        th = EvalThresholds(args.tau_r or th.tau_r_deg, args.tau_t or th.tau_t_m)
    elif args.tau_r is not None and args.tau_t is not None:
        th = EvalThresholds(args.tau_r, args.tau_t)
    else:
        raise UsageError("give --tau-r and --tau-t, or --preset")
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    with open(args.results) as fh:
        results = json.load(fh)
    report = evaluate(manifest, results, th)
    doc = report.to_dict()
    if args.report and args.report.endswith(".csv"):
        with open(args.report, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "rre_deg", "rte_m", "success"])
            for p in report.per_pair:
                writer.writerow([p.pair_id, p.rre_deg, p.rte_m, int(p.success)])
    elif args.report:
        write_json(args.report, doc)
    summary = {k: doc[k] for k in ("recall", "mean_rre_deg", "mean_rte_m", "n_pairs", "n_success")}
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .benchgen import GenerateParams, generate

    scan_dir = Path(args.scans)
    if not scan_dir.is_dir():
        raise UsageError(f"--scans must be a directory: {scan_dir}")
    paths = sorted(p for p in scan_dir.iterdir() if p.suffix.lower() in {".ply", ".xyz", ".txt", ".pts"})
    if not paths:
        raise RegistrationError(f"no scans found in {scan_dir}")
    scans = paths
    if args.unit_scale != 1.0:
        scans = [(p.stem, read_point_cloud(p, args.unit_scale)) for p in paths]
    params = GenerateParams(
        radius=args.radius,
        overlap_min=args.overlap_min,
        eps=args.overlap_eps,
        rng_seed=args.seed,
        hpr_radius_factor=args.hpr_radius_factor,
    )
    manifest = generate(args.out, scans, params)
    print(f"{len(manifest['pairs'])} pairs written to {Path(args.out) / 'manifest.json'}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    ok = run_selftest(seed=args.seed)
    return EXIT_OK if ok else EXIT_DATA


COMMANDS = {
    "register": cmd_register,
    "evaluate": cmd_evaluate,
    "generate-benchmark": cmd_generate,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"greedygrid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceBudgetError as exc:
        print(f"greedygrid: resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (PointCloudFormatError, RegistrationError, ValueError, OSError, KeyError) as exc:
        print(f"greedygrid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
