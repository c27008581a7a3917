"""Command-line front end: optimize / partition / fabricate / pipeline /
report / dump-config.

Exit codes: 0 success, 2 input error, 3 optimization failure, 4 partition
failure, 5 fabrication failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig
from .mesh import MeshError
from .pipeline import (
    EXIT_FABRICATE,
    EXIT_INPUT,
    EXIT_OK,
    StageFailure,
    load_input_mesh,
    load_labeling,
    load_planes,
    run_fabricate,
    run_optimize,
    run_partition,
    run_pipeline,
)
from .report import write_reports
from .structure import StructureError, ZomeStructure

OUTPUT_DIR_ENV = "ZOMESHELL_OUTPUT_DIR"


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        config = PipelineConfig.load(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    elif os.environ.get(OUTPUT_DIR_ENV):
        overrides["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    return config.with_overrides(**overrides)


def _load_structure(path) -> ZomeStructure:
    try:
        return ZomeStructure.from_json(Path(path).read_text())
    except FileNotFoundError as exc:
        raise StageFailure("input", EXIT_INPUT, str(exc)) from exc
    except (StructureError, json.JSONDecodeError) as exc:
        raise StageFailure("input", EXIT_INPUT,
                           f"bad structure file {path}: {exc}") from exc


def cmd_dump_config(args) -> int:
    config = _load_config(args)
    text = config.to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = _load_config(args)
    mesh = load_input_mesh(args.mesh)
    run_optimize(config, mesh, config.output_dir)
    print(f"structure written to {config.output_dir}/structure.json")
    return EXIT_OK


def cmd_partition(args) -> int:
    config = _load_config(args)
    mesh = load_input_mesh(args.mesh)
    z = _load_structure(args.structure)
    _, labeling, planes = run_partition(config, mesh, z, config.output_dir)
    print(
        f"{labeling.partition_count()} piece(s), {len(planes)} cut plane(s) "
        f"written to {config.output_dir}"
    )
    return EXIT_OK


def cmd_fabricate(args) -> int:
    config = _load_config(args)
    mesh = load_input_mesh(args.mesh)
    z = _load_structure(args.structure)
    from .pipeline import build_partition_problem

    problem = build_partition_problem(config, mesh, z)
    label_ids, labeling = load_labeling(args.labeling, problem)
    planes = load_planes(args.planes, label_ids)
    summary = run_fabricate(config, mesh, z, labeling, planes, label_ids,
                            config.output_dir)
    _print_summary(summary)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _load_config(args)
    status = run_pipeline(config, args.mesh, config.output_dir, log=print)
    summary = json.loads(
        (Path(config.output_dir) / "summary.json").read_text()
    )
    _print_summary(summary)
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_config(args)
    z = _load_structure(args.structure)
    reports = write_reports(config.output_dir, z, args.shell_volume,
                            model=config.cost_model())
    print(
        f"{reports['bom'].total_struts} strut(s), "
        f"{reports['bom'].total_balls} ball(s); "
        f"total {reports['cost']['total_usd']:.2f} USD, "
        f"{reports['time']['overall_hours']:.2f} h"
    )
    return EXIT_OK


def _print_summary(summary: dict) -> None:
    print(f"pieces: {summary['pieces']}")
    print(f"shell volume: {summary['shell_volume_mm3']:.0f} mm^3")
    print(f"struts: {summary['struts']}, balls: {summary['balls']}")
    print(f"tenons per piece: {summary['tenons']}")
    print(f"estimated cost: {summary['total_cost_usd']:.2f} USD")
    print(f"estimated time: {summary['overall_hours']:.2f} h")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zomeshell",
        description="Plan a hybrid Zometool-core / 3D-printed-shell build "
                    "from a watertight mesh.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mesh=True):
        if mesh:
            p.add_argument("mesh", help="watertight OBJ/STL input mesh")
        p.add_argument("--config", help="JSON config file (see dump-config)")
        p.add_argument("--out", help=f"output directory (or ${OUTPUT_DIR_ENV})")
        p.add_argument("--seed", type=int, help="override the RNG seed")

    p = sub.add_parser("optimize", help="fit the internal strut structure")
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("partition", help="split the shell into printable pieces")
    common(p)
    p.add_argument("--structure", required=True, help="structure.json path")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("fabricate", help="cut pieces, place tenons, report")
    common(p)
    p.add_argument("--structure", required=True)
    p.add_argument("--labeling", required=True)
    p.add_argument("--planes", required=True)
    p.set_defaults(func=cmd_fabricate)

    p = sub.add_parser("pipeline", help="run all stages with caching")
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", help="regenerate reports from a structure")
    common(p, mesh=False)
    p.add_argument("--structure", required=True)
    p.add_argument("--shell-volume", type=float, default=0.0,
                   help="shell volume in mm^3 for print cost/time")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dump-config", help="print the full configuration")
    common(p, mesh=False)
    p.add_argument("-o", "--output", help="write to a file instead of stdout")
    p.set_defaults(func=cmd_dump_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, FileNotFoundError, MeshError) as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"error [fabricate]: {exc}", file=sys.stderr)
        return EXIT_FABRICATE


if __name__ == "__main__":
    sys.exit(main())
