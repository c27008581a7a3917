"""Stage orchestration: optimize -> partition -> fabricate, with versioned
JSON artifacts and input-hash caching so unchanged stages are no-ops."""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from pathlib import Path

import numpy as np

from .anneal import TauEstimationError, anneal, estimate_target_tau
from .config import PipelineConfig
from .connectors import (
    ConnectorError,
    assign_tenons,
    emit_tenon_geometry,
    verify_layout,
)
from .cutplanes import CutPlane, DegenerateClassesError, train_all_planes
from .energy import FidelityCache, energy_total
from .mesh import MeshError, load_mesh, save_obj
from .partition import (
    Labeling,
    PartitionError,
    PartitionProblem,
    labeling_energy,
    load_saliency,
)
from .report import write_reports
from .shell import ShellError, build_solid_shell, cut_shell, validate_piece_fit
from .spatial import SurfaceQueryIndex
from .structure import (
    StructureError,
    ZomeStructure,
    classify_nodes,
    init_structure,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_OPTIMIZE = 3
EXIT_PARTITION = 4
EXIT_FABRICATE = 5

STATE_FILE = "state.json"
ENERGY_TOL = 1e-9


class StageFailure(RuntimeError):
    def __init__(self, stage: str, exit_code: int, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.exit_code = exit_code


# ------------------------------------------------------------------ hashing


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


OPTIMIZE_FIELDS = (
    "b0_mm", "d_min_mm", "d_max_mm", "f_max", "f_thick",
    "w_fid", "w_reg", "w_val", "w_sim",
    "t_init", "t_end", "cooling", "iterations_per_step", "rng_seed",
    "ball_radius_mm", "strut_radius_mm", "collision_clearance_mm",
)
PARTITION_FIELDS = (
    "w_data", "w_smoothness", "w_saliency", "saliency_path",
    "print_volume_mm", "svm_penalty", "shell_thickness_mm",
)
FABRICATE_FIELDS = (
    "voxel_cell_mm", "shell_thickness_mm",
    "tenon_max_len_mm", "tenon_depth_mm", "tenon_clearance_mm",
    "ball_radius_mm", "strut_radius_mm", "print_volume_mm",
    "filament_usd_per_meter", "strut_usd", "ball_usd",
    "filament_cross_section_mm2", "print_speed_mm3_per_hour",
    "zome_assembly_sec_per_element",
)


def stage_config_hash(config: PipelineConfig, fields) -> str:
    doc = config.to_json_dict()
    subset = {name: doc[name] for name in fields}
    return text_sha256(json.dumps(subset, sort_keys=True))


# ------------------------------------------------------------------- stages


def load_input_mesh(path):
    try:
        return load_mesh(path)
    except FileNotFoundError as exc:
        raise StageFailure("input", EXIT_INPUT, str(exc)) from exc
    except MeshError as exc:
        raise StageFailure("input", EXIT_INPUT, str(exc)) from exc


def run_optimize(config: PipelineConfig, mesh, out_dir) -> ZomeStructure:
    """Initialization, target-size estimation, and annealing; writes
    structure.json and energy_trace.csv (iteration, T, E, accepted)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    zone = config.forbidden_zone()
    collision = config.collision_params()
    try:
        index = SurfaceQueryIndex(mesh)
        z0 = init_structure(mesh, config.b0_mm, config.d_min_mm, index)
        try:
            tau = estimate_target_tau(z0, mesh, zone, collision,
                                      rng_seed=config.rng_seed)
        except TauEstimationError as exc:
            warnings.warn(
                f"target-size estimation stalled at similarity "
                f"{exc.best_similarity:.3f}; using fallback {exc.fallback_tau}"
            )
            tau = exc.fallback_tau
        cache = FidelityCache(index)
        trace = []
        z = anneal(z0, cache, zone, config.energy_weights(), tau,
                   config.anneal_params(), collision, trace=trace)
        # closing row: the returned structure is the best state visited
        final_energy = energy_total(z, cache, zone, config.energy_weights(), tau)
        last_iter = trace[-1][0] if trace else 0
        last_temp = trace[-1][1] if trace else config.t_init
        trace.append((last_iter + 1, last_temp, final_energy, True))
    except (StructureError, TauEstimationError) as exc:
        raise StageFailure("optimize", EXIT_OPTIMIZE, str(exc)) from exc
    (out_dir / "structure.json").write_text(z.to_json() + "\n")
    with open(out_dir / "energy_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "T", "E", "accepted"])
        for iteration, temp, energy, accepted in trace:
            writer.writerow([iteration, f"{temp:.17g}", f"{energy:.17g}",
                             int(accepted)])
    return z


def build_partition_problem(config: PipelineConfig, mesh,
                            z: ZomeStructure) -> PartitionProblem:
    outer, _ = classify_nodes(z)
    if not outer:
        raise StageFailure("partition", EXIT_PARTITION,
                           "structure has no outermost nodes")
    positions = np.array([z.node_position_mm(n) for n in outer])
    saliency = frozenset()
    if config.saliency_path:
        saliency = load_saliency(config.saliency_path, mesh)
    return PartitionProblem(mesh, outer, positions, config.w_data,
                            config.w_smoothness, config.w_saliency, saliency)


def run_partition(config: PipelineConfig, mesh, z: ZomeStructure, out_dir):
    """Print-volume-driven labeling plus one cut plane per adjacent label
    pair; writes labeling.json and planes.json."""
    from .partition import fit_partitions

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_partition_problem(config, mesh, z)
    try:
        labeling, w_final = fit_partitions(
            problem, config.print_volume(), config.shell_thickness_mm
        )
        planes = train_all_planes(mesh, labeling, problem, config.svm_penalty)
    except (PartitionError, DegenerateClassesError) as exc:
        raise StageFailure("partition", EXIT_PARTITION, str(exc)) from exc
    recomputed = labeling_energy(problem, labeling.labels)
    if abs(recomputed - labeling.energy) > ENERGY_TOL:
        raise StageFailure(
            "partition", EXIT_PARTITION,
            f"labeling energy {labeling.energy} does not recompute "
            f"({recomputed})"
        )
    doc = {
        "schema_version": 1,
        "label_ids": list(problem.label_ids),
        "labels": labeling.label_node_ids(problem),
        "energy": labeling.energy,
        "w_smoothness_final": w_final,
    }
    (out_dir / "labeling.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n"
    )
    planes_doc = {
        "schema_version": 1,
        "planes": [
            {
                **p.to_json_dict(),
                "label_pair_nodes": [problem.label_ids[i] for i in p.label_pair],
            }
            for p in planes
        ],
    }
    (out_dir / "planes.json").write_text(
        json.dumps(planes_doc, indent=1, sort_keys=True) + "\n"
    )
    return problem, labeling, planes


def load_labeling(path, problem: PartitionProblem = None):
    """(label_ids, Labeling with index labels); verifies the stored energy
    when the matching problem is supplied."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != 1:
        raise StageFailure("input", EXIT_INPUT,
                           f"unsupported labeling schema: {doc.get('schema_version')}")
    label_ids = list(doc["label_ids"])
    index_of = {nid: i for i, nid in enumerate(label_ids)}
    labels = np.array([index_of[nid] for nid in doc["labels"]], dtype=np.int64)
    labeling = Labeling(labels, float(doc["energy"]))
    if problem is not None:
        # the stored labeling was solved at the fit loop's final weight
        if "w_smoothness_final" in doc:
            problem.w_smoothness = float(doc["w_smoothness_final"])
        recomputed = labeling_energy(problem, labels)
        if abs(recomputed - labeling.energy) > ENERGY_TOL:
            raise StageFailure(
                "input", EXIT_INPUT,
                f"labeling energy {labeling.energy} does not recompute "
                f"({recomputed})"
            )
    return label_ids, labeling


def load_planes(path, label_ids) -> list:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != 1:
        raise StageFailure("input", EXIT_INPUT,
                           f"unsupported planes schema: {doc.get('schema_version')}")
    index_of = {nid: i for i, nid in enumerate(label_ids)}
    planes = []
    for pd in doc["planes"]:
        pair = tuple(index_of[nid] for nid in pd["label_pair_nodes"])
        planes.append(CutPlane(tuple(pd["normal"]), float(pd["offset"]), pair))
    return planes


def run_fabricate(config: PipelineConfig, mesh, z: ZomeStructure,
                  labeling: Labeling, planes, label_ids, out_dir) -> dict:
    """Shell build, piece cutting, tenon layout and geometry, and reports;
    writes piece OBJs, layout.json, the report files, and summary.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        index = SurfaceQueryIndex(mesh)
        shell = build_solid_shell(mesh, config.voxel_cell_mm,
                                  config.shell_thickness_mm, index)
        pieces = cut_shell(shell, labeling, planes)
        volume = config.print_volume()
        for piece in pieces:
            if not validate_piece_fit(piece, volume):
                raise StageFailure(
                    "fabricate", EXIT_FABRICATE,
                    f"piece {piece.label} does not fit the print volume"
                )
        label_to_node = {i: nid for i, nid in enumerate(label_ids)}
        layout = assign_tenons(z, pieces, label_to_node,
                               config.tenon_max_len_mm, config.tenon_params())
        verify_layout(z, layout, pieces)
        piece_files = {}
        for piece in pieces:
            out_mesh = emit_tenon_geometry(
                piece, layout.tenons_by_piece[piece.label],
                config.tenon_params()
            )
            out_mesh.validate()
            name = f"piece_{piece.label:03d}.obj"
            save_obj(out_mesh, out_dir / name)
            piece_files[piece.label] = name
    except StageFailure:
        raise
    except (ShellError, ConnectorError, MeshError) as exc:
        raise StageFailure("fabricate", EXIT_FABRICATE, str(exc)) from exc
    (out_dir / "layout.json").write_text(
        json.dumps(layout.to_json_dict(), indent=1, sort_keys=True) + "\n"
    )
    reports = write_reports(out_dir, z, shell.volume(), pieces, layout,
                            config.cost_model())
    summary = {
        "schema_version": 1,
        "pieces": len(pieces),
        "piece_files": {str(k): v for k, v in sorted(piece_files.items())},
        "piece_volumes_mm3": {
            str(p.label): p.volume_mm3 for p in pieces
        },
        "shell_volume_mm3": shell.volume(),
        "tenons": {str(k): v for k, v in layout.counts().items()},
        "struts": reports["bom"].total_struts,
        "balls": reports["bom"].total_balls,
        "total_cost_usd": reports["cost"]["total_usd"],
        "overall_hours": reports["time"]["overall_hours"],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True) + "\n"
    )
    return summary


# ------------------------------------------------------------------ caching


def _load_state(out_dir: Path) -> dict:
    path = out_dir / STATE_FILE
    if path.exists():
        doc = json.loads(path.read_text())
        if doc.get("schema_version") == 1:
            return doc
    return {"schema_version": 1, "stages": {}}


def _save_state(out_dir: Path, state: dict):
    (out_dir / STATE_FILE).write_text(
        json.dumps(state, indent=1, sort_keys=True) + "\n"
    )


def _stage_fresh(state: dict, out_dir: Path, name: str, input_hash: str) -> bool:
    entry = state["stages"].get(name)
    if not entry or entry.get("input_hash") != input_hash:
        return False
    for fname, digest in entry.get("outputs", {}).items():
        path = out_dir / fname
        if not path.exists() or file_sha256(path) != digest:
            return False
    return True


def _record_stage(state: dict, out_dir: Path, name: str, input_hash: str,
                  outputs) -> None:
    state["stages"][name] = {
        "input_hash": input_hash,
        "outputs": {f: file_sha256(out_dir / f) for f in outputs},
    }


def run_pipeline(config: PipelineConfig, mesh_path, out_dir,
                 log=lambda msg: None) -> dict:
    """All three stages with caching keyed on the hash of each stage's
    inputs; returns {stage: "cached" | "computed"}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh_hash = file_sha256(mesh_path)
    state = _load_state(out_dir)
    status = {}

    mesh = None

    def need_mesh():
        nonlocal mesh
        if mesh is None:
            mesh = load_input_mesh(mesh_path)
        return mesh

    opt_hash = text_sha256(
        mesh_hash + stage_config_hash(config, OPTIMIZE_FIELDS)
    )
    opt_outputs = ["structure.json", "energy_trace.csv"]
    if _stage_fresh(state, out_dir, "optimize", opt_hash):
        status["optimize"] = "cached"
    else:
        log("optimize: running")
        run_optimize(config, need_mesh(), out_dir)
        _record_stage(state, out_dir, "optimize", opt_hash, opt_outputs)
        _save_state(out_dir, state)
        status["optimize"] = "computed"
    log(f"optimize: {status['optimize']}")

    structure_hash = file_sha256(out_dir / "structure.json")
    saliency_hash = (
        file_sha256(config.saliency_path) if config.saliency_path else ""
    )
    part_hash = text_sha256(
        mesh_hash + structure_hash + saliency_hash
        + stage_config_hash(config, PARTITION_FIELDS)
    )
    part_outputs = ["labeling.json", "planes.json"]
    if _stage_fresh(state, out_dir, "partition", part_hash):
        status["partition"] = "cached"
    else:
        log("partition: running")
        z = ZomeStructure.from_json((out_dir / "structure.json").read_text())
        run_partition(config, need_mesh(), z, out_dir)
        _record_stage(state, out_dir, "partition", part_hash, part_outputs)
        _save_state(out_dir, state)
        status["partition"] = "computed"
    log(f"partition: {status['partition']}")

    fab_hash = text_sha256(
        mesh_hash + structure_hash
        + file_sha256(out_dir / "labeling.json")
        + file_sha256(out_dir / "planes.json")
        + stage_config_hash(config, FABRICATE_FIELDS)
    )
    fab_fixed = ["layout.json", "summary.json", "bom.csv", "bom.json",
                 "cost.json", "time.json", "assembly.json", "assembly.txt"]
    if _stage_fresh(state, out_dir, "fabricate", fab_hash):
        status["fabricate"] = "cached"
    else:
        log("fabricate: running")
        z = ZomeStructure.from_json((out_dir / "structure.json").read_text())
        label_ids, labeling = load_labeling(out_dir / "labeling.json")
        planes = load_planes(out_dir / "planes.json", label_ids)
        summary = run_fabricate(config, need_mesh(), z, labeling, planes,
                                label_ids, out_dir)
        outputs = fab_fixed + sorted(summary["piece_files"].values())
        _record_stage(state, out_dir, "fabricate", fab_hash, outputs)
        _save_state(out_dir, state)
        status["fabricate"] = "computed"
    log(f"fabricate: {status['fabricate']}")
    return status
