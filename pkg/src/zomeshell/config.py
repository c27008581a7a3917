"""Pipeline configuration: one flat, versioned, JSON-serializable record
holding every tunable with its published default."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .anneal import AnnealParams, CollisionParams
from .connectors import TenonParams
from .energy import EnergyWeights, ForbiddenZone
from .partition import PrintVolume
from .report import CostModel

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    # lattice scale
    b0_mm: float = 47.3
    # forbidden zone (mm / penalty units)
    d_min_mm: float = 16.0
    d_max_mm: float = 47.3
    f_max: float = 70.0
    f_thick: float = 90.0
    # structure energy weights
    w_fid: float = 1.0
    w_reg: float = 100.0
    w_val: float = 1.0
    w_sim: float = 1.0
    # annealing schedule
    t_init: float = 1.0
    t_end: float = 0.1
    cooling: float = 0.99
    iterations_per_step: int = 100
    rng_seed: int = 0
    # collision radii and clearance (mm)
    ball_radius_mm: float = 9.2
    strut_radius_mm: float = 4.0
    collision_clearance_mm: float = 1.0
    # shell partition
    w_data: float = 1.0
    w_smoothness: float = 10.0
    w_saliency: float = 5.0
    saliency_path: str = ""
    print_volume_mm: tuple = (200.0, 200.0, 200.0)
    svm_penalty: float = 10.0
    # shell construction
    voxel_cell_mm: float = 4.0
    shell_thickness_mm: float = 16.0
    # connectors
    tenon_max_len_mm: float = 47.3
    tenon_depth_mm: float = 8.0
    tenon_clearance_mm: float = 0.2
    # reporting
    filament_usd_per_meter: float = 0.56
    strut_usd: float = 0.19
    ball_usd: float = 0.29
    filament_cross_section_mm2: float = 2.405
    print_speed_mm3_per_hour: float = 15000.0
    zome_assembly_sec_per_element: float = 30.0
    # artifacts
    output_dir: str = "out"

    # ------------------------------------------------------ typed views

    def forbidden_zone(self) -> ForbiddenZone:
        return ForbiddenZone(self.d_min_mm, self.d_max_mm, self.f_max, self.f_thick)

    def energy_weights(self) -> EnergyWeights:
        return EnergyWeights(self.w_fid, self.w_reg, self.w_val, self.w_sim)

    def anneal_params(self) -> AnnealParams:
        return AnnealParams(self.t_init, self.t_end, self.cooling,
                            self.iterations_per_step, self.rng_seed)

    def collision_params(self) -> CollisionParams:
        return CollisionParams(self.ball_radius_mm, self.strut_radius_mm,
                               self.collision_clearance_mm)

    def print_volume(self) -> PrintVolume:
        return PrintVolume(*self.print_volume_mm)

    def tenon_params(self) -> TenonParams:
        return TenonParams(
            depth_mm=self.tenon_depth_mm,
            clearance_mm=self.tenon_clearance_mm,
            ball_radius_mm=self.ball_radius_mm,
            strut_radius_mm=self.strut_radius_mm,
        )

    def cost_model(self) -> CostModel:
        return CostModel(
            self.filament_usd_per_meter, self.strut_usd, self.ball_usd,
            self.filament_cross_section_mm2, self.print_speed_mm3_per_hour,
            self.zome_assembly_sec_per_element,
        )

    # ---------------------------------------------------- serialization

    def to_json_dict(self) -> dict:
        doc = {"schema_version": CONFIG_SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            doc[f.name] = list(value) if isinstance(value, tuple) else value
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        version = doc.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema: {version}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        if "print_volume_mm" in doc:
            doc["print_volume_mm"] = tuple(doc["print_volume_mm"])
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        from pathlib import Path

        return cls.from_json(Path(path).read_text())

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        """Copy with the given non-None fields replaced (CLI flag overrides)."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return dataclasses.replace(self, **updates)
