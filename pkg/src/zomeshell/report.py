"""Bill of materials, cost/time estimates, and assembly guide generation.

Print cost and time figures are transparent formula estimates, not slicer
simulations; the defaults are labeled non-normative and fully configurable.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field

from .golden import StrutColor, StrutSize, slot_directions
from .structure import ZomeStructure


@dataclass(frozen=True)
class CostModel:
    filament_usd_per_meter: float = 0.56
    strut_usd: float = 0.19
    ball_usd: float = 0.29
    filament_cross_section_mm2: float = 2.405  # 1.75 mm filament
    print_speed_mm3_per_hour: float = 15000.0
    zome_assembly_sec_per_element: float = 30.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"cost model field {name} must be positive")


@dataclass
class BOM:
    strut_counts: dict = field(default_factory=dict)  # (color, size) -> count
    total_balls: int = 0
    piece_volumes_mm3: dict = field(default_factory=dict)  # label -> mm^3

    @property
    def total_struts(self) -> int:
        return sum(self.strut_counts.values())

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "struts": [
                {"color": c.value, "size": s.value, "count": n}
                for (c, s), n in sorted(
                    self.strut_counts.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                )
            ],
            "total_struts": self.total_struts,
            "total_balls": self.total_balls,
            "piece_volumes_mm3": {
                str(k): float(v) for k, v in sorted(self.piece_volumes_mm3.items())
            },
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["color", "size", "count"])
        for color in StrutColor:
            for size in StrutSize:
                n = self.strut_counts.get((color, size), 0)
                if n:
                    writer.writerow([color.value, size.value, n])
        writer.writerow(["total_struts", "", self.total_struts])
        writer.writerow(["balls", "", self.total_balls])
        return out.getvalue()


def bom(z: ZomeStructure, pieces=None) -> BOM:
    counts = {}
    for sid in sorted(z.struts):
        spec = z.struts[sid].spec
        key = (spec.color, spec.size)
        counts[key] = counts.get(key, 0) + 1
    volumes = {}
    if pieces is not None:
        volumes = {p.label: p.volume_mm3 for p in pieces}
    return BOM(counts, len(z.nodes), volumes)


def cost_estimate(b: BOM, shell_volume_mm3: float, model: CostModel = CostModel()) -> dict:
    """Itemized cost report; zome part from element prices, print part from
    extruded filament length."""
    zome_cost = b.total_struts * model.strut_usd + b.total_balls * model.ball_usd
    filament_m = (shell_volume_mm3 / model.filament_cross_section_mm2) / 1000.0
    print_cost = filament_m * model.filament_usd_per_meter
    return {
        "schema_version": 1,
        "basis": "formula estimate (no slicer simulation)",
        "zome": {
            "struts": b.total_struts,
            "balls": b.total_balls,
            "strut_usd": model.strut_usd,
            "ball_usd": model.ball_usd,
            "cost_usd": zome_cost,
        },
        "print": {
            "shell_volume_mm3": float(shell_volume_mm3),
            "filament_m": filament_m,
            "usd_per_meter": model.filament_usd_per_meter,
            "cost_usd": print_cost,
        },
        "total_usd": zome_cost + print_cost,
    }


def time_estimate(b: BOM, shell_volume_mm3: float, model: CostModel = CostModel()) -> dict:
    print_hours = shell_volume_mm3 / model.print_speed_mm3_per_hour
    elements = b.total_struts + b.total_balls
    assembly_hours = elements * model.zome_assembly_sec_per_element / 3600.0
    return {
        "schema_version": 1,
        "basis": "formula estimate (no slicer simulation)",
        "print_hours": print_hours,
        "assembly_hours": assembly_hours,
        "elements": elements,
        "overall_hours": print_hours + assembly_hours,
    }


def assembly_guide(z: ZomeStructure, layout=None) -> dict:
    """Per-ball build order: breadth-first from the lowest node id, each entry
    listing occupied slots with strut spec and neighbor, plus tenon slots."""
    tenon_slots = {}
    if layout is not None:
        for _, tenon in layout.all_tenons():
            tenon_slots.setdefault(tenon.ball_id, []).append(
                tuple(tenon.direction)
            )
    entries = []
    seen = set()
    dirs = slot_directions()
    for start in sorted(z.nodes):
        if start in seen:
            continue
        queue = deque([start])
        seen.add(start)
        while queue:
            nid = queue.popleft()
            node = z.nodes[nid]
            struts = []
            for didx in sorted(node.slots):
                sid = node.slots[didx]
                s = z.struts[sid]
                other = s.node_b if s.node_a == nid else s.node_a
                struts.append({
                    "direction_index": didx,
                    "direction": [round(c, 12) for c in dirs[didx].unit_vector],
                    "color": s.spec.color.value,
                    "size": s.spec.size.value,
                    "neighbor": other,
                })
                if other not in seen:
                    seen.add(other)
                    queue.append(other)
            entries.append({
                "ball": nid,
                "position_mm": [float(c) for c in z.node_position_mm(nid)],
                "struts": struts,
                "tenon_directions": [
                    list(d) for d in sorted(tenon_slots.get(nid, []))
                ],
            })
    return {"schema_version": 1, "balls": entries}


def assembly_guide_text(guide: dict) -> str:
    lines = ["Assembly guide (breadth-first build order)", ""]
    for entry in guide["balls"]:
        pos = ", ".join(f"{c:.1f}" for c in entry["position_mm"])
        lines.append(f"Ball {entry['ball']} at ({pos}) mm:")
        for s in entry["struts"]:
            lines.append(
                f"  slot {s['direction_index']:>2}: {s['color']} {s['size']}"
                f" strut to ball {s['neighbor']}"
            )
        for d in entry["tenon_directions"]:
            vec = ", ".join(f"{c:+.0f}" for c in d)
            lines.append(f"  tenon slot toward ({vec})")
        if not entry["struts"] and not entry["tenon_directions"]:
            lines.append("  (no connections)")
    return "\n".join(lines) + "\n"


def write_reports(out_dir, z: ZomeStructure, shell_volume_mm3, pieces=None,
                  layout=None, model: CostModel = CostModel()) -> dict:
    """Emit bom.csv / bom.json / cost.json / time.json / assembly.{json,txt}
    under out_dir; returns the in-memory reports keyed by name."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    b = bom(z, pieces)
    cost = cost_estimate(b, shell_volume_mm3, model)
    time = time_estimate(b, shell_volume_mm3, model)
    guide = assembly_guide(z, layout)
    (out_dir / "bom.csv").write_text(b.to_csv())
    for name, doc in [("bom", b.to_json_dict()), ("cost", cost),
                      ("time", time), ("assembly", guide)]:
        (out_dir / f"{name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
    (out_dir / "assembly.txt").write_text(assembly_guide_text(guide))
    return {"bom": b, "cost": cost, "time": time, "assembly": guide}
