import json

import pytest

from zomeshell.golden import StrutColor, StrutSize
from zomeshell.report import (
    BOM,
    CostModel,
    assembly_guide,
    assembly_guide_text,
    bom,
    cost_estimate,
    time_estimate,
    write_reports,
)
from zomeshell.structure import ZomeStructure

from test_structure import B0, make_grid_structure


class TestBOM:
    def test_3x3x3_lattice(self):
        z = make_grid_structure(3)
        b = bom(z)
        assert b.strut_counts == {(StrutColor.BLUE, StrutSize.S): 54}
        assert b.total_struts == 54
        assert b.total_balls == 27

    def test_empty_structure(self):
        b = bom(ZomeStructure(b0_mm=B0, origin_mm=(0, 0, 0)))
        assert b.total_struts == 0 and b.total_balls == 0

    def test_totals_are_sums(self):
        z = make_grid_structure(2)
        b = bom(z)
        assert b.total_struts == sum(b.strut_counts.values())

    def test_csv_layout(self):
        z = make_grid_structure(2)
        lines = bom(z).to_csv().splitlines()
        assert lines[0] == "color,size,count"
        assert "blue,S,12" in lines
        assert lines[-2] == "total_struts,,12"
        assert lines[-1] == "balls,,8"

    def test_piece_volumes_recorded(self):
        class P:
            def __init__(self, label, v):
                self.label, self.volume_mm3 = label, v

        b = bom(make_grid_structure(2), [P(0, 10.0), P(1, 20.0)])
        assert b.piece_volumes_mm3 == {0: 10.0, 1: 20.0}


class TestCost:
    def test_paper_counts_give_69_05(self):
        b = BOM({(StrutColor.BLUE, StrutSize.S): 252}, 73)
        report = cost_estimate(b, 0.001)
        assert report["zome"]["cost_usd"] == pytest.approx(69.05)

    def test_zero_structure_zero_zome_cost(self):
        report = cost_estimate(BOM(), 1000.0)
        assert report["zome"]["cost_usd"] == 0.0

    def test_print_cost_linear_in_volume(self):
        b = BOM()
        c1 = cost_estimate(b, 50000.0)["print"]["cost_usd"]
        c2 = cost_estimate(b, 100000.0)["print"]["cost_usd"]
        assert c2 == pytest.approx(2 * c1)
        assert c1 > 0

    def test_print_cost_formula(self):
        model = CostModel()
        report = cost_estimate(BOM(), 2405000.0, model)
        # 2405000 mm^3 / 2.405 mm^2 = 1e6 mm = 1000 m of filament
        assert report["print"]["filament_m"] == pytest.approx(1000.0)
        assert report["print"]["cost_usd"] == pytest.approx(560.0)
        assert report["total_usd"] == pytest.approx(560.0)

    def test_model_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            CostModel(strut_usd=0.0)


class TestTime:
    def test_zero_elements(self):
        assert time_estimate(BOM(), 0.0)["assembly_hours"] == 0.0

    def test_325_elements_about_2_71_hours(self):
        b = BOM({(StrutColor.BLUE, StrutSize.S): 252}, 73)
        report = time_estimate(b, 0.0)
        assert report["assembly_hours"] == pytest.approx(2.71, abs=0.005)

    def test_overall_is_sum(self):
        b = BOM({(StrutColor.BLUE, StrutSize.S): 10}, 5)
        report = time_estimate(b, 30000.0)
        assert report["overall_hours"] == pytest.approx(
            report["print_hours"] + report["assembly_hours"]
        )
        assert report["print_hours"] == pytest.approx(2.0)


class TestAssemblyGuide:
    def test_cube_eight_balls_three_struts_each(self):
        z = make_grid_structure(2)
        guide = assembly_guide(z)
        assert len(guide["balls"]) == 8
        assert all(len(e["struts"]) == 3 for e in guide["balls"])

    def test_every_strut_listed_twice(self):
        z = make_grid_structure(3)
        guide = assembly_guide(z)
        listed = sum(len(e["struts"]) for e in guide["balls"])
        assert listed == 2 * len(z.struts)

    def test_deterministic(self):
        z = make_grid_structure(2)
        assert assembly_guide(z) == assembly_guide(z)

    def test_breadth_first_from_lowest_id(self):
        z = make_grid_structure(2)
        guide = assembly_guide(z)
        assert guide["balls"][0]["ball"] == min(z.nodes)

    def test_text_rendering(self):
        z = make_grid_structure(2)
        text = assembly_guide_text(assembly_guide(z))
        assert "Ball 0" in text and "blue S strut" in text


class TestWriteReports:
    def test_files_emitted(self, tmp_path):
        z = make_grid_structure(2)
        out = write_reports(tmp_path, z, shell_volume_mm3=12345.0)
        for name in ["bom.csv", "bom.json", "cost.json", "time.json",
                     "assembly.json", "assembly.txt"]:
            assert (tmp_path / name).exists()
        cost = json.loads((tmp_path / "cost.json").read_text())
        assert cost["total_usd"] == pytest.approx(out["cost"]["total_usd"])
        assert "formula estimate" in cost["basis"]
