import xml.etree.ElementTree as ET

import numpy as np

from codeprobe.probe import EvalReport, aggregate_runs
from codeprobe.reports import (AGGREGATE_HEADER, EVAL_HEADER,
                               read_aggregate_csv, render_layer_curves_svg,
                               write_aggregate_csv, write_eval_csv)


def _report(task, layer, seed, mcc):
    return EvalReport(task=task, layer=layer, seed=seed, mcc=mcc,
                      macro_f1=mcc / 2, confusion=np.array([[3, 1], [1, 3]]),
                      per_class=[(0.75, 0.75)] * 2)


def _rows():
    return aggregate_runs([
        _report("ast_pair", 0, 1, 0.1), _report("ast_pair", 0, 2, 0.3),
        _report("ast_pair", 1, 1, 0.8), _report("ast_pair", 1, 2, 0.6),
        _report("tagging", 0, 1, -0.2), _report("tagging", 1, 1, 0.4),
    ])


class TestCsv:
    def test_eval_header_and_sorting(self, tmp_path):
        path = tmp_path / "eval.csv"
        write_eval_csv([_report("b", 1, 1, 0.5), _report("a", 0, 2, 0.1)], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(EVAL_HEADER)
        assert lines[1].startswith("a,-,0,2,0.100000,")
        assert lines[2].startswith("b,-,1,1,0.500000,")
        assert lines[1].endswith(",8")  # confusion-matrix total

    def test_aggregate_round_trip(self, tmp_path):
        path = tmp_path / "aggregate.csv"
        rows = _rows()
        write_aggregate_csv(rows, path)
        back = read_aggregate_csv(path)
        assert list(back[0].keys()) == AGGREGATE_HEADER
        by_key = {(r["task"], int(r["layer"])): r for r in back}
        row = by_key[("ast_pair", 0)]
        assert float(row["mcc_mean"]) == 0.2
        assert float(row["mcc_min"]) == 0.1
        assert float(row["mcc_max"]) == 0.3
        assert int(row["n_runs"]) == 2


class TestSvg:
    def test_well_formed_with_one_series_per_task(self, tmp_path):
        path = tmp_path / "curves.svg"
        render_layer_curves_svg(_rows(), path)
        root = ET.parse(path).getroot()
        ns = "{http://www.w3.org/2000/svg}"
        polylines = root.findall(f"{ns}polyline")
        assert len(polylines) == 2
        labels = {t.text for t in root.findall(f"{ns}text")}
        assert {"ast_pair", "tagging"} <= labels

    def test_higher_score_plots_higher(self, tmp_path):
        path = tmp_path / "curves.svg"
        render_layer_curves_svg(_rows(), path)
        root = ET.parse(path).getroot()
        ns = "{http://www.w3.org/2000/svg}"
        ast = next(p for p in root.findall(f"{ns}polyline"))
        points = [tuple(map(float, pt.split(",")))
                  for pt in ast.get("points").split()]
        # ast_pair mcc_mean rises 0.2 -> 0.7, so the y pixel must drop
        assert points[1][1] < points[0][1]

    def test_empty_rows_still_render(self, tmp_path):
        path = tmp_path / "empty.svg"
        render_layer_curves_svg([], path)
        ET.parse(path)
