"""Static SVG, DOT and interactive-HTML rendering."""

import json
import re

import numpy as np
import pytest
from builders import five_node_forest, five_node_tree, leaf_tree, stump
from conftest import extract_island

import forestflow.render as render
from forestflow.path_flow import (
    TERMINUS,
    aggregate_flows,
    apply_threshold,
    flow_document,
)
from forestflow.render import (
    RenderOptions,
    export_tree_graph,
    format_block_label,
    render_importance_chart,
    render_pcp,
    render_sankey_doc,
    sankey_layout,
)
from forestflow.rf_core import ForestModel, ImportanceReport


def _stump_agg():
    forest = ForestModel(
        trees=[stump(feature=1, threshold=2.5)],
        covariate_names=("x.13", "x.17"),
        class_names=("c1", "c2"),
    )
    return aggregate_flows(forest, max_rank=5)


class TestRenderOptions:
    def test_defaults_valid(self):
        opts = RenderOptions()
        assert opts.color_mode == "grayscale"
        assert opts.label_format == "Node.{rank}_{label}"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"width": 0},
            {"height": -5},
            {"color_mode": "plasma"},
            {"axis_order": "alpha"},
            {"min_darkness": 1.0},
            {"min_darkness": -0.01},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            RenderOptions(**kwargs)


class TestFormatBlockLabel:
    def test_default_format(self):
        assert format_block_label("Node.{rank}_{label}", 1, "x.17") == "Node.1_x.17"

    def test_custom_format(self):
        assert format_block_label("{label}@{rank}", 3, "a") == "a@3"


class TestRenderPcp:
    def test_byte_deterministic(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render_pcp(agg, RenderOptions(), a)
        render_pcp(agg, RenderOptions(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_stump_draws_one_segment(self, tmp_path):
        out = tmp_path / "p.svg"
        render_pcp(_stump_agg(), RenderOptions(), out)
        text = out.read_text()
        assert text.count('stroke-width="1.50"') == 1
        assert text.count("<svg") == 1 and text.endswith("</svg>\n")
        assert ">x.17<" in text and ">Terminus<" in text
        assert ">Node 1<" in text

    def test_darkness_extremes(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        out = tmp_path / "p.svg"
        render_pcp(agg, RenderOptions(min_darkness=0.0), out)
        text = out.read_text()
        # weights are 2 (max, full black) and 1 (half darkness)
        assert 'stroke="#000000" stroke-width="1.50"' in text
        assert 'stroke="#808080" stroke-width="1.50"' in text

    def test_darkness_monotone_in_weight(self):
        opts = RenderOptions(min_darkness=0.15)
        grays = [
            int(render._edge_color(w, 10, opts)[1:3], 16) for w in (1, 4, 7, 10)
        ]
        assert grays == sorted(grays, reverse=True)
        assert grays[-1] == 0

    def test_sequential_mode_uses_ramp(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        out = tmp_path / "p.svg"
        render_pcp(agg, RenderOptions(color_mode="sequential"), out)
        text = out.read_text()
        assert 'stroke="#fde725"' in text  # max-weight edge, ramp top

    def test_frequency_axis_order_changes_gradations(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)  # B appears 2x, A 3x
        a, b = tmp_path / "idx.svg", tmp_path / "freq.svg"
        render_pcp(agg, RenderOptions(axis_order="index"), a)
        render_pcp(agg, RenderOptions(axis_order="frequency"), b)
        assert a.read_bytes() == b.read_bytes()  # A already most frequent

        def gutter_labels(text):
            return re.findall(r'text-anchor="end"[^>]*>([^<]+)</text>', text)

        assert gutter_labels(a.read_text()) == ["Terminus", "A", "B"]

    def test_empty_aggregate_rejected(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        empty = apply_threshold(agg, 0.0)
        empty.group_totals.clear()
        with pytest.raises(ValueError, match="empty aggregate"):
            render_pcp(empty, RenderOptions(), tmp_path / "x.svg")

    def test_unwritable_path(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        with pytest.raises(OSError, match="cannot write"):
            render_pcp(agg, RenderOptions(), tmp_path / "no" / "dir.svg")


class TestImportanceChart:
    def _report(self):
        return ImportanceReport(
            covariate_names=("a", "b", "c"),
            impurity=np.array([0.1, 0.7, 0.3]),
        )

    def test_rows_sorted_descending(self, tmp_path):
        out = tmp_path / "i.svg"
        render_importance_chart(self._report(), RenderOptions(), out)
        text = out.read_text()
        rows = re.findall(r'text-anchor="end"[^>]*>([^<]+)</text>', text)
        assert rows == ["b", "c", "a"]
        assert "impurity importance" in text

    def test_tie_breaks_by_index(self, tmp_path):
        report = ImportanceReport(("z1", "z2"), impurity=np.array([0.5, 0.5]))
        out = tmp_path / "i.svg"
        render_importance_chart(report, RenderOptions(), out)
        rows = re.findall(r'text-anchor="end"[^>]*>([^<]+)</text>', out.read_text())
        assert rows == ["z1", "z2"]

    def test_dot_position_monotone(self, tmp_path):
        rng = np.random.default_rng(5)
        vals = rng.uniform(0.0, 1.0, 36)
        report = ImportanceReport(
            tuple(f"x.{j + 1}" for j in range(36)), permutation=vals
        )
        out = tmp_path / "i.svg"
        render_importance_chart(report, RenderOptions(), out, metric="permutation")
        xs = [float(m) for m in re.findall(r'circle cx="([0-9.]+)"', out.read_text())]
        assert len(xs) == 36
        assert xs == sorted(xs, reverse=True)
        assert "permutation importance" in out.read_text()

    def test_missing_metric_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no permutation scores"):
            render_importance_chart(
                self._report(), RenderOptions(), tmp_path / "x.svg",
                metric="permutation",
            )

    def test_unknown_metric_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="metric"):
            render_importance_chart(
                self._report(), RenderOptions(), tmp_path / "x.svg", metric="gini"
            )

    def test_byte_deterministic(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render_importance_chart(self._report(), RenderOptions(), a)
        render_importance_chart(self._report(), RenderOptions(), b)
        assert a.read_bytes() == b.read_bytes()


class TestSankeyLayout:
    def test_heights_proportional_to_totals(self):
        groups = [(1, "A", 3), (2, "B", 2), (2, None, 1), (3, None, 2)]
        layout = sankey_layout(groups, 3, 960, 600)
        hs = {k: v[2] for k, v in layout.items()}
        assert hs[(1, "A")] == pytest.approx(3 * hs[(2, None)])
        assert hs[(2, "B")] == pytest.approx(2 * hs[(2, None)])
        assert hs[(3, None)] == pytest.approx(2 * hs[(2, None)])

    def test_columns_left_to_right(self):
        groups = [(1, "A", 1), (2, "B", 1), (3, None, 1)]
        layout = sankey_layout(groups, 3, 960, 600)
        assert layout[(1, "A")][0] < layout[(2, "B")][0] < layout[(3, None)][0]

    def test_terminus_stacked_last(self):
        groups = [(2, None, 10), (2, "B", 1)]
        layout = sankey_layout(groups, 2, 960, 600)
        assert layout[(2, "B")][1] < layout[(2, None)][1]

    def test_descending_totals_within_column(self):
        groups = [(1, "A", 1), (1, "B", 5), (1, "C", 3)]
        layout = sankey_layout(groups, 1, 960, 600)
        ys = [layout[(1, lab)][1] for lab in ("B", "C", "A")]
        assert ys == sorted(ys)

    def test_empty_input(self):
        assert sankey_layout([], 1, 960, 600) == {}


class TestRenderSankeyDoc:
    def test_island_matches_flow_document(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        out = tmp_path / "s.html"
        render_sankey_doc(agg, RenderOptions(), out, class_names=("c1", "c2"))
        island = json.loads(extract_island(out.read_text()))
        expected = flow_document(agg, class_names=("c1", "c2"))
        expected["render_options"] = {
            "width": 960, "height": 600,
            "color_mode": "grayscale", "label_format": "Node.{rank}_{label}",
        }
        assert island == expected

    def test_class_aggregates_travel_with_island(self, tmp_path):
        forest = five_node_forest()
        agg = aggregate_flows(forest, 5)
        per_class = {c: aggregate_flows(forest, 5, c) for c in forest.class_names}
        out = tmp_path / "s.html"
        render_sankey_doc(
            agg, RenderOptions(), out,
            class_names=forest.class_names, class_aggregates=per_class,
        )
        island = json.loads(extract_island(out.read_text()))
        assert island["class_aggregates"]["c2"]["total_paths"] == 2

    def test_document_is_self_contained(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        out = tmp_path / "s.html"
        render_sankey_doc(agg, RenderOptions(), out)
        text = out.read_text()
        assert text.startswith("<!DOCTYPE html>")
        assert 'id="flow-data"' in text
        assert '<script type="module">' in text
        assert "http://" not in text.replace("http://www.w3.org", "")
        assert "https://" not in text

    def test_script_close_tag_escaped_in_island(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        out = tmp_path / "s.html"
        render_sankey_doc(agg, RenderOptions(), out)
        assert "</script>" not in extract_island(out.read_text())

    def test_byte_deterministic(self, tmp_path):
        agg = aggregate_flows(five_node_forest(), 5)
        a, b = tmp_path / "a.html", tmp_path / "b.html"
        render_sankey_doc(agg, RenderOptions(), a)
        render_sankey_doc(agg, RenderOptions(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_bundle_reported(self, tmp_path, monkeypatch):
        agg = aggregate_flows(five_node_forest(), 5)
        monkeypatch.setattr(render, "__file__", str(tmp_path / "render.py"))
        with pytest.raises(ValueError, match="viewer bundle missing"):
            render_sankey_doc(agg, RenderOptions(), tmp_path / "s.html")


class TestExportTreeGraph:
    def test_single_leaf(self, tmp_path):
        out = tmp_path / "t.dot"
        export_tree_graph(leaf_tree(), ("x.1",), out)
        text = out.read_text()
        assert 'n0 [label="Terminus"];' in text
        assert "->" not in text

    def test_stump(self, tmp_path):
        out = tmp_path / "t.dot"
        export_tree_graph(stump(feature=1), ("x.13", "x.17"), out)
        text = out.read_text()
        assert 'n0 [label="x.17"];' in text
        assert "n0 -> n1;" in text and "n0 -> n2;" in text
        assert text.count('[label="Terminus"]') == 2

    def test_five_node_edge_count(self, tmp_path):
        out = tmp_path / "t.dot"
        export_tree_graph(five_node_tree(), ("A", "B"), out)
        text = out.read_text()
        assert text.count("->") == 4
        assert text.startswith("digraph tree {")

    def test_quotes_escaped(self, tmp_path):
        out = tmp_path / "t.dot"
        export_tree_graph(stump(feature=0), ('sa"id', "other"), out)
        assert 'label="sa\\"id"' in out.read_text()


class TestXmlEscape:
    def test_all_specials(self):
        assert render._xml_escape('<a&"b>') == "&lt;a&amp;&quot;b&gt;"

    def test_escaped_names_reach_svg(self, tmp_path):
        report = ImportanceReport(("a<b",), impurity=np.array([1.0]))
        out = tmp_path / "i.svg"
        render_importance_chart(report, RenderOptions(), out)
        text = out.read_text()
        assert "a&lt;b" in text and "a<b" not in text
