#!/usr/bin/env python3
"""Regenerate the viewer test fixtures under frontend/test/fixtures/.

Each fixture is produced by the Python side of the pipeline; the viewer
tests assert that client-side filtering and formatting reproduce them
exactly.  Run from the repository root:

    python3 scripts/make_viewer_fixtures.py
"""

import json
import re
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))  # reuse the test builders

from builders import five_node_forest, stump, stump_forest  # noqa: E402

from forestflow.path_flow import (  # noqa: E402
    aggregate_flows,
    apply_threshold,
    flow_document,
)
from forestflow.render import RenderOptions, render_sankey_doc  # noqa: E402
from forestflow.rf_core import ForestModel  # noqa: E402

FIXTURES = ROOT / "frontend" / "test" / "fixtures"
_ISLAND_RE = re.compile(
    r'<script id="flow-data" type="application/json">(.*?)</script>', re.S
)


def island_text(forest, max_rank=5):
    agg = aggregate_flows(forest, max_rank)
    per_class = {
        str(label): aggregate_flows(forest, max_rank, label)
        for label in forest.class_names
    }
    with tempfile.TemporaryDirectory() as td:
        out = Path(td) / "doc.html"
        render_sankey_doc(
            agg, RenderOptions(), out,
            class_names=forest.class_names, class_aggregates=per_class,
        )
        return _ISLAND_RE.search(out.read_text(encoding="utf-8")).group(1)


def write(name, text):
    (FIXTURES / name).write_text(text + "\n", encoding="utf-8")
    print(f"wrote {name}")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    five = five_node_forest()
    write("fivenode_island.json", island_text(five))
    agg = aggregate_flows(five, max_rank=5)
    for theta, tag in ((0.0, "00"), (0.4, "04"), (0.5, "05")):
        doc = flow_document(apply_threshold(agg, theta), five.class_names)
        write(f"fivenode_theta{tag}.json", json.dumps(doc, indent=2))

    write("stump_island.json", island_text(stump_forest()))

    # four identical paths through one covariate: the single-link document
    fourpath = ForestModel(
        trees=[stump(feature=0), stump(feature=0)],
        covariate_names=("A",),
        class_names=("c1", "c2"),
    )
    write("fourpath_island.json", island_text(fourpath))


if __name__ == "__main__":
    main()
