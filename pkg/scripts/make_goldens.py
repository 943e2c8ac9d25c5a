#!/usr/bin/env python3
"""Regenerate the checked-in reference renders under tests/golden/.

Run from the repository root after any intentional change to the
renderers, then review the diff before committing:

    python3 scripts/make_goldens.py
"""

import re
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))  # reuse the test builders

from builders import five_node_forest, stump_forest  # noqa: E402

from forestflow.path_flow import aggregate_flows  # noqa: E402
from forestflow.render import (  # noqa: E402
    RenderOptions,
    render_importance_chart,
    render_pcp,
    render_sankey_doc,
)
from forestflow.rf_core import impurity_importance  # noqa: E402

GOLDEN = ROOT / "tests" / "golden"
_ISLAND_RE = re.compile(
    r'<script id="flow-data" type="application/json">(.*?)</script>', re.S
)


def _island(agg, opts, class_names):
    with tempfile.TemporaryDirectory() as td:
        out = Path(td) / "doc.html"
        render_sankey_doc(agg, opts, out, class_names=class_names)
        return _ISLAND_RE.search(out.read_text(encoding="utf-8")).group(1)


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    opts = RenderOptions()
    for name, forest in (("stump", stump_forest()), ("fivenode", five_node_forest())):
        agg = aggregate_flows(forest, max_rank=5)
        render_pcp(agg, opts, GOLDEN / f"{name}_pcp.svg")
        (GOLDEN / f"{name}_island.json").write_text(
            _island(agg, opts, forest.class_names) + "\n", encoding="utf-8"
        )
        render_importance_chart(
            impurity_importance(forest), opts, GOLDEN / f"{name}_importance.svg"
        )
        print(f"wrote {name} goldens")


if __name__ == "__main__":
    main()
