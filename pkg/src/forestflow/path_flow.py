"""Root-to-leaf path enumeration and rank-indexed flow aggregation.

Every path through every tree is read as a sequence of split covariates
ending in the distinguished Terminus symbol; position along the path is
the rank (root = 1).  Aggregation counts, for each pair of consecutive
ranks, how many paths pass from one (rank, covariate) group to the next,
yielding the weighted flow network the renderers draw.  Terminus is
absorbing: a path that ends at rank r contributes nothing beyond rank r.

Aggregation is implemented with subtree leaf counts (the number of
root-to-leaf paths through a node equals the leaf count of its subtree),
which is linear in the node count instead of total path length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "TERMINUS",
    "TERMINUS_NAME",
    "FLOW_FORMAT_VERSION",
    "Path",
    "FlowAggregate",
    "enumerate_paths",
    "subtree_leaf_counts",
    "aggregate_flows",
    "apply_threshold",
    "merge",
    "flow_document",
]

# group label for path ends; covariate labels are indices >= 0
TERMINUS = -1
TERMINUS_NAME = "Terminus"
FLOW_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class Path:
    """One root-to-leaf path: split covariate indices ending in TERMINUS,
    plus the class code the leaf predicts."""

    labels: tuple
    leaf_class: int


@dataclass
class FlowAggregate:
    """The flow network of a forest up to ``max_rank``.

    ``edges`` maps (rank, from_label, to_label) to path counts, where
    rank is the from-side rank and labels are covariate indices or
    TERMINUS; ``group_totals`` maps (rank, label) to the number of paths
    through that group.  ``threshold`` and ``residual`` (removed fraction
    per rank) are set only on aggregates produced by apply_threshold.
    Treat instances as immutable.
    """

    edges: dict
    group_totals: dict
    total_paths: int
    max_rank: int
    class_restriction: Optional[object]
    n_trees: int
    covariate_names: tuple
    threshold: Optional[float] = None
    residual: Optional[dict] = field(default=None)


def enumerate_paths(tree):
    """All root-to-leaf paths of a valid tree, depth-first with left
    before right; each path lists split covariates then TERMINUS."""
    out = []
    stack = [(tree.root, ())]
    while stack:
        node, prefix = stack.pop()
        if tree.feature[node] < 0:
            out.append(Path(prefix + (TERMINUS,), int(tree.pred[node])))
        else:
            labels = prefix + (int(tree.feature[node]),)
            stack.append((int(tree.right[node]), labels))
            stack.append((int(tree.left[node]), labels))
    return out


def subtree_leaf_counts(tree, class_code=None):
    """Leaf count of every node's subtree, as an array indexed by node
    id; a leaf counts 1 (or 0 when ``class_code`` is set and the leaf
    predicts another class)."""
    counts = np.zeros(tree.n_nodes, dtype=np.int64)
    stack = [(tree.root, False)]
    while stack:
        node, expanded = stack.pop()
        if tree.feature[node] < 0:
            if class_code is None or tree.pred[node] == class_code:
                counts[node] = 1
            continue
        if expanded:
            counts[node] = counts[tree.left[node]] + counts[tree.right[node]]
        else:
            stack.append((node, True))
            stack.append((int(tree.right[node]), False))
            stack.append((int(tree.left[node]), False))
    return counts


def aggregate_flows(forest, max_rank=5, class_restriction=None):
    """Aggregate every root-to-leaf path of every tree into the flow
    network truncated at ``max_rank``.

    With ``class_restriction`` set, only paths whose leaf predicts that
    class contribute.  Zero-weight groups and edges are omitted.  The
    weight of the edge from a node's group to a child's group is the
    child's subtree leaf count, which equals the number of paths routed
    through that transition.
    """
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    code = None
    if class_restriction is not None:
        if class_restriction not in forest.class_names:
            raise ValueError(
                f"class {class_restriction!r} not among classes "
                f"{list(forest.class_names)}"
            )
        code = forest.class_names.index(class_restriction)
    edges = {}
    totals = {}
    total_paths = 0
    for t in forest.trees:
        counts = subtree_leaf_counts(t, code)
        if counts[t.root] == 0:
            continue
        total_paths += int(counts[t.root])
        stack = [(t.root, 1)]
        while stack:
            node, rank = stack.pop()
            internal = t.feature[node] >= 0
            label = int(t.feature[node]) if internal else TERMINUS
            key = (rank, label)
            totals[key] = totals.get(key, 0) + int(counts[node])
            if not internal or rank == max_rank:
                continue
            for child in (int(t.right[node]), int(t.left[node])):
                w = int(counts[child])
                if w == 0:
                    continue
                child_label = (
                    int(t.feature[child]) if t.feature[child] >= 0 else TERMINUS
                )
                ekey = (rank, label, child_label)
                edges[ekey] = edges.get(ekey, 0) + w
                stack.append((child, rank + 1))
    return FlowAggregate(
        edges=edges,
        group_totals=totals,
        total_paths=total_paths,
        max_rank=max_rank,
        class_restriction=class_restriction,
        n_trees=forest.n_trees,
        covariate_names=tuple(forest.covariate_names),
    )


def apply_threshold(agg, theta):
    """Drop every group whose path share at its rank falls below
    ``theta``, with all incident edges.

    The cut uses the incoming aggregate's per-rank totals: group (r, g)
    is removed when group_total < theta * sum of rank-r group_totals.
    Surviving groups get totals recomputed from surviving edges as
    max(inflow, outflow); groups that had no incident edges to begin
    with keep their totals; groups left with zero flow disappear.
    ``residual`` records the removed fraction per rank; ``total_paths``
    is kept as the original denominator.  theta = 0 leaves the flows
    unchanged.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must be in [0, 1], got {theta}")
    rank_sum = {}
    for (rank, _), tot in agg.group_totals.items():
        rank_sum[rank] = rank_sum.get(rank, 0) + tot
    removed = {
        key
        for key, tot in agg.group_totals.items()
        if tot < theta * rank_sum[key[0]]
    }
    residual = {rank: 0.0 for rank in sorted(rank_sum)}
    for rank, label in removed:
        residual[rank] += agg.group_totals[(rank, label)] / rank_sum[rank]

    kept_edges = {
        (rank, frm, to): w
        for (rank, frm, to), w in agg.edges.items()
        if (rank, frm) not in removed and (rank + 1, to) not in removed
    }
    inflow, outflow = {}, {}
    for (rank, frm, to), w in kept_edges.items():
        fkey, tkey = (rank, frm), (rank + 1, to)
        outflow[fkey] = outflow.get(fkey, 0) + w
        inflow[tkey] = inflow.get(tkey, 0) + w
    had_edges = set()
    for rank, frm, to in agg.edges:
        had_edges.add((rank, frm))
        had_edges.add((rank + 1, to))
    new_totals = {}
    for key, tot in agg.group_totals.items():
        if key in removed:
            continue
        if key not in had_edges:
            new_totals[key] = tot  # isolated group: nothing to recompute from
            continue
        t = max(inflow.get(key, 0), outflow.get(key, 0))
        if t > 0:
            new_totals[key] = t
    return FlowAggregate(
        edges=kept_edges,
        group_totals=new_totals,
        total_paths=agg.total_paths,
        max_rank=agg.max_rank,
        class_restriction=agg.class_restriction,
        n_trees=agg.n_trees,
        covariate_names=agg.covariate_names,
        threshold=theta,
        residual=residual,
    )


def merge(a, b):
    """Edge-wise and group-wise sum of two unthresholded aggregates with
    identical parameters; path and tree counts add."""
    if (
        a.max_rank != b.max_rank
        or a.class_restriction != b.class_restriction
        or a.covariate_names != b.covariate_names
    ):
        raise ValueError("aggregates differ in max_rank/class/covariates")
    if a.threshold is not None or b.threshold is not None:
        raise ValueError("cannot merge thresholded aggregates")
    edges = dict(a.edges)
    for k, w in b.edges.items():
        edges[k] = edges.get(k, 0) + w
    totals = dict(a.group_totals)
    for k, w in b.group_totals.items():
        totals[k] = totals.get(k, 0) + w
    return FlowAggregate(
        edges=edges,
        group_totals=totals,
        total_paths=a.total_paths + b.total_paths,
        max_rank=a.max_rank,
        class_restriction=a.class_restriction,
        n_trees=a.n_trees + b.n_trees,
        covariate_names=a.covariate_names,
    )


def _label_name(label, covariate_names):
    return None if label == TERMINUS else covariate_names[label]


def _group_sort_key(item):
    (rank, label), _ = item
    return (rank, 1 if label == TERMINUS else 0, label)


def _edge_sort_key(item):
    (rank, frm, to), _ = item
    return (rank, frm, 1 if to == TERMINUS else 0, to)


def _flow_body(agg):
    names = agg.covariate_names
    groups = [
        {"rank": rank, "label": _label_name(label, names), "total": tot}
        for (rank, label), tot in sorted(agg.group_totals.items(), key=_group_sort_key)
    ]
    edges = [
        {
            "rank": rank,
            "from": _label_name(frm, names),
            "to": _label_name(to, names),
            "weight": w,
        }
        for (rank, frm, to), w in sorted(agg.edges.items(), key=_edge_sort_key)
    ]
    return groups, edges


def flow_document(agg, class_names=(), class_aggregates=None):
    """Bundle an aggregate (plus optional per-class aggregates) into the
    FlowDocument dict (format_version "1").

    Terminus appears as JSON null in group and edge labels; covariates
    appear by name.  Groups sort by (rank, covariate index, Terminus
    last); edges by (rank, from, to) the same way.
    """
    groups, edges = _flow_body(agg)
    doc = {
        "format_version": FLOW_FORMAT_VERSION,
        "kind": "forestflow-flows",
        "terminus_absorbing": True,
        "terminus_label": TERMINUS_NAME,
        "n_trees": agg.n_trees,
        "max_rank": agg.max_rank,
        "class_restriction": agg.class_restriction,
        "threshold": agg.threshold,
        "residual": (
            None
            if agg.residual is None
            else {str(rank): frac for rank, frac in sorted(agg.residual.items())}
        ),
        "covariate_names": list(agg.covariate_names),
        "class_names": list(class_names),
        "total_paths": agg.total_paths,
        "groups": groups,
        "edges": edges,
    }
    if class_aggregates is not None:
        per_class = {}
        for label, sub in class_aggregates.items():
            sub_groups, sub_edges = _flow_body(sub)
            per_class[label] = {
                "total_paths": sub.total_paths,
                "groups": sub_groups,
                "edges": sub_edges,
            }
        doc["class_aggregates"] = per_class
    return doc
