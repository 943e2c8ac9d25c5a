"""Visualise the hierarchies of covariate effects in classification
random forests as path-flow networks: parallel-coordinates plots and
self-contained interactive Sankey documents built from every
root-to-leaf path in the ensemble."""

from forestflow import _kernels
from forestflow.rf_core import (
    Dataset,
    ForestModel,
    ImportanceReport,
    RFConfig,
    Tree,
    best_split,
    impurity_importance,
    oob_accuracy,
    permutation_importance,
    predict,
    train_forest,
    tune_mtry,
)
from forestflow.forest_io import (
    read_dataset,
    read_forest,
    read_node_table,
    write_forest,
)
from forestflow.path_flow import (
    TERMINUS,
    FlowAggregate,
    aggregate_flows,
    apply_threshold,
    enumerate_paths,
    flow_document,
    merge,
    subtree_leaf_counts,
)
from forestflow.render import (
    RenderOptions,
    export_tree_graph,
    render_importance_chart,
    render_pcp,
    render_sankey_doc,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "RFConfig",
    "Tree",
    "ForestModel",
    "ImportanceReport",
    "train_forest",
    "best_split",
    "predict",
    "oob_accuracy",
    "impurity_importance",
    "permutation_importance",
    "tune_mtry",
    "read_dataset",
    "write_forest",
    "read_forest",
    "read_node_table",
    "TERMINUS",
    "FlowAggregate",
    "enumerate_paths",
    "subtree_leaf_counts",
    "aggregate_flows",
    "apply_threshold",
    "merge",
    "flow_document",
    "RenderOptions",
    "render_pcp",
    "render_sankey_doc",
    "render_importance_chart",
    "export_tree_graph",
    "kernel_backend",
]


def kernel_backend():
    """Name of the split/routing kernel implementation in use:
    "compiled" for the C extension, "python" for the numpy fallback."""
    return _kernels.BACKEND
