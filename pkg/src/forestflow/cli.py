"""Command-line pipeline: train or ingest a forest, tune mtry, aggregate
path flows, filter, and render.

All outputs are written atomically (temp file + rename) and every
command prints machine-readable summary lines prefixed "forestflow:".
Exit codes: 0 success, 2 usage (unknown subcommand or invalid flag
value), 1 runtime failure (I/O or validation).  The environment variable
FORESTFLOW_THREADS sets the training thread count; results do not depend
on it.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
import tempfile

from forestflow import forest_io, path_flow, render, rf_core


class UsageError(Exception):
    """A flag value that cannot be acted on (exit code 2)."""


def _threads():
    raw = os.environ.get("FORESTFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"FORESTFLOW_THREADS must be an integer, got {raw!r}") from None


def _say(**fields):
    print("forestflow: " + " ".join(f"{k}={v}" for k, v in fields.items()))


def _atomic_write(path, writer):
    """Run ``writer(tmp_path)`` then rename over ``path``; nothing is
    left behind on failure."""
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(target), prefix=".forestflow-", suffix=".tmp"
    )
    os.close(fd)
    try:
        writer(tmp)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp is 0600; honour the umask
        os.replace(tmp, target)
    finally:
        with contextlib.suppress(OSError):
            os.unlink(tmp)


def _split_columns(raw):
    if raw is None:
        return None
    cols = [c.strip() for c in raw.split(",") if c.strip()]
    if not cols:
        raise UsageError("--covariates given but empty")
    return cols


def _read_data(args):
    return forest_io.read_dataset(
        args.data, args.response, _split_columns(args.covariates)
    )


def _check_class(forest, label):
    if label is not None and label not in forest.class_names:
        valid = ", ".join(str(c) for c in forest.class_names)
        raise UsageError(f"unknown class {label!r}; valid classes: {valid}")


def _check_threshold(theta):
    if theta is not None and not 0.0 <= theta <= 1.0:
        raise UsageError(f"--threshold must be in [0, 1], got {theta}")


def _check_max_rank(max_rank):
    if max_rank < 1:
        raise UsageError(f"--max-rank must be >= 1, got {max_rank}")


def _render_options(args, **extra):
    try:
        return render.RenderOptions(
            width=args.width, height=args.height, color_mode=args.color_mode,
            **extra,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _aggregate(args, forest):
    _check_max_rank(args.max_rank)
    _check_class(forest, args.class_label)
    _check_threshold(args.threshold)
    agg = path_flow.aggregate_flows(forest, args.max_rank, args.class_label)
    if args.threshold is not None:
        agg = path_flow.apply_threshold(agg, args.threshold)
    return agg


def cmd_train(args):
    data = _read_data(args)
    mtry = args.mtry
    if mtry is None:
        mtry = max(1, math.isqrt(data.n_covariates))
    config = rf_core.RFConfig(
        n_trees=args.n_trees,
        mtry=mtry,
        min_node_size=args.min_node_size,
        max_nodes=args.max_nodes,
        seed=args.seed,
        bootstrap_size=args.bootstrap_size,
    )
    try:
        config.validate(data.n_covariates)
    except ValueError as e:
        raise UsageError(str(e)) from None
    forest = rf_core.train_forest(data, config, n_threads=_threads())
    acc = rf_core.oob_accuracy(forest, data)
    _atomic_write(args.out, lambda tmp: forest_io.write_forest(forest, tmp))
    _say(
        command="train", seed=config.seed, n_trees=config.n_trees,
        mtry=config.mtry, min_node_size=config.min_node_size,
        oob_accuracy=f"{acc:.6f}", out=args.out,
    )
    return 0


def cmd_tune(args):
    data = _read_data(args)
    try:
        candidates = [int(c) for c in args.candidates.split(",") if c.strip()]
    except ValueError:
        raise UsageError(
            f"--candidates must be comma-separated integers, got {args.candidates!r}"
        ) from None
    if not candidates:
        raise UsageError("--candidates is empty")
    for c in candidates:
        if not 1 <= c <= data.n_covariates:
            raise UsageError(
                f"candidate mtry {c} outside 1..{data.n_covariates}"
            )
    if args.folds < 2:
        raise UsageError(f"--folds must be >= 2, got {args.folds}")
    base = rf_core.RFConfig(
        n_trees=args.n_trees, mtry=candidates[0],
        min_node_size=args.min_node_size, seed=args.seed,
    )
    selected, scores = rf_core.tune_mtry(data, candidates, args.folds, base)
    for c in candidates:
        _say(command="tune", candidate=c, accuracy=f"{scores[c]:.6f}")
    _say(
        command="tune", selected_mtry=selected, folds=args.folds,
        n_trees=args.n_trees, seed=args.seed,
    )
    return 0


def cmd_flows(args):
    forest = forest_io.read_forest(args.forest)
    agg = _aggregate(args, forest)
    doc = path_flow.flow_document(agg, class_names=forest.class_names)
    text = json.dumps(doc, indent=2) + "\n"

    def write(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    _atomic_write(args.out, write)
    _say(
        command="flows", total_paths=agg.total_paths, max_rank=agg.max_rank,
        **{"class": args.class_label if args.class_label is not None else "all"},
        threshold=args.threshold if args.threshold is not None else 0,
        groups=len(doc["groups"]), edges=len(doc["edges"]), out=args.out,
    )
    return 0


def cmd_render_pcp(args):
    forest = forest_io.read_forest(args.forest)
    agg = _aggregate(args, forest)
    try:
        opts = render.RenderOptions(
            width=args.width, height=args.height, color_mode=args.color_mode,
            axis_order=args.axis_order, min_darkness=args.min_darkness,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    _atomic_write(args.out, lambda tmp: render.render_pcp(agg, opts, tmp))
    _say(
        command="render-pcp", total_paths=agg.total_paths,
        edges=len(agg.edges), out=args.out,
    )
    return 0


def cmd_render_sankey(args):
    forest = forest_io.read_forest(args.forest)
    _check_max_rank(args.max_rank)
    opts = _render_options(args, label_format=args.label_format)
    agg = path_flow.aggregate_flows(forest, args.max_rank)
    per_class = {
        str(label): path_flow.aggregate_flows(forest, args.max_rank, label)
        for label in forest.class_names
    }
    _atomic_write(
        args.out,
        lambda tmp: render.render_sankey_doc(
            agg, opts, tmp,
            class_names=forest.class_names, class_aggregates=per_class,
        ),
    )
    _say(
        command="render-sankey", total_paths=agg.total_paths,
        max_rank=agg.max_rank, classes=len(forest.class_names), out=args.out,
    )
    return 0


def cmd_importance(args):
    forest = forest_io.read_forest(args.forest)
    if args.metric == "impurity":
        report = rf_core.impurity_importance(forest)
        values = report.impurity
    else:
        if args.data is None or args.response is None:
            raise UsageError(
                "--data and --response are required for permutation importance"
            )
        data = _read_data(args)
        if data.covariate_names != forest.covariate_names:
            raise ValueError("dataset covariates do not match the forest")
        if tuple(data.class_names) != tuple(forest.class_names):
            raise ValueError(
                "dataset classes do not match the forest "
                "(use the training data file)"
            )
        report = rf_core.permutation_importance(
            forest, data, repeats=args.repeats, seed=args.seed
        )
        values = report.permutation
    opts = _render_options(args)
    _atomic_write(
        args.out,
        lambda tmp: render.render_importance_chart(
            report, opts, tmp, metric=args.metric
        ),
    )
    top = report.covariate_names[max(range(len(values)), key=lambda j: values[j])]
    _say(command="importance", metric=args.metric, top=top, out=args.out)
    return 0


def cmd_export_tree(args):
    forest = forest_io.read_forest(args.forest)
    if not 0 <= args.tree < forest.n_trees:
        raise UsageError(
            f"--tree index {args.tree} out of range 0..{forest.n_trees - 1}"
        )
    tree = forest.trees[args.tree]
    _atomic_write(
        args.out,
        lambda tmp: render.export_tree_graph(tree, forest.covariate_names, tmp),
    )
    _say(command="export-tree", tree=args.tree, nodes=tree.n_nodes, out=args.out)
    return 0


def _add_data_flags(sp, required=True):
    sp.add_argument("--data", required=required, help="CSV file with header row")
    sp.add_argument("--response", required=required, help="response column name")
    sp.add_argument(
        "--covariates",
        help="comma-separated covariate columns (default: all except response)",
    )


def _add_size_flags(sp, width=960, height=600):
    sp.add_argument("--width", type=int, default=width)
    sp.add_argument("--height", type=int, default=height)
    sp.add_argument(
        "--color-mode", choices=("grayscale", "sequential"), default="grayscale"
    )


def _add_agg_flags(sp):
    sp.add_argument("--forest", required=True, help="forest document path")
    sp.add_argument("--max-rank", type=int, default=5)
    sp.add_argument(
        "--class", dest="class_label", default=None,
        help="restrict to paths predicting this class",
    )
    sp.add_argument(
        "--threshold", type=float, default=None,
        help="drop groups below this share of their rank's paths",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="forestflow",
        description=(
            "Train classification random forests and visualise their "
            "covariate hierarchies as path-flow networks."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)

    sp = sub.add_parser("train", help="train a forest and write it to a file")
    _add_data_flags(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-trees", type=int, default=500)
    sp.add_argument("--mtry", type=int, default=None,
                    help="default: floor(sqrt(#covariates))")
    sp.add_argument("--min-node-size", type=int, default=1)
    sp.add_argument("--max-nodes", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bootstrap-size", type=int, default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("tune", help="pick mtry by stratified cross-validation")
    _add_data_flags(sp)
    sp.add_argument("--candidates", required=True,
                    help="comma-separated mtry values")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--n-trees", type=int, default=500)
    sp.add_argument("--min-node-size", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("flows", help="write the aggregated flow document")
    _add_agg_flags(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_flows)

    sp = sub.add_parser("render-pcp", help="parallel-coordinates path plot")
    _add_agg_flags(sp)
    sp.add_argument("--out", required=True)
    _add_size_flags(sp)
    sp.add_argument("--axis-order", choices=("index", "frequency"), default="index")
    sp.add_argument("--min-darkness", type=float, default=0.15)
    sp.set_defaults(func=cmd_render_pcp)

    sp = sub.add_parser("render-sankey", help="interactive Sankey document")
    sp.add_argument("--forest", required=True)
    sp.add_argument("--max-rank", type=int, default=5)
    sp.add_argument("--out", required=True)
    _add_size_flags(sp)
    sp.add_argument("--label-format", default="Node.{rank}_{label}")
    sp.set_defaults(func=cmd_render_sankey)

    sp = sub.add_parser("importance", help="render an importance dot chart")
    sp.add_argument("--forest", required=True)
    sp.add_argument("--metric", choices=("impurity", "permutation"),
                    default="impurity")
    _add_data_flags(sp, required=False)
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    _add_size_flags(sp, width=700, height=600)
    sp.set_defaults(func=cmd_importance)

    sp = sub.add_parser("export-tree", help="export one tree as a DOT digraph")
    sp.add_argument("--forest", required=True)
    sp.add_argument("--tree", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export_tree)

    return parser


def run(argv):
    """Execute one command line; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except UsageError as e:
        print(f"forestflow: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError) as e:
        print(f"forestflow: error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))
