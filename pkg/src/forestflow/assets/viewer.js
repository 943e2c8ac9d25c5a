/**
 * Interactive Sankey viewer for forest path-flow documents.
 *
 * Runs inside the self-contained document emitted by the renderer: reads
 * the JSON data island (element id "flow-data"), lays out ranked groups
 * as columns of blocks with link ribbons between them, and provides
 * hover highlighting, frequency tooltips, a threshold slider and
 * per-class selection.  All filtering happens client-side on the
 * embedded aggregates with the same semantics as the pipeline's
 * apply_threshold, so the two sides can be cross-checked fixture against
 * fixture; the underlying document is never mutated.
 *
 * Everything above the DOM-wiring section is a pure function of its
 * arguments.
 */
export const SUPPORTED_FORMAT_VERSION = "1";
const BLOCK_WIDTH = 18;
const BLOCK_GAP = 8;
const MARGIN = { top: 20, right: 20, bottom: 20, left: 20 };
const MIN_DARKNESS = 0.15;
const DEFAULT_RENDER_OPTIONS = {
    width: 960,
    height: 600,
    color_mode: "grayscale",
    label_format: "Node.{rank}_{label}",
};
/**
 * Parse and validate the data island text against schema version 1.
 * Throws an Error whose message is shown verbatim in the error panel.
 */
export function parseDocument(text) {
    let raw;
    try {
        raw = JSON.parse(text);
    }
    catch (e) {
        throw new Error(`flow document is not parseable JSON (${String(e)})`);
    }
    if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
        throw new Error("flow document must be a JSON object");
    }
    const doc = raw;
    if (doc.kind !== "forestflow-flows") {
        throw new Error(`unsupported document kind ${JSON.stringify(doc.kind)}`);
    }
    if (doc.format_version !== SUPPORTED_FORMAT_VERSION) {
        throw new Error(`unsupported format_version ${JSON.stringify(doc.format_version)} ` +
            `(this viewer supports "${SUPPORTED_FORMAT_VERSION}")`);
    }
    for (const key of ["groups", "edges", "covariate_names", "class_names"]) {
        if (!Array.isArray(doc[key])) {
            throw new Error(`flow document field ${JSON.stringify(key)} must be an array`);
        }
    }
    if (typeof doc.total_paths !== "number" || typeof doc.max_rank !== "number") {
        throw new Error("flow document needs numeric total_paths and max_rank");
    }
    return doc;
}
function groupKey(rank, label) {
    // "\u0000" cannot appear in a covariate name that came through JSON intact
    return label === null ? `${rank}\u0000` : `${rank}:${label}`;
}
/**
 * Client-side counterpart of the pipeline's apply_threshold: drop every
 * group whose share of its rank's paths is below theta, with all
 * incident edges; surviving totals are recomputed from surviving edges
 * as max(inflow, outflow); groups that never had edges keep their
 * totals; zero-flow groups disappear.  Residual maps each rank to the
 * removed fraction.
 */
export function applyThreshold(body, theta) {
    const rankSum = new Map();
    for (const g of body.groups) {
        rankSum.set(g.rank, (rankSum.get(g.rank) ?? 0) + g.total);
    }
    const removed = new Set();
    const residual = {};
    for (const rank of rankSum.keys())
        residual[rank] = 0;
    for (const g of body.groups) {
        if (g.total < theta * (rankSum.get(g.rank) ?? 0)) {
            removed.add(groupKey(g.rank, g.label));
            residual[g.rank] += g.total / (rankSum.get(g.rank) ?? 1);
        }
    }
    const keptEdges = body.edges.filter((e) => !removed.has(groupKey(e.rank, e.from)) &&
        !removed.has(groupKey(e.rank + 1, e.to)));
    const inflow = new Map();
    const outflow = new Map();
    for (const e of keptEdges) {
        const f = groupKey(e.rank, e.from);
        const t = groupKey(e.rank + 1, e.to);
        outflow.set(f, (outflow.get(f) ?? 0) + e.weight);
        inflow.set(t, (inflow.get(t) ?? 0) + e.weight);
    }
    const hadEdges = new Set();
    for (const e of body.edges) {
        hadEdges.add(groupKey(e.rank, e.from));
        hadEdges.add(groupKey(e.rank + 1, e.to));
    }
    const groups = [];
    for (const g of body.groups) {
        const key = groupKey(g.rank, g.label);
        if (removed.has(key))
            continue;
        if (!hadEdges.has(key)) {
            groups.push({ ...g });
            continue;
        }
        const total = Math.max(inflow.get(key) ?? 0, outflow.get(key) ?? 0);
        if (total > 0)
            groups.push({ ...g, total });
    }
    return { groups, edges: keptEdges.map((e) => ({ ...e })), residual };
}
/**
 * The view for a given (theta, selected class): picks the embedded
 * per-class aggregate when one is selected, then filters.  theta 0 with
 * no class reproduces the document's own groups and edges.
 */
export function selectView(doc, theta, selectedClass) {
    const clamped = Math.min(Math.max(theta, 0), 1);
    let base;
    if (selectedClass !== null) {
        const perClass = doc.class_aggregates?.[selectedClass];
        if (perClass === undefined) {
            throw new Error(`no embedded aggregate for class ${JSON.stringify(selectedClass)}`);
        }
        base = perClass;
    }
    else {
        base = { total_paths: doc.total_paths, groups: doc.groups, edges: doc.edges };
    }
    if (clamped === 0) {
        return {
            groups: base.groups.map((g) => ({ ...g })),
            edges: base.edges.map((e) => ({ ...e })),
            totalPaths: base.total_paths,
            residual: null,
        };
    }
    const filtered = applyThreshold(base, clamped);
    return {
        groups: filtered.groups,
        edges: filtered.edges,
        totalPaths: base.total_paths,
        residual: filtered.residual,
    };
}
/** "Node.1_x.17" style display label; Terminus uses the terminus label. */
export function formatBlockLabel(format, rank, label, terminusLabel) {
    return format
        .replace("{rank}", String(rank))
        .replace("{label}", label === null ? terminusLabel : label);
}
/** Percentage with at most one decimal place: 1 -> "100%", 1/3 -> "33.3%". */
export function formatPercent(fraction) {
    const rounded = Math.round(fraction * 1000) / 10;
    return (Number.isInteger(rounded) ? rounded.toFixed(0) : rounded.toFixed(1)) + "%";
}
/** Tooltip for a hovered link: both endpoint names with their ranks, the
 * path count, and the share of all paths. */
export function tooltipText(edge, totalPaths, terminusLabel) {
    const from = edge.from === null ? terminusLabel : edge.from;
    const to = edge.to === null ? terminusLabel : edge.to;
    const noun = edge.weight === 1 ? "path" : "paths";
    const pct = formatPercent(totalPaths > 0 ? edge.weight / totalPaths : 0);
    return (`${from} (Node ${edge.rank}) \u2192 ${to} (Node ${edge.rank + 1}): ` +
        `${edge.weight} ${noun} (${pct})`);
}
/** Indices into ``edges`` of every link incident to the given block. */
export function incidentEdges(edges, rank, label) {
    const out = [];
    edges.forEach((e, i) => {
        if ((e.rank === rank && e.from === label) ||
            (e.rank === rank - 1 && e.to === label)) {
            out.push(i);
        }
    });
    return out;
}
function sequentialColor(t) {
    const anchors = [
        [0.0, [68, 1, 84]],
        [0.25, [59, 82, 139]],
        [0.5, [33, 145, 140]],
        [0.75, [94, 201, 98]],
        [1.0, [253, 231, 37]],
    ];
    const tt = Math.min(Math.max(t, 0), 1);
    for (let i = 1; i < anchors.length; i++) {
        const [t0, c0] = anchors[i - 1];
        const [t1, c1] = anchors[i];
        if (tt <= t1) {
            const f = t1 === t0 ? 0 : (tt - t0) / (t1 - t0);
            const rgb = c0.map((a, k) => Math.round(a + (c1[k] - a) * f));
            return "#" + rgb.map((v) => v.toString(16).padStart(2, "0")).join("");
        }
    }
    const last = anchors[anchors.length - 1][1];
    return "#" + last.map((v) => v.toString(16).padStart(2, "0")).join("");
}
function linkColor(weight, maxWeight, colorMode) {
    const t = MIN_DARKNESS + (1 - MIN_DARKNESS) * (weight / maxWeight);
    if (colorMode === "sequential")
        return sequentialColor(t);
    const g = Math.round(255 * (1 - t));
    const hex = g.toString(16).padStart(2, "0");
    return `#${hex}${hex}${hex}`;
}
/**
 * Block rectangles and link ribbons for a filtered view.
 *
 * Columns sit at equal spacing by rank; within a column blocks sort by
 * descending total (ties by covariate order) with Terminus last; one
 * shared vertical scale, the tightest column's pixels-per-path, keeps
 * every block height proportional to its group total.  Link thickness
 * uses the same scale, and links stack along their blocks in document
 * order.
 */
export function layoutView(view, maxRank, covariateNames, opts) {
    const innerW = opts.width - MARGIN.left - MARGIN.right;
    const innerH = opts.height - MARGIN.top - MARGIN.bottom;
    const byRank = new Map();
    for (const g of view.groups) {
        const col = byRank.get(g.rank);
        if (col === undefined)
            byRank.set(g.rank, [g]);
        else
            col.push(g);
    }
    const covOrder = new Map();
    covariateNames.forEach((name, i) => covOrder.set(name, i));
    const orderKey = (g) => g.label === null ? [1, 0, 0] : [0, -g.total, covOrder.get(g.label) ?? 0];
    let scale = Infinity;
    for (const col of byRank.values()) {
        const colSum = col.reduce((s, g) => s + g.total, 0);
        const usable = innerH - BLOCK_GAP * (col.length - 1);
        if (usable > 0 && colSum > 0)
            scale = Math.min(scale, usable / colSum);
    }
    if (!Number.isFinite(scale))
        scale = 0;
    const colX = (rank) => maxRank === 1
        ? MARGIN.left + (innerW - BLOCK_WIDTH) / 2
        : MARGIN.left + ((rank - 1) * (innerW - BLOCK_WIDTH)) / (maxRank - 1);
    const blocks = [];
    const position = new Map();
    for (const [rank, col] of byRank) {
        const sorted = [...col].sort((a, b) => {
            const ka = orderKey(a);
            const kb = orderKey(b);
            for (let i = 0; i < 3; i++)
                if (ka[i] !== kb[i])
                    return ka[i] - kb[i];
            return 0;
        });
        let y = MARGIN.top;
        for (const g of sorted) {
            const block = {
                rank,
                label: g.label,
                total: g.total,
                x: colX(rank),
                y,
                h: g.total * scale,
            };
            blocks.push(block);
            position.set(groupKey(rank, g.label), block);
            y += block.h + BLOCK_GAP;
        }
    }
    const links = [];
    if (view.edges.length > 0) {
        const maxW = view.edges.reduce((m, e) => Math.max(m, e.weight), 0);
        const outOff = new Map();
        const inOff = new Map();
        for (const e of view.edges) {
            const fKey = groupKey(e.rank, e.from);
            const tKey = groupKey(e.rank + 1, e.to);
            const from = position.get(fKey);
            const to = position.get(tKey);
            if (from === undefined || to === undefined)
                continue; // stale edge: skip
            const th = e.weight * scale;
            const y0 = from.y + (outOff.get(fKey) ?? 0) + th / 2;
            const y1 = to.y + (inOff.get(tKey) ?? 0) + th / 2;
            outOff.set(fKey, (outOff.get(fKey) ?? 0) + th);
            inOff.set(tKey, (inOff.get(tKey) ?? 0) + th);
            links.push({
                edge: e,
                x0: from.x + BLOCK_WIDTH,
                y0,
                x1: to.x,
                y1,
                thickness: th,
                color: linkColor(e.weight, maxW, opts.color_mode),
            });
        }
    }
    return { blocks, links, width: opts.width, height: opts.height };
}
function escapeHtml(s) {
    return s
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
const fmt = (v) => v.toFixed(2);
/**
 * The SVG markup for a layout; a pure function so that "reset restores
 * the initial view" is literal string equality.  Blocks and links carry
 * data-i indices into the layout arrays for event delegation.
 */
export function renderSvg(layout, terminusLabel, labelFormat, colorMode) {
    const parts = [];
    parts.push(`<svg id="ff-canvas" xmlns="http://www.w3.org/2000/svg" ` +
        `width="${layout.width}" height="${layout.height}" ` +
        `viewBox="0 0 ${layout.width} ${layout.height}">`);
    layout.links.forEach((l, i) => {
        const mx = (l.x0 + l.x1) / 2;
        const d = `M ${fmt(l.x0)} ${fmt(l.y0)} C ${fmt(mx)} ${fmt(l.y0)}, ` +
            `${fmt(mx)} ${fmt(l.y1)}, ${fmt(l.x1)} ${fmt(l.y1)}`;
        parts.push(`<path class="ff-link" data-i="${i}" d="${d}" ` +
            `stroke="${l.color}" stroke-width="${fmt(l.thickness)}" ` +
            `stroke-opacity="0.55"/>`);
    });
    const blockFill = colorMode === "sequential" ? "#3b528b" : "#444444";
    layout.blocks.forEach((b, i) => {
        parts.push(`<rect class="ff-block" data-i="${i}" x="${fmt(b.x)}" y="${fmt(b.y)}" ` +
            `width="${BLOCK_WIDTH}" height="${fmt(Math.max(b.h, 1))}" ` +
            `fill="${blockFill}"/>`);
        const label = formatBlockLabel(labelFormat, b.rank, b.label, terminusLabel);
        parts.push(`<text class="ff-label" x="${fmt(b.x + BLOCK_WIDTH + 4)}" ` +
            `y="${fmt(b.y + Math.max(b.h, 1) / 2)}" dy="0.32em">` +
            `${escapeHtml(label)}</text>`);
    });
    parts.push("</svg>");
    return parts.join("");
}
/** "removed per rank ..." caption under the controls; empty at theta 0. */
export function residualCaption(residual) {
    if (residual === null)
        return "";
    const ranks = Object.keys(residual)
        .map(Number)
        .sort((a, b) => a - b);
    const body = ranks
        .map((r) => `Node ${r}: ${formatPercent(residual[r])}`)
        .join(" \u00b7 ");
    return `removed per rank: ${body}`;
}
export function headerText(doc, view) {
    const trees = doc.n_trees === 1 ? "tree" : "trees";
    const paths = view.totalPaths === 1 ? "path" : "paths";
    return (`${doc.n_trees} ${trees} \u00b7 max rank ${doc.max_rank} \u00b7 ` +
        `${view.totalPaths} ${paths}`);
}
function controlsHtml(doc) {
    const classOptions = ['<option value="">all classes</option>']
        .concat(doc.class_names.map((c) => `<option value="${escapeHtml(c)}">${escapeHtml(c)}</option>`))
        .join("");
    const classControl = doc.class_aggregates
        ? `<label>class <select id="ff-class">${classOptions}</select></label>`
        : "";
    return (`<div class="ff-header"><h1>Forest path flows</h1>` +
        `<p id="ff-summary"></p></div>` +
        `<div class="ff-controls">` +
        `<label>threshold <input id="ff-theta" type="range" min="0" max="1" ` +
        `step="0.01" value="0"> <span id="ff-theta-value">0.00</span></label>` +
        classControl +
        `<button id="ff-reset" type="button">reset</button>` +
        `</div>` +
        `<div class="ff-residual" id="ff-residual"></div>` +
        `<div id="ff-svg-host"></div>` +
        `<div class="ff-tooltip" id="ff-tooltip"></div>`);
}
export function init(app, doc) {
    const opts = doc.render_options ?? DEFAULT_RENDER_OPTIONS;
    const state = { theta: 0, selectedClass: null };
    let view = selectView(doc, 0, null);
    let layout = layoutView(view, doc.max_rank, doc.covariate_names, opts);
    app.innerHTML = controlsHtml(doc);
    const byId = (id) => app.querySelector(`#${id}`);
    const host = byId("ff-svg-host");
    const summary = byId("ff-summary");
    const residualEl = byId("ff-residual");
    const tooltip = byId("ff-tooltip");
    const thetaInput = byId("ff-theta");
    const thetaValue = byId("ff-theta-value");
    const classSelect = app.querySelector("#ff-class");
    const redraw = () => {
        view = selectView(doc, state.theta, state.selectedClass);
        layout = layoutView(view, doc.max_rank, doc.covariate_names, opts);
        host.innerHTML = renderSvg(layout, doc.terminus_label, opts.label_format, opts.color_mode);
        summary.textContent = headerText(doc, view);
        residualEl.textContent = residualCaption(view.residual);
        thetaValue.textContent = state.theta.toFixed(2);
        tooltip.style.display = "none";
    };
    thetaInput.addEventListener("input", () => {
        state.theta = Math.min(Math.max(Number(thetaInput.value) || 0, 0), 1);
        redraw();
    });
    classSelect?.addEventListener("change", () => {
        state.selectedClass = classSelect.value === "" ? null : classSelect.value;
        redraw();
    });
    byId("ff-reset").addEventListener("click", () => {
        state.theta = 0;
        state.selectedClass = null;
        thetaInput.value = "0";
        if (classSelect)
            classSelect.value = "";
        redraw();
    });
    const clearHover = () => {
        tooltip.style.display = "none";
        for (const el of host.querySelectorAll(".ff-hot"))
            el.classList.remove("ff-hot");
        for (const el of host.querySelectorAll(".ff-dim"))
            el.classList.remove("ff-dim");
    };
    const highlight = (indices) => {
        host.querySelectorAll(".ff-link").forEach((el) => {
            const i = Number(el.dataset.i);
            el.classList.toggle("ff-hot", indices.has(i));
            el.classList.toggle("ff-dim", !indices.has(i));
        });
    };
    host.addEventListener("mousemove", (ev) => {
        const target = ev.target;
        const linkEl = target?.closest?.(".ff-link");
        const blockEl = target?.closest?.(".ff-block");
        if (linkEl) {
            const link = layout.links[Number(linkEl.dataset.i)];
            highlight(new Set([Number(linkEl.dataset.i)]));
            tooltip.textContent = tooltipText(link.edge, view.totalPaths, doc.terminus_label);
            tooltip.style.display = "block";
            tooltip.style.left = `${ev.clientX + 12}px`;
            tooltip.style.top = `${ev.clientY + 12}px`;
            return;
        }
        if (blockEl) {
            const block = layout.blocks[Number(blockEl.dataset.i)];
            const incident = incidentEdges(view.edges, block.rank, block.label);
            const indices = new Set();
            layout.links.forEach((l, i) => {
                if (incident.some((j) => view.edges[j] === l.edge))
                    indices.add(i);
            });
            highlight(indices);
            tooltip.style.display = "none";
            return;
        }
        clearHover();
    });
    host.addEventListener("mouseleave", clearHover);
    redraw();
}
function boot() {
    if (typeof document === "undefined")
        return;
    const island = document.getElementById("flow-data");
    const app = document.getElementById("app");
    if (app === null)
        return;
    try {
        if (island === null)
            throw new Error("no flow-data island in this document");
        init(app, parseDocument(island.textContent ?? ""));
    }
    catch (e) {
        const message = e instanceof Error ? e.message : String(e);
        app.innerHTML = `<div class="ff-error">${escapeHtml(message)}</div>`;
    }
}
boot();
