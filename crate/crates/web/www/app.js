import init, { sample_graph, graph_summary, replacement_tree, continuum } from "./pkg/dso_web.js";

const $ = (id) => document.getElementById(id);
const SVG = "http://www.w3.org/2000/svg";
const state = { text: "", graph: null, failures: new Set(), sweep: null };

function fail(err) {
  $("details").innerHTML = "";
  const span = document.createElement("span");
  span.className = "error";
  span.textContent = String(err);
  $("details").append(span);
}

function layout(n) {
  const r = 190, cx = 320, cy = 240;
  return Array.from({ length: n }, (_, i) => {
    const a = (2 * Math.PI * i) / n - Math.PI / 2;
    return [cx + r * Math.cos(a), cy + r * Math.sin(a)];
  });
}

function el(name, attrs, parent) {
  const e = document.createElementNS(SVG, name);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  parent.append(e);
  return e;
}

function draw(edgeStyle, labels) {
  const svg = $("view");
  svg.replaceChildren();
  const defs = el("defs", {}, svg);
  const marker = el("marker", { id: "arrow", viewBox: "0 0 10 10", refX: 22, refY: 5, markerWidth: 6, markerHeight: 6, orient: "auto" }, defs);
  el("path", { d: "M0,0 L10,5 L0,10 z", fill: "#666" }, marker);
  const pos = layout(state.graph.n);
  const target = Number($("target").value);
  for (const e of state.graph.edges) {
    const [x1, y1] = pos[e.src], [x2, y2] = pos[e.dst];
    const style = edgeStyle(e);
    const line = el("line", { x1, y1, x2, y2, class: style.cls ?? "edge", "marker-end": "url(#arrow)" }, svg);
    if (style.width) line.setAttribute("stroke-width", style.width);
    if (style.label) {
      const t = el("text", { x: (x1 + x2) / 2, y: (y1 + y2) / 2 - 4, "font-size": 11, fill: "#555" }, svg);
      t.textContent = style.label;
    }
  }
  pos.forEach(([x, y], v) => {
    const cls = v === target ? "node target" : state.failures.has(v) ? "node failed" : "node";
    const g = el("g", { class: cls }, svg);
    el("circle", { cx: x, cy: y, r: 16 }, g);
    const t = el("text", { x, y }, g);
    t.textContent = v;
    if (labels[v] !== undefined) {
      const d = el("text", { x, y: y + 28, "font-size": 11 }, g);
      d.textContent = labels[v];
    }
    g.addEventListener("click", (ev) => toggle(v, ev.shiftKey));
  });
}

function toggle(v, makeTarget) {
  if (makeTarget) {
    $("target").value = v;
    state.failures.delete(v);
    state.sweep = null;
  } else if (v !== Number($("target").value)) {
    state.failures.has(v) ? state.failures.delete(v) : state.failures.add(v);
  }
  render();
}

function showTree() {
  const target = Number($("target").value);
  const failures = [...state.failures].join(",");
  $("failures").value = failures;
  const out = JSON.parse(replacement_tree(state.text, target, failures));
  const succ = new Map(out.result.nodes.map((n) => [n.id, n.successor]));
  const labels = {};
  for (const n of out.result.nodes) {
    if (n.status === "ok") labels[n.id] = `d=${n.distance}`;
    else if (n.status === "unreachable") labels[n.id] = "∞";
  }
  draw((e) => (succ.get(e.src) === e.dst ? { cls: "edge tree", label: e.weight } : { label: e.weight }), labels);
  $("details").textContent = out.dot;
}

function showContinuum() {
  const target = Number($("target").value);
  if (!state.sweep || state.sweep.target !== target) {
    state.sweep = JSON.parse(continuum(state.text, target, ""));
    $("alpha").max = state.sweep.blocks.length - 1;
    $("alpha").value = 0;
  }
  const block = state.sweep.blocks[Number($("alpha").value)];
  $("alpha-value").textContent = block.alpha.toExponential(3);
  const p = new Map(block.edges.map((e) => [`${e.src}-${e.dst}`, e.p]));
  const labels = {};
  block.hitting_cost.forEach((u, v) => { if (u !== null && v !== target) labels[v] = `U=${u.toFixed(3)}`; });
  draw((e) => {
    const q = p.get(`${e.src}-${e.dst}`) ?? 0;
    return { cls: q > 0.5 ? "edge tree" : "edge", width: 1 + 5 * q, label: q.toFixed(3) };
  }, labels);
  $("details").textContent = block.hitting_cost.map((u, v) => `${v}\t${u ?? "-"}`).join("\n");
}

function render() {
  if (!state.graph) return;
  const continuumMode = $("mode").value === "continuum";
  $("alpha-row").hidden = !continuumMode;
  try {
    continuumMode ? showContinuum() : showTree();
  } catch (err) {
    fail(err);
  }
}

function load() {
  try {
    state.text = $("graph").value;
    state.graph = JSON.parse(graph_summary(state.text));
    state.failures.clear();
    state.sweep = null;
    const t = Math.min(Number($("target").value), state.graph.n - 1);
    $("target").value = Math.max(t, 0);
    $("target").max = state.graph.n - 1;
    const { n, d_max, delta, diameter, alpha_bound } = state.graph;
    $("summary").textContent = `n\t${n}\nedges\t${state.graph.edges.length}\nd_max\t${d_max}\ndelta\t${delta}\ndiameter\t${diameter}\nalpha*\t${alpha_bound.toExponential(4)}`;
    render();
  } catch (err) {
    state.graph = null;
    fail(err);
  }
}

await init();
$("graph").value = sample_graph();
$("target").value = 5;
$("load").addEventListener("click", load);
$("target").addEventListener("change", () => { state.failures.delete(Number($("target").value)); state.sweep = null; render(); });
$("mode").addEventListener("change", render);
$("alpha").addEventListener("input", render);
load();
