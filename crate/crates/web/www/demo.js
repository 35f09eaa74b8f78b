import init, { gamma_schedule, generate_graph, solve } from "./pkg/kgroup_web.js";

const $ = (id) => document.getElementById(id);
const PALETTE = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45",
  "#469990", "#9a6324", "#800000", "#808000", "#000075", "#a9a9a9"];

function color(g) {
  return g < PALETTE.length ? PALETTE[g] : `hsl(${(g * 47) % 360} 60% 45%)`;
}

function num(id) {
  const v = $(id).value.trim();
  return v === "" ? null : Number(v);
}

// Line chart of several series over a shared x axis.
function plot(canvas, xs, series, label) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 34;
  ctx.clearRect(0, 0, w, h);
  ctx.font = "11px sans-serif";
  const xmin = xs[0], xmax = xs[xs.length - 1] || 1;
  series.forEach((s, i) => {
    const lo = Math.min(...s.values), hi = Math.max(...s.values);
    const span = hi - lo || 1;
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, j) => {
      const x = pad + ((xs[j] - xmin) / (xmax - xmin || 1)) * (w - 2 * pad);
      const y = h - pad - ((v - lo) / span) * (h - 2 * pad);
      j ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(`${s.name} [${lo.toPrecision(3)}, ${hi.toPrecision(3)}]`, pad + 4, 14 + 13 * i);
  });
  ctx.fillStyle = "#555";
  ctx.fillText(`${label} ${xmin}..${xmax}`, w - pad - 90, h - 10);
  if (xmin <= 0 && xmax > 0 && series.some((s) => s.zeroLine)) {
    const s = series.find((s) => s.zeroLine);
    const lo = Math.min(...s.values), hi = Math.max(...s.values);
    if (lo < 0 && hi > 0) {
      const y = h - pad - ((0 - lo) / (hi - lo)) * (h - 2 * pad);
      ctx.strokeStyle = "#ccc";
      ctx.beginPath();
      ctx.moveTo(pad, y);
      ctx.lineTo(w - pad, y);
      ctx.stroke();
    }
  }
}

function drawGraph(view) {
  const canvas = $("graph");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 20;
  const at = (v) => [pad + view.layout[v][0] * (w - 2 * pad), pad + view.layout[v][1] * (h - 2 * pad)];
  ctx.clearRect(0, 0, w, h);
  for (const e of view.edges) {
    const split = e.some((v) => view.assignment[v] !== view.assignment[e[0]]);
    ctx.strokeStyle = split ? "rgba(0,0,0,0.15)" : "rgba(0,0,0,0.55)";
    ctx.lineWidth = e.length > 2 ? 0.6 : 1;
    for (let i = 0; i < e.length; i++) {
      for (let j = i + 1; j < e.length; j++) {
        const [x1, y1] = at(e[i]), [x2, y2] = at(e[j]);
        ctx.beginPath();
        ctx.moveTo(x1, y1);
        ctx.lineTo(x2, y2);
        ctx.stroke();
      }
    }
  }
  // ring thickness shows how undecided the relaxed row still is
  view.assignment.forEach((g, v) => {
    const [x, y] = at(v);
    ctx.fillStyle = color(g);
    ctx.beginPath();
    ctx.arc(x, y, 7, 0, 2 * Math.PI);
    ctx.fill();
    if (view.gini[v] > 1e-3) {
      ctx.strokeStyle = "#000";
      ctx.lineWidth = 1 + 6 * view.gini[v];
      ctx.stroke();
    }
  });
}

function run(fn) {
  try {
    fn();
  } catch (e) {
    $("report").className = "error";
    $("report").textContent = String(e);
  }
}

function onGenerate() {
  run(() => {
    $("instance").value = generate_graph(num("gen-n"), num("gen-m"), BigInt(num("gen-seed") ?? 0));
    $("format").value = "edgelist";
  });
}

function onSolve() {
  $("report").className = "";
  $("report").textContent = "training…";
  // let the message paint before the synchronous solve
  setTimeout(() => run(() => {
    const options = { epochs: num("epochs"), restarts: num("restarts"), seed: num("seed"), anneal: $("anneal").checked };
    if (num("k") !== null) options.k = num("k");
    const t = performance.now();
    const view = JSON.parse(solve($("problem").value, $("instance").value, $("format").value, JSON.stringify(options)));
    const secs = ((performance.now() - t) / 1000).toFixed(2);
    drawGraph(view);
    const xs = view.trace.map((p) => p.epoch);
    plot($("trace"), xs, [
      { name: "loss", color: "#4363d8", values: view.trace.map((p) => p.loss) },
      { name: "mean Gini", color: "#e6194b", values: view.trace.map((p) => p.mean_gini) },
      { name: "γ", color: "#3cb44b", values: view.trace.map((p) => p.gamma), zeroLine: true },
    ], "epoch");
    const r = view.report;
    const lines = [
      `${view.problem}: ${view.feasible ? "feasible" : "infeasible"}, objective ${r.objective} (k = ${view.k})`,
      `violated terms ${r.violated_terms}, colors used ${r.colors_used}` + (r.cut !== undefined ? `, cut ${r.cut}` : ""),
      `group sizes [${r.group_sizes.join(", ")}], B1 ${r.b1.toFixed(3)}, B2 ${r.b2.toFixed(3)}`,
      `first feasible snapshot at epoch ${view.first_feasible_epoch ?? "never"}; ${secs}s`,
    ];
    $("report").textContent = lines.join("\n");
  }), 20);
}

function onGamma() {
  run(() => {
    const values = Array.from(gamma_schedule(num("g0"), num("t0"), num("gt")));
    plot($("gamma"), values.map((_, i) => i), [{ name: "γ(t)", color: "#3cb44b", values, zeroLine: true }], "epoch");
  });
}

await init();
$("gen").addEventListener("click", onGenerate);
$("solve").addEventListener("click", onSolve);
$("plot-gamma").addEventListener("click", onGamma);
onGenerate();
onGamma();
