import init, { landscape, run_trace, probe } from "./pkg/bbo_demo.js";

const GRID = 96;
const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");

const TASKS = [
  ...Array.from({ length: 10 }, (_, i) => `fn_${String(i).padStart(3, "0")}`),
  "fn_sphere",
  "phys_000",
  "phys_001",
  "bbob2d_f01_i1",
  "bbob2d_f15_i1",
  "bbob2d_f21_i1",
];

let view = null;

function color(t) {
  // Dark blue for low loss, pale yellow for high.
  const r = Math.round(20 + 235 * t);
  const g = Math.round(40 + 200 * t);
  const b = Math.round(110 + 60 * (1 - t));
  return [r, g, b];
}

function drawLandscape(data) {
  const { n, values, lower, upper } = data;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const img = ctx.createImageData(n, n);
  values.forEach((v, i) => {
    // Log scaling keeps narrow basins visible.
    const t = hi > lo ? Math.log1p((v - lo) / (hi - lo) * 99) / Math.log(100) : 0;
    const [r, g, b] = color(t);
    img.data.set([r, g, b, 255], 4 * i);
  });
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = true;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  view = { lower, upper };
  if (data.optimum) marker(data.optimum, "#fff", "x");
}

function px([x, y]) {
  const { lower, upper } = view;
  return [
    ((x - lower[0]) / (upper[0] - lower[0])) * canvas.width,
    (1 - (y - lower[1]) / (upper[1] - lower[1])) * canvas.height,
  ];
}

function marker(p, fill, shape = "o", size = 4) {
  const [x, y] = px(p);
  ctx.strokeStyle = fill;
  ctx.fillStyle = fill;
  ctx.lineWidth = 2;
  ctx.beginPath();
  if (shape === "x") {
    ctx.moveTo(x - 6, y - 6); ctx.lineTo(x + 6, y + 6);
    ctx.moveTo(x + 6, y - 6); ctx.lineTo(x - 6, y + 6);
    ctx.stroke();
  } else {
    ctx.arc(x, y, size, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function call(fn, ...args) {
  $("error").textContent = "";
  try {
    return JSON.parse(fn(...args));
  } catch (e) {
    $("error").textContent = String(e);
    return null;
  }
}

function runSearch() {
  const task = $("task").value;
  const land = call(landscape, task, GRID);
  if (!land) return;
  drawLandscape(land);
  const trace = call(run_trace, task, $("method").value, $("policy").value,
    Number($("seed").value), Number($("budget").value));
  if (!trace) return;
  const pts = trace.points;
  ctx.strokeStyle = "rgba(255,255,255,0.6)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  pts.forEach(([p], i) => {
    const [x, y] = px(p);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  pts.forEach(([p, , injected], i) => {
    const t = pts.length > 1 ? i / (pts.length - 1) : 1;
    marker(p, injected ? "#f0f" : `hsl(${10 + 40 * t}, 95%, ${35 + 30 * t}%)`, "o", 3);
  });
  const m = trace.metrics;
  const best = pts[m.best_step - 1][0];
  marker(best, "#0f0", "o", 6);
  $("metrics").textContent =
    `best loss ${m.best_loss.toPrecision(5)} at step ${m.best_step}, ` +
    `coverage ${m.coverage_final.toFixed(1)}%, ` +
    `L ${m.L === null ? "n/a" : m.L.toFixed(3)}, fallbacks ${m.fallback_count}`;
  $("prompt").hidden = true;
}

function runProbe() {
  const land = call(landscape, "fn_sphere", GRID);
  if (!land) return;
  drawLandscape(land);
  const res = call(probe, $("probe-policy").value, $("bo").checked, Number($("probe-seed").value));
  if (!res) return;
  res.seed_points.forEach((o) => marker(o.point, "#888", "o", 4));
  const colors = { near_best: "#1a7f37", near_last: "#c2410c", neither: "#6d28d9" };
  const counts = { near_best: 0, near_last: 0, neither: 0 };
  res.rounds.forEach((r, i) => {
    counts[r.anchor] += 1;
    marker(r.point, colors[r.anchor], "o", 6);
    const [x, y] = px(r.point);
    ctx.fillStyle = "#000";
    ctx.fillText(String(i + 1), x + 7, y - 7);
  });
  $("metrics").textContent =
    `near best ${counts.near_best}, near last ${counts.near_last}, neither ${counts.neither}`;
  $("prompt").textContent = res.prompt;
  $("prompt").hidden = false;
}

await init();
for (const id of TASKS) $("task").add(new Option(id, id));
$("run").addEventListener("click", runSearch);
$("probe").addEventListener("click", runProbe);
runSearch();
