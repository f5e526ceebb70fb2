// Built with: wasm-pack build crates/demo --target web --out-dir www/pkg
import init, { WasmSession } from "./pkg/mgcn_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
let session = null;

function status(msg) {
  $("status").textContent = msg || "";
}

function number(id) {
  return Number($(id).value);
}

function graphOptions() {
  const o = {};
  for (const id of ["layers", "nodes", "communities", "p_in", "p_out", "q_same", "q_diff", "ratio", "seed"]) {
    o[id] = number(id);
  }
  o.label_all_layers = $("label_all_layers").checked;
  return o;
}

function trainOptions() {
  return {
    epochs: number("epochs"),
    dim: number("dim"),
    lambda: number("lambda"),
    learning_rate: number("learning_rate"),
    use_between_edges: $("use_between_edges").checked,
  };
}

function fillSelectors(layers) {
  $("layer").innerHTML = "";
  $("pair").innerHTML = "";
  for (let k = 0; k < layers; k++) {
    $("layer").add(new Option(String(k + 1), k));
    for (let l = k; l < layers; l++) {
      $("pair").add(new Option(`${k + 1}-${l + 1}`, `${k},${l}`));
    }
  }
}

function drawLoss(values) {
  const c = $("loss").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  if (values.length < 2) return;
  const lo = Math.min(...values), hi = Math.max(...values);
  const y = (v) => h - 10 - ((v - lo) / (hi - lo || 1)) * (h - 20);
  c.strokeStyle = "#333";
  c.beginPath();
  values.forEach((v, i) => {
    const x = 5 + (i / (values.length - 1)) * (w - 10);
    i ? c.lineTo(x, y(v)) : c.moveTo(x, y(v));
  });
  c.stroke();
  c.fillStyle = "#666";
  c.fillText(hi.toPrecision(4), 6, 12);
  c.fillText(lo.toPrecision(4), 6, h - 2);
}

function drawScatter() {
  if (!session) return;
  const p = JSON.parse(session.project(Number($("layer").value)));
  const c = $("scatter").getContext("2d");
  const { width: w, height: h } = c.canvas;
  c.clearRect(0, 0, w, h);
  const xs = p.points.map((q) => q[0]), ys = p.points.map((q) => q[1]);
  const span = (a) => [Math.min(...a), Math.max(...a) - Math.min(...a) || 1];
  const [x0, dx] = span(xs), [y0, dy] = span(ys);
  p.points.forEach(([x, y], i) => {
    c.fillStyle = COLORS[p.community[i] % COLORS.length];
    const px = 10 + ((x - x0) / dx) * (w - 20), py = h - 10 - ((y - y0) / dy) * (h - 20);
    c.beginPath();
    c.arc(px, py, p.train[i] ? 4 : 2.5, 0, 2 * Math.PI);
    c.fill();
  });
}

function drawHeatmap() {
  if (!session) return;
  const [k, l] = $("pair").value.split(",").map(Number);
  const m = JSON.parse(session.heatmap(k, l));
  const c = $("heatmap").getContext("2d");
  const { width: w, height: h } = c.canvas;
  const img = c.createImageData(w, h);
  const edges = $("show_edges").checked;
  for (let py = 0; py < h; py++) {
    const i = Math.floor((py / h) * m.rows);
    for (let px = 0; px < w; px++) {
      const j = Math.floor((px / w) * m.cols);
      const v = edges ? m.edge[i * m.cols + j] : m.probability[i * m.cols + j];
      const shade = 255 - Math.round(v * 255);
      const o = 4 * (py * w + px);
      img.data[o] = shade;
      img.data[o + 1] = shade;
      img.data[o + 2] = 255;
      img.data[o + 3] = 255;
    }
  }
  c.putImageData(img, 0, 0);
}

function guard(f) {
  return () => {
    try {
      status("");
      f();
    } catch (e) {
      status(e.message || String(e));
    }
  };
}

$("generate").onclick = guard(() => {
  session?.free();
  session = new WasmSession(JSON.stringify(graphOptions()));
  fillSelectors(number("layers"));
  $("train").disabled = false;
  drawLoss([]);
  $("scores").textContent = "";
  for (const id of ["scatter", "heatmap"]) {
    const c = $(id);
    c.getContext("2d").clearRect(0, 0, c.width, c.height);
  }
});

$("train").onclick = guard(() => {
  const p = JSON.parse(session.train(JSON.stringify(trainOptions())));
  drawLoss(p.total);
  $("scores").textContent = p.micro_f1 == null
    ? `epochs ${p.epochs}`
    : `epochs ${p.epochs}  micro-F1 ${p.micro_f1.toFixed(3)}  macro-F1 ${p.macro_f1.toFixed(3)}  (n=${p.n_test})`;
  drawScatter();
  drawHeatmap();
});

$("layer").onchange = guard(drawScatter);
$("pair").onchange = guard(drawHeatmap);
$("show_edges").onchange = guard(drawHeatmap);

await init();
$("generate").click();
