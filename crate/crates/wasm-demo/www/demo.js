import init, { Demo } from "./pkg/rashgam_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");
const PAD = { l: 56, r: 16, t: 16, b: 36 };

let demo, view;
let work; // edited vector
let overlay = null; // result of project / monotone
let band = null;
let drag = null;

function steps(j, vec) {
  const sf = view.shape_functions[j];
  const [a] = view.blocks[j];
  return sf.steps.map((s, i) => ({ lo: s.lo, hi: s.hi, value: vec[a + i] }));
}

function scales(j) {
  const sf = view.shape_functions[j].steps;
  const x0 = sf[0].lo, x1 = sf[sf.length - 1].hi;
  const [a, b] = view.blocks[j];
  const vals = [];
  for (const v of [view.center, work, overlay && overlay.omega]) if (v) vals.push(...v.slice(a, b));
  if (band) for (const c of band.curves) vals.push(...c);
  let y0 = Math.min(...vals), y1 = Math.max(...vals);
  const m = 0.1 * (y1 - y0 || 1);
  y0 -= m; y1 += m;
  const W = canvas.width - PAD.l - PAD.r, H = canvas.height - PAD.t - PAD.b;
  return {
    x: (x) => PAD.l + ((x - x0) / (x1 - x0)) * W,
    y: (y) => PAD.t + (1 - (y - y0) / (y1 - y0)) * H,
    inv: (py) => y0 + (1 - (py - PAD.t) / H) * (y1 - y0),
    x0, x1, y0, y1,
  };
}

function drawSteps(st, sc, color, width) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  st.forEach((s, i) => {
    const xa = sc.x(s.lo), xb = sc.x(s.hi), y = sc.y(s.value);
    if (i === 0) ctx.moveTo(xa, y); else ctx.lineTo(xa, y);
    ctx.lineTo(xb, y);
  });
  ctx.stroke();
}

function draw() {
  const j = +$("feature").value;
  const sc = scales(j);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  ctx.fillText(sc.y1.toFixed(2), 4, PAD.t + 10);
  ctx.fillText(sc.y0.toFixed(2), 4, canvas.height - PAD.b);
  ctx.fillText(sc.x0.toPrecision(4), PAD.l, canvas.height - 12);
  ctx.fillText(sc.x1.toPrecision(4), canvas.width - PAD.r - 40, canvas.height - 12);
  if (sc.y0 < 0 && sc.y1 > 0) {
    ctx.strokeStyle = "#eee";
    ctx.beginPath();
    ctx.moveTo(PAD.l, sc.y(0));
    ctx.lineTo(canvas.width - PAD.r, sc.y(0));
    ctx.stroke();
  }
  if (band) {
    const [a] = view.blocks[j];
    for (const c of band.curves) {
      const v = view.center.slice();
      c.forEach((x, i) => (v[a + i] = x));
      drawSteps(steps(j, v), sc, "rgba(122,167,216,0.35)", 1);
    }
  }
  drawSteps(steps(j, view.center), sc, "#999", 2);
  if (overlay) drawSteps(steps(j, overlay.omega), sc, "#2a7d2a", 2.5);
  drawSteps(steps(j, work), sc, "#b3261e", 2);
}

function updateBadge() {
  const [q, inside] = demo.contains(Float64Array.from(work));
  const b = $("badge");
  b.className = inside ? "in" : "out";
  b.textContent = inside ? "in set" : "outside";
  $("qval").textContent = `q = ${q.toFixed(4)}`;
}

function status(msg) {
  $("status").textContent = msg;
}

function guard(fn) {
  return (...args) => {
    try {
      fn(...args);
    } catch (e) {
      status(`error: ${e.message || e}`);
    }
  };
}

function stepAt(j, px) {
  const sc = scales(j);
  const st = steps(j, work);
  for (let i = 0; i < st.length; i++) if (px >= sc.x(st[i].lo) && px <= sc.x(st[i].hi)) return i;
  return -1;
}

canvas.addEventListener("pointerdown", guard((ev) => {
  const j = +$("feature").value;
  const i = stepAt(j, ev.offsetX);
  if (i < 0) return;
  drag = { j, i, sc: scales(j) };
  canvas.setPointerCapture(ev.pointerId);
}));

canvas.addEventListener("pointermove", guard((ev) => {
  if (!drag) return;
  work[view.blocks[drag.j][0] + drag.i] = drag.sc.inv(ev.offsetY);
  overlay = null;
  updateBadge();
  draw();
}));

canvas.addEventListener("pointerup", () => {
  drag = null;
  draw();
});

$("project").onclick = guard(() => {
  overlay = JSON.parse(demo.project(Float64Array.from(work)));
  status(overlay.inside_already
    ? "Edit is already inside the set; returned unchanged."
    : `Projected onto the boundary, distance ${overlay.distance.toFixed(4)}.`);
  work = overlay.omega.slice();
  updateBadge();
  draw();
});

for (const [id, up] of [["mono-up", true], ["mono-down", false]]) {
  $(id).onclick = guard(() => {
    const j = +$("feature").value;
    const r = JSON.parse(demo.monotone(j, up));
    overlay = r;
    work = r.omega.slice();
    status(`${r.feasible ? "Feasible" : "Infeasible"} monotone repair, q = ${r.q.toFixed(4)}.`);
    updateBadge();
    draw();
  });
}

$("band").onclick = guard(() => {
  const j = +$("feature").value;
  band = JSON.parse(demo.band(j, 40, (Math.random() * 2 ** 31) | 0));
  status(`${band.curves.length} models drawn uniformly from the ellipsoid.`);
  draw();
});

$("reset").onclick = guard(() => {
  work = view.center.slice();
  overlay = null;
  band = null;
  status("");
  updateBadge();
  draw();
});

$("feature").onchange = () => {
  band = null;
  draw();
};

await init();
demo = Demo.bundled();
view = JSON.parse(demo.view());
work = view.center.slice();
view.feature_names.forEach((n, j) => {
  const o = document.createElement("option");
  o.value = j;
  o.textContent = n;
  $("feature").appendChild(o);
});
$("feature").value = String(view.feature_names.indexOf("Glucose"));
updateBadge();
draw();
