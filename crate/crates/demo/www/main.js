import init, { karcherConvergence, eigConvergence, sphereTransport } from "./pkg/rslbfgs_demo.js";

const COLORS = { "rsv-lbfgs": "#c0392b", "rsvrg": "#2471a3", "vr-pca": "#239b56" };

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function setStatus(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "status error" : "status";
}

function plotCurves(canvas, curves) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = { l: 50, r: 130, t: 10, b: 30 };
  ctx.clearRect(0, 0, W, H);
  const pts = curves.flatMap((c) => c.passes.map((p, i) => [p, c.error[i]])).filter(([, e]) => e > 0);
  if (pts.length === 0) return;
  const xmax = Math.max(...pts.map(([p]) => p), 1);
  const ys = pts.map(([, e]) => Math.log10(e));
  const ymin = Math.floor(Math.min(...ys)), ymax = Math.ceil(Math.max(...ys));
  const sx = (p) => pad.l + (p / xmax) * (W - pad.l - pad.r);
  const sy = (y) => pad.t + ((ymax - y) / Math.max(ymax - ymin, 1)) * (H - pad.t - pad.b);

  ctx.strokeStyle = "#eee";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  for (let y = ymin; y <= ymax; y++) {
    ctx.beginPath(); ctx.moveTo(pad.l, sy(y)); ctx.lineTo(W - pad.r, sy(y)); ctx.stroke();
    ctx.fillText(`1e${y}`, 8, sy(y) + 4);
  }
  ctx.fillText("passes", W - pad.r - 40, H - 8);
  ctx.fillText(String(xmax), W - pad.r - 10, H - 20);
  ctx.fillText("0", pad.l, H - 20);

  curves.forEach((c, k) => {
    ctx.strokeStyle = COLORS[c.algorithm] || "#000";
    ctx.lineWidth = 2;
    ctx.beginPath();
    let started = false;
    c.passes.forEach((p, i) => {
      if (!(c.error[i] > 0)) return;
      const x = sx(p), y = sy(Math.log10(c.error[i]));
      if (started) ctx.lineTo(x, y); else { ctx.moveTo(x, y); started = true; }
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(c.algorithm, W - pad.r + 10, pad.t + 16 + 16 * k);
  });
}

function summary(curves) {
  return curves
    .map((c) => `${c.algorithm}: ${c.error[c.error.length - 1].toExponential(2)} after ${c.passes[c.passes.length - 1]} passes`)
    .join("; ");
}

function runConvergence(prefix, call) {
  setStatus(`${prefix}-status`, "running...");
  // let the status paint before the synchronous run blocks the page
  setTimeout(() => {
    const t0 = performance.now();
    const out = JSON.parse(call());
    if (out.error) {
      setStatus(`${prefix}-status`, out.error, true);
      return;
    }
    plotCurves($(`${prefix}-plot`), out.curves);
    setStatus(`${prefix}-status`, `${summary(out.curves)} (${((performance.now() - t0) / 1000).toFixed(2)} s)`);
  }, 20);
}

function drawTransport() {
  const out = JSON.parse(sphereTransport(num("t-heading"), num("t-arc"), num("t-angle"), 60));
  if (out.error) {
    setStatus("t-status", out.error, true);
    return;
  }
  const canvas = $("t-plot"), ctx = canvas.getContext("2d");
  const W = canvas.width, R = W * 0.42, c = W / 2;
  // oblique orthographic view: tilt the north pole toward the viewer
  const tilt = 0.9, ct = Math.cos(tilt), st = Math.sin(tilt);
  const view = ([x, y, z]) => [x, y * ct - z * st, y * st + z * ct];
  const screen = ([x, y]) => [c + R * x, c - R * y];

  ctx.clearRect(0, 0, W, W);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath(); ctx.arc(c, c, R, 0, 2 * Math.PI); ctx.stroke();

  ctx.strokeStyle = "#555";
  ctx.lineWidth = 2;
  ctx.beginPath();
  out.path.forEach((p, i) => {
    const [sx, sy] = screen(view(p));
    if (i === 0) ctx.moveTo(sx, sy); else ctx.lineTo(sx, sy);
  });
  ctx.stroke();

  ctx.strokeStyle = "#c0392b";
  ctx.lineWidth = 1.5;
  out.path.forEach((p, i) => {
    if (i % 6 !== 0 && i !== out.path.length - 1) return;
    const v = out.vectors[i];
    const tip = [p[0] + 0.25 * v[0], p[1] + 0.25 * v[1], p[2] + 0.25 * v[2]];
    const a = screen(view(p)), b = screen(view(tip));
    ctx.globalAlpha = view(p)[2] >= 0 ? 1 : 0.35;
    ctx.beginPath(); ctx.moveTo(a[0], a[1]); ctx.lineTo(b[0], b[1]); ctx.stroke();
  });
  ctx.globalAlpha = 1;

  const spread = (xs) => Math.max(...xs) - Math.min(...xs);
  setStatus("t-status", `norm varies by ${spread(out.norms).toExponential(1)}, angle to the velocity by ${spread(out.angles).toExponential(1)} rad`);
}

async function main() {
  await init();
  $("k-run").onclick = () =>
    runConvergence("k", () => karcherConvergence(num("k-n"), num("k-count"), num("k-cond"), num("k-eta2"), num("k-epochs"), num("k-seed")));
  $("e-run").onclick = () =>
    runConvergence("e", () => eigConvergence(num("e-d"), num("e-samples"), num("e-gap"), num("e-option"), num("e-epochs"), num("e-seed")));
  for (const id of ["t-heading", "t-arc", "t-angle"]) $(id).oninput = drawTransport;
  drawTransport();
}

main();
