import init, { green_field, born_reconstruction, cutoff_curves } from "../pkg/dtnlab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(f, ...args) {
  try {
    return JSON.parse(f(...args));
  } catch (e) {
    return { error: String(e) };
  }
}

// diverging map for signed data, grey ramp for magnitudes
function heatmap(canvas, values, size, signed) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(size, size);
  const peak = values.reduce((m, v) => Math.max(m, Math.abs(v)), 0) || 1;
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      // row 0 of the data is the bottom of the picture
      const v = values[(size - 1 - i) * size + j] / peak;
      const o = 4 * (i * size + j);
      if (signed) {
        img.data[o] = 255 * Math.min(1, 1 + v);
        img.data[o + 1] = 255 * (1 - Math.abs(v));
        img.data[o + 2] = 255 * Math.min(1, 1 - v);
      } else {
        const g = 255 * (1 - Math.abs(v));
        img.data[o] = img.data[o + 1] = img.data[o + 2] = g;
      }
      img.data[o + 3] = 255;
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = tmp.height = size;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

// log-log or lin-log line plot of several series
function plot(canvas, series, { logx = false, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 30;
  ctx.clearRect(0, 0, W, H);
  const tx = (x) => (logx ? Math.log10(x) : x);
  const ty = (y) => (logy ? Math.log10(y) : y);
  const pts = series.flatMap((s) => s.points).filter(([x, y]) => isFinite(tx(x)) && isFinite(ty(y)));
  const xs = pts.map((p) => tx(p[0])), ys = pts.map((p) => ty(p[1]));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((tx(x) - x0) / (x1 - x0 || 1)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((ty(y) - y0) / (y1 - y0 || 1)) * (H - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(`${logx ? "log " : ""}x ∈ [${x0.toPrecision(3)}, ${x1.toPrecision(3)}]`, pad, H - 8);
  ctx.fillText(`${logy ? "log " : ""}y ∈ [${y0.toPrecision(3)}, ${y1.toPrecision(3)}]`, pad, 16);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let started = false;
    for (const [x, y] of s.points) {
      if (!isFinite(tx(x)) || !isFinite(ty(y))) continue;
      started ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y));
      started = true;
    }
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, W - pad - 80, pad + 14 * (k + 1));
  });
}

function runGreen() {
  const r = call(green_field, num("g-n"), num("g-p1"), num("g-p2"));
  if (r.error) return ($("g-stats").textContent = r.error);
  const size = 2 * r.n + 1;
  heatmap($("g-re"), r.re, size, true);
  heatmap($("g-abs"), r.abs, size, false);
  $("g-stats").textContent =
    `k = (${r.k_re.map((v) => v.toFixed(3))}) + i(${r.k_im.map((v) => v.toFixed(3))})\n` +
    `left: Re g, right: |g|\nΔ_h G − δ residual: ${r.residual.toExponential(2)}`;
}

function runBorn() {
  $("b-stats").textContent = "computing…";
  setTimeout(() => {
    const r = call(born_reconstruction, num("b-n"), 2.5, num("b-a"), num("b-w"), num("b-rho"));
    if (r.error) return ($("b-stats").textContent = r.error);
    heatmap($("b-truth"), r.truth, r.n, true);
    heatmap($("b-rec"), r.reconstruction, r.n, true);
    $("b-stats").textContent =
      `left: v, right: reconstruction\nδ = ${r.delta.toExponential(3)}\nρ = ${r.rho}\n` +
      `sup error ${r.sup_error.toExponential(3)} (${(100 * r.relative_error).toFixed(1)}%)\n` +
      `imaginary residue ${r.imag_residue.toExponential(2)}`;
  }, 0);
}

function runCutoff() {
  const r = call(cutoff_curves, num("c-alpha"), num("c-q"), num("c-w"), num("c-pmax"));
  if (r.error) return ($("c-stats").textContent = r.error);
  plot($("c-rule"), [{ label: "ρ(δ)", color: "#1f77b4", points: r.rule.map(([d, rho]) => [1 / d, rho]) }], { logx: true });
  plot(
    $("c-split"),
    [
      { label: "I₁(ρ)", color: "#2ca02c", points: r.split.map(([rho, i1]) => [rho, i1]) },
      { label: "I₂(ρ)", color: "#d62728", points: r.split.map(([rho, , i2]) => [rho, i2]) },
    ],
    { logx: true, logy: true },
  );
  $("c-stats").textContent = `λ = ${r.lambda.toFixed(4)}\nL₁ = ${r.l1.toFixed(4)}\nleft: ρ against 1/δ\nright: ball and tail of ∫|v̂|`;
}

await init();
$("g-run").onclick = runGreen;
$("b-run").onclick = runBorn;
$("c-run").onclick = runCutoff;
runGreen();
runCutoff();
