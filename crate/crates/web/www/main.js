import init, { lawField, Simulation, MaskView } from "./pkg/servotrack_web.js";

const $ = (id) => document.getElementById(id);

function blit(canvas, w, h, rgba) {
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function drawLaws() {
  const sigma = Number($("law-sigma").value);
  $("law-sigma-v").textContent = sigma;
  const c = $("law");
  blit(c, c.width, c.height, lawField(c.width, c.height, sigma));
}

function drawRun(sim) {
  const c = $("sim");
  const ctx = c.getContext("2d");
  const quad = sim.quadXy();
  const target = sim.targetXy();
  const all = Array.from(quad).concat(Array.from(target));
  let lo = Infinity, hi = -Infinity;
  for (const v of all) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const pad = 1, span = hi - lo + 2 * pad;
  // world +y is drawn upward
  const sx = (x) => ((x - lo + pad) / span) * c.width;
  const sy = (y) => c.height - ((y - lo + pad) / span) * c.height;
  ctx.clearRect(0, 0, c.width, c.height);
  const path = (xy, color) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    for (let i = 0; i < xy.length; i += 2) {
      const f = i === 0 ? "moveTo" : "lineTo";
      ctx[f](sx(xy[i]), sy(xy[i + 1]));
    }
    ctx.stroke();
  };
  path(target, "#d33");
  path(quad, "#36c");
  const n = quad.length;
  ctx.fillStyle = "#36c";
  ctx.fillRect(sx(quad[n - 2]) - 3, sy(quad[n - 1]) - 3, 6, 6);
  ctx.fillStyle = "#d33";
  ctx.fillRect(sx(target[n - 2]) - 3, sy(target[n - 1]) - 3, 6, 6);
}

function runSim() {
  const overrides = [
    `pipeline = ${$("sim-pipeline").value}`,
    `path.kind = ${$("sim-path").value}`,
    `duration = ${$("sim-duration").value}`,
    `seed = ${$("sim-seed").value}`,
    $("sim-extra").value,
  ].join("\n");
  $("sim-status").textContent = "running...";
  // let the status paint before the run blocks the page
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const sim = new Simulation("", overrides);
      drawRun(sim);
      $("sim-metrics").textContent = sim.metricsJson();
      $("sim-status").textContent = `${sim.frames()} frames in ${(performance.now() - t0).toFixed(0)} ms`;
      sim.free();
    } catch (e) {
      $("sim-status").textContent = String(e);
    }
  }, 10);
}

function drawMask() {
  try {
    const v = new MaskView(
      Number($("m-target").value),
      Number($("m-hue").value), 0.9, 0.9,
      Number($("m-htol").value),
      Number($("m-stol").value) / 100,
      Number($("m-vtol").value) / 100,
      Number($("m-lat").value) / 100,
      Number($("m-noise").value),
      1,
    );
    blit($("mask"), v.width(), v.height(), v.rgba());
    $("mask-info").textContent = v.valid()
      ? `centroid (${v.centroidX().toFixed(1)}, ${v.centroidY().toFixed(1)})  rms radius ${v.rmsRadius().toFixed(2)}  pixels ${v.pixelCount()}`
      : "no blob";
    v.free();
  } catch (e) {
    $("mask-info").textContent = String(e);
  }
}

await init();
$("law-sigma").addEventListener("input", drawLaws);
$("sim-run").addEventListener("click", runSim);
for (const id of ["m-target", "m-hue", "m-htol", "m-stol", "m-vtol", "m-lat", "m-noise"]) {
  $(id).addEventListener("input", drawMask);
}
drawLaws();
drawMask();
