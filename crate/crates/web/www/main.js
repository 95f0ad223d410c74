import init, { rangeView, associationView, segmentView } from "./pkg/rangemos_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const W = 1024, H = 64;

function paint(canvas, rgba, w, h) {
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function guarded(fn) {
  return () => {
    try {
      $("error").textContent = "";
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

const drawProjection = guarded(() => {
  const w = num("p-w"), h = num("p-h");
  paint($("p-canvas"), rangeView(w, h, num("p-up"), num("p-down")), w, h);
});

const drawAssociation = guarded(() => {
  const dx = num("a-dx"), dy = num("a-dy"), yaw = num("a-yaw");
  $("a-out").textContent = `dx=${dx.toFixed(1)} dy=${dy.toFixed(1)} yaw=${yaw.toFixed(1)}`;
  paint($("a-canvas"), associationView(W, H, dx, dy, yaw), W, H);
});

const runSegmentation = guarded(() => {
  const res = segmentView(W, H, num("s-speed"), num("s-noise"), $("s-knn").checked, BigInt(num("s-seed")));
  const iou = Number.isNaN(res.iou) ? "undefined" : res.iou.toFixed(4);
  $("s-out").textContent = `moving IoU ${iou}, ${res.movingPoints} points marked moving`;
  paint($("s-canvas"), res.rgba, W, H);
  res.free();
});

await init();
for (const id of ["p-w", "p-h", "p-up", "p-down"]) $(id).addEventListener("change", drawProjection);
for (const id of ["a-dx", "a-dy", "a-yaw"]) $(id).addEventListener("input", drawAssociation);
$("s-run").addEventListener("click", runSegmentation);
drawProjection();
drawAssociation();
runSegmentation();
