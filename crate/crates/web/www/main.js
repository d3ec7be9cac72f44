import init, { recover, certify, super_resolve } from "./pkg/liftdeconv_web.js";

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const all = series.flatMap((s) => s.values);
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi === lo) { hi += 1; lo -= 1; }
  const pad = 10;
  const y = (v) => height - pad - ((v - lo) / (hi - lo)) * (height - 2 * pad);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, y(0));
  ctx.lineTo(width, y(0));
  ctx.stroke();
  for (const s of series) {
    const x = (i) => pad + (i / Math.max(s.values.length - 1, 1)) * (width - 2 * pad);
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
  }
}

const num = (section, name) => Number(section.querySelector(`[name=${name}]`).value);
const fmt = (v) => (typeof v === "number" ? v.toExponential(3) : v);

function show(pre, obj) {
  pre.textContent = JSON.stringify(obj, (_, v) => (typeof v === "number" && !Number.isInteger(v) ? fmt(v) : v), 2);
}

// Let the button state paint before the synchronous solve blocks the tab.
function wire(id, run) {
  const section = document.getElementById(id);
  const button = section.querySelector("button");
  const pre = section.querySelector("pre");
  button.addEventListener("click", () => {
    button.disabled = true;
    pre.textContent = "running...";
    setTimeout(() => {
      const start = performance.now();
      try {
        run(section, pre);
        pre.textContent += `\n(${((performance.now() - start) / 1000).toFixed(2)} s)`;
      } catch (e) {
        pre.textContent = `error: ${e.message ?? e}`;
      } finally {
        button.disabled = false;
      }
    }, 20);
  });
}

await init();

wire("recover", (s, pre) => {
  const out = JSON.parse(recover(num(s, "k"), num(s, "l"), num(s, "n"), num(s, "seed"), num(s, "outer")));
  plot(s.querySelector("canvas"), [
    { values: out.h_true, color: "#1f77b4", width: 3 },
    { values: out.h_est, color: "#d62728" },
  ]);
  show(pre, out.result);
});

wire("certify", (s, pre) => {
  show(pre, JSON.parse(certify(num(s, "k"), num(s, "l"), num(s, "n"), num(s, "seed"))));
});

wire("superres", (s, pre) => {
  const wavelet = s.querySelector("[name=wavelet]").value;
  const out = JSON.parse(
    super_resolve(num(s, "n"), num(s, "k"), num(s, "width"), num(s, "cutoff"), wavelet, num(s, "seed")),
  );
  plot(s.querySelector("canvas"), [
    { values: out.lowpass, color: "#999" },
    { values: out.truth, color: "#1f77b4", width: 3 },
    { values: out.recovered, color: "#d62728" },
  ]);
  show(pre, {
    signal_errors: out.signal_errors,
    lowpass_errors: out.baseline_errors,
    filter_error: out.filter_error,
  });
});
