// Drives the demo page. All numerics live in the WebAssembly module;
// this file only wires sliders to redraws.

import init, { sphere_image, lobe_image, preset, round_trip }
  from "./pkg/shlight_demo.js";

const SIZE = 256;

// Coefficients of max(cos θ, 0): the kernel every light is convolved
// with. Nonzero only in the three zonal slots.
const COSINE_LOBE = [
  Math.sqrt(Math.PI) / 2, 0, Math.sqrt(Math.PI / 3), 0,
  0, 0, Math.sqrt(5 * Math.PI) / 8, 0, 0,
];

const el = (id) => document.getElementById(id);

function draw(canvas, rgba) {
  if (!rgba) return;
  const image = new ImageData(new Uint8ClampedArray(rgba), SIZE, SIZE);
  canvas.getContext("2d").putImageData(image, 0, 0);
}

let light = null; // 27 numbers: R, G, B coefficient vectors

function redrawSphere() {
  const rgba = sphere_image(
    SIZE, light,
    parseFloat(el("alpha").value),
    parseFloat(el("beta").value),
    parseFloat(el("gamma").value),
    el("ground").checked,
  );
  draw(el("sphere"), rgba);
}

function redrawLobe() {
  const choice = el("basis").value;
  let coeffs;
  if (choice === "lobe") {
    coeffs = COSINE_LOBE;
  } else {
    coeffs = new Array(9).fill(0);
    coeffs[parseInt(choice, 10)] = 1;
  }
  const rgba = lobe_image(
    SIZE, coeffs,
    parseFloat(el("lobe-alpha").value),
    parseFloat(el("lobe-beta").value),
    0,
  );
  draw(el("lobe"), rgba);
}

function runRoundTrip() {
  const result = round_trip(light);
  if (!result) return;
  const recovered = result.slice(0, 27);
  const residuals = result.slice(54, 57);
  const maxError = result[57];

  el("trip-summary").innerHTML =
    `largest coefficient error <b>${maxError.toExponential(2)}</b>, ` +
    `solver residuals ${[...residuals].map((r) => r.toExponential(1)).join(", ")}`;

  const body = el("trip-table").querySelector("tbody");
  body.replaceChildren();
  for (let slot = 0; slot < 9; slot++) {
    const row = document.createElement("tr");
    const cells = [String(slot)];
    for (let c = 0; c < 3; c++) {
      cells.push(light[c * 9 + slot].toFixed(3), recovered[c * 9 + slot].toFixed(3));
    }
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      row.appendChild(td);
    }
    body.appendChild(row);
  }
  el("trip-table").hidden = false;
}

function selectPreset() {
  light = preset(el("preset").value);
  redrawSphere();
}

async function main() {
  await init();
  el("panels").hidden = false;

  el("preset").addEventListener("change", selectPreset);
  for (const id of ["alpha", "beta", "gamma"]) {
    el(id).addEventListener("input", redrawSphere);
  }
  el("ground").addEventListener("change", redrawSphere);
  for (const id of ["basis", "lobe-alpha", "lobe-beta"]) {
    el(id).addEventListener("input", redrawLobe);
  }
  el("run-trip").addEventListener("click", runRoundTrip);

  selectPreset();
  redrawLobe();
}

main().catch((err) => {
  console.error(err);
  el("load-error").hidden = false;
});
