/** DOM wiring: pair browser, click capture, overlay rendering. */

import { ApiClient } from "./api.js";
import { bboxToDisplay, clickToDisplay, normalizeClick } from "./geometry.js";
import { PayloadShapeError, toRgba, upscaleNearest } from "./overlay.js";
import { sigmaGrid, snapSigma } from "./slider.js";
import { SessionState } from "./state.js";

const state = new SessionState();
const api = new ApiClient(
  (document.querySelector("meta[name=api-base]") as HTMLMetaElement)?.content ??
    "http://127.0.0.1:8008",
);

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const queryImg = $<HTMLImageElement>("query-img");
const satImg = $<HTMLImageElement>("sat-img");
const queryCanvas = $<HTMLCanvasElement>("query-overlay");
const satCanvas = $<HTMLCanvasElement>("sat-overlay");
const toast = $<HTMLDivElement>("toast");

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 4000);
}

function syncCanvas(canvas: HTMLCanvasElement, img: HTMLImageElement): void {
  canvas.width = img.clientWidth;
  canvas.height = img.clientHeight;
}

function renderQueryOverlay(): void {
  syncCanvas(queryCanvas, queryImg);
  const ctx = queryCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, queryCanvas.width, queryCanvas.height);
  if (state.click) {
    const p = clickToDisplay(state.click, queryCanvas.width, queryCanvas.height);
    ctx.strokeStyle = "#ffd400";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(p.x - 10, p.y);
    ctx.lineTo(p.x + 10, p.y);
    ctx.moveTo(p.x, p.y - 10);
    ctx.lineTo(p.x, p.y + 10);
    ctx.stroke();
  }
}

function renderSatOverlay(): void {
  syncCanvas(satCanvas, satImg);
  const ctx = satCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, satCanvas.width, satCanvas.height);
  if (!state.canRenderOverlays) return;
  const resp = state.response!;
  try {
    if (state.overlays.attention && resp.a_s) {
      const values = upscaleNearest(resp.a_s, satCanvas.width, satCanvas.height);
      const img = new ImageData(
        toRgba(values),
        satCanvas.width,
        satCanvas.height,
      );
      ctx.putImageData(img, 0, 0);
    }
  } catch (err) {
    if (err instanceof PayloadShapeError) {
      showToast(err.message);
      ctx.clearRect(0, 0, satCanvas.width, satCanvas.height);
      return;
    }
    throw err;
  }
  if (state.overlays.bbox) {
    const rect = bboxToDisplay(resp.bbox, satCanvas.width, satCanvas.height);
    ctx.strokeStyle = "#21d421";
    ctx.lineWidth = 3;
    ctx.strokeRect(rect.x, rect.y, rect.width, rect.height);
  }
  $<HTMLSpanElement>("score").textContent =
    `score ${resp.score.toFixed(3)} · ${resp.latency_ms.toFixed(0)} ms`;
}

async function firePredict(): Promise<void> {
  const req = state.buildRequest();
  if (!req) return;
  try {
    const resp = await api.predict(req);
    if (resp === null) return; // superseded by a newer click
    state.response = resp;
    renderSatOverlay();
  } catch (err) {
    showToast(String(err));
  }
}

queryImg.addEventListener("click", (ev: MouseEvent) => {
  const rect = queryImg.getBoundingClientRect();
  const click = normalizeClick(
    ev.clientX - rect.left,
    ev.clientY - rect.top,
    rect.width,
    rect.height,
  );
  if (click === null) return;
  state.click = click;
  renderQueryOverlay();
  void firePredict();
});

const slider = $<HTMLInputElement>("sigma");
const sigmaLabel = $<HTMLSpanElement>("sigma-label");
slider.min = "0";
slider.max = String(sigmaGrid().length - 1);
slider.step = "1";
slider.addEventListener("input", () => {
  const sigma = snapSigma(sigmaGrid()[Number(slider.value)]);
  state.sigma = sigma;
  sigmaLabel.textContent = sigma.toFixed(3);
});
slider.addEventListener("change", () => void firePredict());

for (const name of ["bbox", "attention"] as const) {
  $<HTMLInputElement>(`toggle-${name}`).addEventListener("change", (ev) => {
    state.overlays[name] = (ev.target as HTMLInputElement).checked;
    renderSatOverlay();
  });
}

async function loadSamples(): Promise<void> {
  const list = $<HTMLSelectElement>("samples");
  try {
    const samples = await api.samples();
    for (const s of samples) {
      const opt = document.createElement("option");
      opt.value = s.sample_id;
      opt.textContent = `${s.sample_id} (${s.query_kind}, ${s.class_label})`;
      list.appendChild(opt);
    }
    list.addEventListener("change", () => {
      state.selectSample(list.value);
      queryImg.src = api.imageUrl(list.value, "query");
      satImg.src = api.imageUrl(list.value, "satellite");
      renderQueryOverlay();
      renderSatOverlay();
    });
    if (samples.length > 0) {
      list.value = samples[0].sample_id;
      list.dispatchEvent(new Event("change"));
    }
  } catch (err) {
    showToast(`cannot reach service: ${err}`);
  }
}

async function fileToBase64(file: File): Promise<string> {
  const buf = await file.arrayBuffer();
  let binary = "";
  for (const byte of new Uint8Array(buf)) binary += String.fromCharCode(byte);
  return btoa(binary);
}

$<HTMLInputElement>("upload-query").addEventListener("change", () => void handleUpload());
$<HTMLInputElement>("upload-sat").addEventListener("change", () => void handleUpload());

async function handleUpload(): Promise<void> {
  const q = $<HTMLInputElement>("upload-query").files?.[0];
  const s = $<HTMLInputElement>("upload-sat").files?.[0];
  if (!q || !s) return;
  state.setUpload({
    queryBase64: await fileToBase64(q),
    satelliteBase64: await fileToBase64(s),
    queryKind: $<HTMLSelectElement>("query-kind").value,
  });
  queryImg.src = URL.createObjectURL(q);
  satImg.src = URL.createObjectURL(s);
  renderQueryOverlay();
  renderSatOverlay();
}

void loadSamples();
