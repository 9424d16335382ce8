/** DOM wiring: joint sliders + orbit viewport on top of UiSession. */

import { SLIDER_LIMIT, UiSession } from "./session";
import type { Vec3 } from "./api";
import "./style.css";

const AXES = ["x", "y", "z"] as const;

function serviceBaseUrl(): string {
  const param = new URLSearchParams(window.location.search).get("service");
  if (param) return param.replace(/\/$/, "");
  // Served from the service's /ui route: the API lives at the origin root.
  return window.location.origin;
}

function build(): void {
  const app = document.getElementById("app")!;
  app.innerHTML = `
    <header>
      <h1>skinsplat pose editor</h1>
      <span id="latency" class="latency">render: – ms</span>
    </header>
    <div id="banner" class="banner hidden"></div>
    <main>
      <div id="viewport" class="viewport">
        <img id="frame" alt="rendered frame" draggable="false" />
        <p class="hint">drag to orbit · wheel to zoom</p>
      </div>
      <div id="joints" class="joints"></div>
    </main>
  `;

  const frameImg = document.getElementById("frame") as HTMLImageElement;
  const latencyEl = document.getElementById("latency")!;
  const bannerEl = document.getElementById("banner")!;
  const jointsEl = document.getElementById("joints")!;

  let objectUrl: string | null = null;
  const session = new UiSession(serviceBaseUrl(), {
    onFrame: (blob, millis) => {
      if (objectUrl) URL.revokeObjectURL(objectUrl);
      objectUrl = URL.createObjectURL(blob);
      frameImg.src = objectUrl;
      latencyEl.textContent = `render: ${millis.toFixed(1)} ms`;
    },
    onError: (message) => {
      bannerEl.classList.toggle("hidden", message === null);
      if (message !== null) bannerEl.textContent = `service error: ${message}`;
    },
    onPose: (sliders) => syncSliderInputs(sliders),
  });

  const inputs = new Map<string, HTMLInputElement[]>();

  function syncSliderInputs(sliders: ReadonlyMap<string, Vec3>): void {
    if (inputs.size === 0 && session.meta) {
      for (const joint of session.meta.joints) {
        const row = document.createElement("div");
        row.className = "joint";
        const label = document.createElement("span");
        label.className = "joint-name";
        label.textContent = joint;
        row.appendChild(label);
        const triple: HTMLInputElement[] = [];
        AXES.forEach((axis, component) => {
          const input = document.createElement("input");
          input.type = "range";
          input.min = String(-SLIDER_LIMIT);
          input.max = String(SLIDER_LIMIT);
          input.step = "0.01";
          input.title = `${joint} ${axis}`;
          input.addEventListener("input", () => {
            session.onSliderChange(joint, component as 0 | 1 | 2, parseFloat(input.value));
          });
          row.appendChild(input);
          triple.push(input);
        });
        inputs.set(joint, triple);
        jointsEl.appendChild(row);
      }
    }
    for (const [joint, triple] of inputs) {
      const value = sliders.get(joint);
      if (!value) continue;
      triple.forEach((input, i) => {
        if (document.activeElement !== input) input.value = String(value[i]);
      });
    }
  }

  // Orbit controls: drag to rotate, wheel to zoom.
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  frameImg.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    frameImg.setPointerCapture(ev.pointerId);
  });
  frameImg.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const dx = ev.clientX - lastX;
    const dy = ev.clientY - lastY;
    lastX = ev.clientX;
    lastY = ev.clientY;
    session.onOrbit({ azimuth: -dx * 0.01, elevation: dy * 0.01 });
  });
  frameImg.addEventListener("pointerup", () => {
    dragging = false;
  });
  frameImg.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    session.onOrbit({ radiusFactor: ev.deltaY > 0 ? 1.1 : 1 / 1.1 });
  });

  void session.load();
}

build();
