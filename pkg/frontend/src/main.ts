/**
 * Browser entry point: file loading, side-menu controls, URL-hash view state.
 */
import {
  Bundle,
  CAUSE_COLORS,
  PairEntry,
  PolyData,
  SchemaError,
  ViewerState,
  loadBundle,
} from "./model.js";
import { Renderer } from "./render.js";

const state = new ViewerState();
let renderer: Renderer | null = null;
const staged: Record<string, any> = {};

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function banner(message: string | null): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function syncHash(): void {
  history.replaceState(null, "", "#" + state.hashState());
}

function redraw(): void {
  if (!renderer || !state.bundle) return;
  const overrides = new Map<string, PolyData[]>();
  if (state.selectedPair) {
    // only the selected pair's region is rendered in place of uncovered layers
    for (const layer of state.layers) {
      if (layer.id.startsWith("uncovered:")) overrides.set(layer.id, []);
    }
  }
  renderer.syncLayers(state.layers, overrides);
  if (state.selectedPair) {
    const [s1, s2, q] = state.selectedPair.split("|");
    const entry = state.availablePairs().find(
      (p) => p.s1 === s1 && p.s2 === s2 && p.q === q,
    );
    if (entry) {
      for (const cause of Object.keys(CAUSE_COLORS)) {
        renderer.setMesh(
          `pair-cause:${cause}`,
          entry.causes[cause] ?? [],
          CAUSE_COLORS[cause],
        );
      }
    }
  } else {
    for (const cause of Object.keys(CAUSE_COLORS)) renderer.removeMesh(`pair-cause:${cause}`);
  }
  renderer.draw();
  el<HTMLSpanElement>("legend").style.display = state.selectedPair ? "inline" : "none";
}

function rebuildMenu(): void {
  const menu = el<HTMLDivElement>("layers");
  menu.innerHTML = "";
  for (const layer of state.layers) {
    const btn = document.createElement("button");
    btn.textContent = `${layer.visible ? "☑" : "☐"} ${layer.label}`;
    btn.onclick = () => {
      state.toggleLayer(layer.id);
      rebuildMenu();
      syncHash();
      redraw();
    };
    menu.appendChild(btn);
  }
  const pairSel = el<HTMLSelectElement>("pair-select");
  pairSel.innerHTML = "<option value=''>— whole deployment —</option>";
  for (const p of state.availablePairs()) {
    const opt = document.createElement("option");
    opt.value = `${p.s1}|${p.s2}|${p.q}`;
    opt.textContent = `pair ${p.s1} + ${p.s2} (${p.q})`;
    pairSel.appendChild(opt);
  }
  pairSel.disabled = state.availablePairs().length === 0;
  const faultsBox = el<HTMLDivElement>("faults");
  faultsBox.innerHTML = "";
  const bundle = state.bundle;
  if (bundle && bundle.deployment) {
    for (const sid of Object.keys(bundle.deployment.positions).sort()) {
      const label = document.createElement("label");
      const cb = document.createElement("input");
      cb.type = "checkbox";
      cb.checked = state.faultSet.includes(sid);
      cb.onchange = () => {
        const next = cb.checked
          ? [...state.faultSet, sid]
          : state.faultSet.filter((s) => s !== sid);
        if (!state.setFaultSet(next)) {
          cb.checked = false;
          cb.title = `at most ${bundle.scenario.k} simultaneous faults`;
          return;
        }
        syncHash();
        updateWhatIf();
      };
      label.appendChild(cb);
      label.append(` ${sid}`);
      faultsBox.appendChild(label);
    }
  }
}

function updateWhatIf(): void {
  const note = el<HTMLSpanElement>("whatif-note");
  if (!state.faultSet.length) {
    note.textContent = "";
    redraw();
    return;
  }
  note.textContent =
    `what-if faults {${state.faultSet.join(", ")}}: display-resolution approximation`;
  redraw();
}

function tryLoad(): void {
  try {
    const bundle: Bundle = loadBundle(staged);
    state.load(bundle);
    banner(null);
    if (!renderer) renderer = new Renderer(el<HTMLCanvasElement>("scene"));
    renderer.frameOn(bundle.scenario.roi);
    if (location.hash.length > 1) state.applyHashState(location.hash);
    rebuildMenu();
    redraw();
  } catch (err) {
    if (err instanceof SchemaError) {
      banner(`schema error at ${err.path}: ${err.message}`);
    } else {
      banner(String(err));
    }
  }
}

export function wireUp(): void {
  el<HTMLInputElement>("files").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    for (const file of Array.from(input.files ?? [])) {
      try {
        staged[file.name] = JSON.parse(await file.text());
      } catch {
        banner(`${file.name}: not valid JSON`);
        return;
      }
    }
    tryLoad();
  });
  el<HTMLSelectElement>("pair-select").addEventListener("change", (ev) => {
    const value = (ev.target as HTMLSelectElement).value;
    if (!value) state.deselectPair();
    else {
      const [s1, s2, q] = value.split("|");
      state.selectPair(s1, s2, q);
    }
    syncHash();
    redraw();
  });
  const canvas = el<HTMLCanvasElement>("scene");
  let dragging = false;
  let last = [0, 0];
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    last = [e.clientX, e.clientY];
  });
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (e) => {
    if (!dragging || !renderer) return;
    renderer.yaw -= (e.clientX - last[0]) * 0.008;
    renderer.pitch = Math.max(
      -1.4,
      Math.min(1.4, renderer.pitch + (e.clientY - last[1]) * 0.008),
    );
    last = [e.clientX, e.clientY];
    renderer.draw();
  });
  canvas.addEventListener("wheel", (e) => {
    if (!renderer) return;
    renderer.zoom = Math.max(0.3, Math.min(12, renderer.zoom * (e.deltaY > 0 ? 1.1 : 0.9)));
    renderer.draw();
    e.preventDefault();
  });
}

if (typeof document !== "undefined" && document.getElementById("scene")) {
  wireUp();
}
