/**
 * Data model for coverage bundles: parsing with schema validation, layer
 * visibility state, pair selection, and fault what-if evaluation.
 *
 * Every vertex rendered comes straight from the bundle; the only geometry
 * work done client side is triangulation bookkeeping of the hull faces the
 * exporter already provides.  What-if views beyond the exported layers are
 * display-resolution approximations evaluated per probe point.
 */

export const SCHEMA = "covertool/1";

export interface PolyData {
  halfspaces: number[][]; // rows [nx, ny, nz, b] meaning n . x <= b
  vertices: number[][];
  faces: number[][];
}

export interface QualityData {
  id: string;
  theta_min_deg: number;
  theta_max_deg: number;
}

export interface ScenarioData {
  name: string;
  roi: PolyData[];
  obstacles: PolyData[];
  priorities: Record<string, PolyData[]>;
  admissible: Record<string, PolyData[]>;
  qualities: QualityData[];
  k: number;
}

export interface DeploymentData {
  positions: Record<string, number[]>;
}

export interface RegionEntry {
  j: number;
  q: string;
  under: PolyData[];
  over: PolyData[];
}

export interface PairEntry {
  s1: string;
  s2: string;
  q: string;
  u_pair: PolyData[];
  causes: Record<string, PolyData[]>;
}

export interface WorstCaseData {
  faulty_sensor: string;
  weighted_cost: number;
  q: string;
  region: PolyData[];
}

export interface Bundle {
  scenario: ScenarioData;
  deployment: DeploymentData | null;
  regions: RegionEntry[];
  pairs: PairEntry[];
  worstCase: WorstCaseData | null;
}

export class SchemaError extends Error {
  constructor(public path: string, message: string) {
    super(`${path}: ${message}`);
  }
}

function need(obj: any, key: string, path: string): any {
  if (obj === null || typeof obj !== "object" || !(key in obj)) {
    throw new SchemaError(`${path}.${key}`, "missing required key");
  }
  return obj[key];
}

function checkSchema(obj: any, path: string): void {
  const s = need(obj, "schema", path);
  if (s !== SCHEMA) {
    throw new SchemaError(`${path}.schema`, `expected ${SCHEMA}, got ${String(s)}`);
  }
}

function parsePoly(obj: any, path: string): PolyData {
  const halfspaces = need(obj, "halfspaces", path);
  const vertices = need(obj, "vertices", path);
  const faces = need(obj, "faces", path);
  if (!Array.isArray(vertices) || vertices.length < 4) {
    throw new SchemaError(`${path}.vertices`, "need at least 4 vertices");
  }
  for (const tri of faces) {
    for (const idx of tri) {
      if (idx < 0 || idx >= vertices.length) {
        throw new SchemaError(`${path}.faces`, `vertex index ${idx} out of range`);
      }
    }
  }
  return { halfspaces, vertices, faces };
}

function parseUnion(arr: any, path: string): PolyData[] {
  if (!Array.isArray(arr)) {
    throw new SchemaError(path, "expected an array of polyhedra");
  }
  return arr.map((p, i) => parsePoly(p, `${path}[${i}]`));
}

export function parseScenario(data: any): ScenarioData {
  checkSchema(data, "scenario");
  const priorities: Record<string, PolyData[]> = {};
  const rawPr = need(data, "priorities", "scenario");
  for (const h of Object.keys(rawPr)) {
    priorities[h] = parseUnion(rawPr[h], `scenario.priorities.${h}`);
  }
  const admissible: Record<string, PolyData[]> = {};
  const rawAdm = data.admissible ?? {};
  for (const sid of Object.keys(rawAdm)) {
    admissible[sid] = parseUnion(rawAdm[sid], `scenario.admissible.${sid}`);
  }
  return {
    name: String(data.name ?? ""),
    roi: parseUnion(need(data, "roi", "scenario"), "scenario.roi"),
    obstacles: parseUnion(data.obstacles ?? [], "scenario.obstacles"),
    priorities,
    admissible,
    qualities: need(data, "qualities", "scenario"),
    k: Number(need(data, "k", "scenario")),
  };
}

export function parseDeployment(data: any): DeploymentData {
  checkSchema(data, "deployment");
  const positions = need(data, "positions", "deployment");
  for (const sid of Object.keys(positions)) {
    const p = positions[sid];
    if (!Array.isArray(p) || p.length !== 3) {
      throw new SchemaError(`deployment.positions.${sid}`, "expected [x, y, z]");
    }
  }
  return { positions };
}

export function parseRegions(data: any): RegionEntry[] {
  checkSchema(data, "uncovered");
  const regions = need(data, "regions", "uncovered");
  return regions.map((r: any, i: number) => ({
    j: Number(need(r, "j", `uncovered.regions[${i}]`)),
    q: String(need(r, "q", `uncovered.regions[${i}]`)),
    under: parseUnion(r.under ?? [], `uncovered.regions[${i}].under`),
    over: parseUnion(r.over ?? [], `uncovered.regions[${i}].over`),
  }));
}

export function parsePairs(data: any): PairEntry[] {
  checkSchema(data, "pairs");
  const pairs = need(data, "pairs", "pairs");
  return pairs.map((p: any, i: number) => {
    const causes: Record<string, PolyData[]> = {};
    for (const cause of Object.keys(p.causes ?? {})) {
      causes[cause] = parseUnion(p.causes[cause], `pairs[${i}].causes.${cause}`);
    }
    return {
      s1: String(need(p, "s1", `pairs[${i}]`)),
      s2: String(need(p, "s2", `pairs[${i}]`)),
      q: String(need(p, "q", `pairs[${i}]`)),
      u_pair: parseUnion(need(p, "u_pair", `pairs[${i}]`), `pairs[${i}].u_pair`),
      causes,
    };
  });
}

export function parseWorstCase(data: any): WorstCaseData {
  checkSchema(data, "worst-case");
  return {
    faulty_sensor: String(need(data, "faulty_sensor", "worst-case")),
    weighted_cost: Number(need(data, "weighted_cost", "worst-case")),
    q: String(need(data, "q", "worst-case")),
    region: parseUnion(need(data, "region", "worst-case"), "worst-case.region"),
  };
}

export function loadBundle(files: Record<string, any>): Bundle {
  if (!("scenario.json" in files)) {
    throw new SchemaError("bundle", "scenario.json is required");
  }
  const scenario = parseScenario(files["scenario.json"]);
  const deployment = "deployment.json" in files ? parseDeployment(files["deployment.json"]) : null;
  const regions = "uncovered.json" in files ? parseRegions(files["uncovered.json"]) : [];
  const pairs = "pairs.json" in files ? parsePairs(files["pairs.json"]) : [];
  const worstCase = "worst_case.json" in files ? parseWorstCase(files["worst_case.json"]) : null;
  // every referenced sensor id must exist in the deployment when present
  if (deployment) {
    for (const pr of pairs) {
      for (const sid of [pr.s1, pr.s2]) {
        if (!(sid in deployment.positions)) {
          throw new SchemaError("pairs", `unknown sensor id ${sid}`);
        }
      }
    }
  }
  return { scenario, deployment, regions, pairs, worstCase };
}

// -- geometry helpers on bundle data (no synthesis, just lookups) --------------

export function bboxOf(polys: PolyData[]): { lo: number[]; hi: number[] } | null {
  if (!polys.length) return null;
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (const p of polys) {
    for (const v of p.vertices) {
      for (let i = 0; i < 3; i++) {
        lo[i] = Math.min(lo[i], v[i]);
        hi[i] = Math.max(hi[i], v[i]);
      }
    }
  }
  return { lo, hi };
}

export function pointInPoly(p: PolyData, x: number[], tol = 1e-7): boolean {
  for (const [nx, ny, nz, b] of p.halfspaces) {
    if (nx * x[0] + ny * x[1] + nz * x[2] > b + tol) return false;
  }
  return true;
}

export function pointInUnion(polys: PolyData[], x: number[], tol = 1e-7): boolean {
  return polys.some((p) => pointInPoly(p, x, tol));
}

// -- view state ------------------------------------------------------------------

export interface LayerSpec {
  id: string;
  label: string;
  polys: PolyData[];
  color: [number, number, number, number];
  visible: boolean;
}

export const CAUSE_COLORS: Record<string, [number, number, number, number]> = {
  range: [0.95, 0.55, 0.1, 0.55], // out of sensing range
  obstacle: [0.55, 0.2, 0.75, 0.55], // line of sight blocked
  angle: [0.1, 0.55, 0.95, 0.55], // triangulation angle out of band
};

export class ViewerState {
  layers: LayerSpec[] = [];
  selectedPair: string | null = null; // "s1|s2|q"
  faultSet: string[] = [];
  bundle: Bundle | null = null;

  load(bundle: Bundle): void {
    this.bundle = bundle;
    this.selectedPair = null;
    this.faultSet = [];
    this.layers = [];
    this.layers.push({
      id: "roi",
      label: "Region of interest",
      polys: bundle.scenario.roi,
      color: [0.2, 0.8, 0.3, 0.18],
      visible: true,
    });
    this.layers.push({
      id: "obstacles",
      label: "Obstacles",
      polys: bundle.scenario.obstacles,
      color: [0.25, 0.25, 0.28, 0.95],
      visible: true,
    });
    for (const h of Object.keys(bundle.scenario.priorities).sort()) {
      this.layers.push({
        id: `priority:${h}`,
        label: `Region with priority ${h}`,
        polys: bundle.scenario.priorities[h],
        color: h === "high" ? [0.95, 0.8, 0.1, 0.35] : [0.5, 0.7, 0.9, 0.25],
        visible: false,
      });
    }
    const admIds = Object.keys(bundle.scenario.admissible).sort();
    const seen = new Set<string>();
    for (const sid of admIds) {
      const key = JSON.stringify(bundle.scenario.admissible[sid].map((p) => p.vertices));
      if (seen.has(key)) continue; // identical admissible regions collapse to one layer
      seen.add(key);
      this.layers.push({
        id: `admissible:${sid}`,
        label: `Admissible placement region (${sid})`,
        polys: bundle.scenario.admissible[sid],
        color: [0.3, 0.9, 0.9, 0.25],
        visible: false,
      });
    }
    for (const r of bundle.regions) {
      for (const side of ["under", "over"] as const) {
        this.layers.push({
          id: `uncovered:${r.j}:${r.q}:${side}`,
          label: `Uncovered (${side}) j=${r.j} ${r.q}`,
          polys: r[side],
          color: side === "under" ? [0.9, 0.15, 0.1, 0.5] : [0.9, 0.45, 0.35, 0.3],
          visible: r.j === 0 && side === "under",
        });
      }
    }
    if (bundle.worstCase) {
      this.layers.push({
        id: "worst-case",
        label: `Worst single fault (${bundle.worstCase.faulty_sensor})`,
        polys: bundle.worstCase.region,
        color: [1.0, 0.1, 0.5, 0.45],
        visible: false,
      });
    }
  }

  layer(id: string): LayerSpec | undefined {
    return this.layers.find((l) => l.id === id);
  }

  toggleLayer(id: string): boolean | null {
    const layer = this.layer(id);
    if (!layer) return null; // unknown layers are ignored
    layer.visible = !layer.visible;
    return layer.visible;
  }

  pairKey(s1: string, s2: string, q: string): string {
    return `${s1}|${s2}|${q}`;
  }

  availablePairs(): PairEntry[] {
    return this.bundle ? this.bundle.pairs : [];
  }

  selectPair(s1: string, s2: string, q: string): PairEntry | null {
    const entry = this.availablePairs().find(
      (p) => ((p.s1 === s1 && p.s2 === s2) || (p.s1 === s2 && p.s2 === s1)) && p.q === q,
    );
    if (!entry) return null;
    this.selectedPair = this.pairKey(entry.s1, entry.s2, entry.q);
    return entry;
  }

  deselectPair(): void {
    this.selectedPair = null;
  }

  /** Fault what-if membership at display resolution: a probe point is
   * displayed as uncovered when every surviving pair's region contains it. */
  whatIfUncovered(x: number[], q: string, faultSet: string[]): boolean {
    const fs = new Set(faultSet);
    const surviving = this.availablePairs().filter(
      (p) => p.q === q && !fs.has(p.s1) && !fs.has(p.s2),
    );
    if (!surviving.length) return true;
    return surviving.every((p) => pointInUnion(p.u_pair, x));
  }

  setFaultSet(ids: string[]): boolean {
    const k = this.bundle?.scenario.k ?? 0;
    if (ids.length > k) return false; // beyond the scenario's fault budget
    this.faultSet = [...ids];
    return true;
  }

  /** Serializable view state for shareable URLs. */
  hashState(): string {
    const visible = this.layers.filter((l) => l.visible).map((l) => l.id);
    const parts = [`layers=${visible.map(encodeURIComponent).join(",")}`];
    if (this.selectedPair) parts.push(`pair=${encodeURIComponent(this.selectedPair)}`);
    if (this.faultSet.length) parts.push(`faults=${this.faultSet.map(encodeURIComponent).join(",")}`);
    return parts.join("&");
  }

  applyHashState(hash: string): void {
    const params = new URLSearchParams(hash.replace(/^#/, ""));
    const layers = params.get("layers");
    if (layers !== null) {
      const want = new Set(layers.split(",").filter(Boolean).map(decodeURIComponent));
      for (const l of this.layers) l.visible = want.has(l.id);
    }
    const pair = params.get("pair");
    this.selectedPair = pair ? decodeURIComponent(pair) : null;
    const faults = params.get("faults");
    this.faultSet = faults ? faults.split(",").filter(Boolean).map(decodeURIComponent) : [];
  }
}

/** Probe-grid summary of the displayed what-if region, used by tests to check
 * fault monotonicity at display resolution. */
export function whatIfGrid(
  state: ViewerState,
  q: string,
  faultSet: string[],
  resolution = 8,
): boolean[] {
  const bb = bboxOf(state.bundle ? state.bundle.scenario.roi : []);
  if (!bb) return [];
  const out: boolean[] = [];
  for (let i = 0; i < resolution; i++) {
    for (let jj = 0; jj < resolution; jj++) {
      for (let kk = 0; kk < resolution; kk++) {
        const x = [
          bb.lo[0] + ((i + 0.5) / resolution) * (bb.hi[0] - bb.lo[0]),
          bb.lo[1] + ((jj + 0.5) / resolution) * (bb.hi[1] - bb.lo[1]),
          bb.lo[2] + ((kk + 0.5) / resolution) * (bb.hi[2] - bb.lo[2]),
        ];
        out.push(state.whatIfUncovered(x, q, faultSet));
      }
    }
  }
  return out;
}
