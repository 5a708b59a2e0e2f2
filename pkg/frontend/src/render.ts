/**
 * Minimal WebGL renderer: flat-shaded translucent triangle meshes with an
 * orbit camera.  Mesh vertices come verbatim from bundle polyhedra; faces are
 * the hull triangles the exporter computed.
 */
import { LayerSpec, PolyData, bboxOf } from "./model.js";

const VS = `attribute vec3 aPos; attribute vec3 aNormal;
uniform mat4 uProj, uView;
varying vec3 vNormal;
void main() { vNormal = aNormal; gl_Position = uProj * uView * vec4(aPos, 1.0); }`;

const FS = `precision mediump float;
uniform vec4 uColor; varying vec3 vNormal;
void main() {
  float light = 0.55 + 0.45 * abs(dot(normalize(vNormal), normalize(vec3(0.4, 0.7, 0.6))));
  gl_FragColor = vec4(uColor.rgb * light, uColor.a);
}`;

interface Mesh {
  buffer: WebGLBuffer;
  count: number;
  color: [number, number, number, number];
}

export class Renderer {
  private gl: WebGLRenderingContext;
  private program: WebGLProgram;
  private meshes: Map<string, Mesh> = new Map();
  center = [0, 0, 0];
  radius = 10;
  yaw = 0.8;
  pitch = 0.5;
  zoom = 2.2;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl", { antialias: true, alpha: false });
    if (!gl) throw new Error("WebGL unavailable");
    this.gl = gl;
    this.program = this.buildProgram();
    gl.enable(gl.DEPTH_TEST);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
  }

  private buildProgram(): WebGLProgram {
    const gl = this.gl;
    const compile = (type: number, src: string) => {
      const sh = gl.createShader(type)!;
      gl.shaderSource(sh, src);
      gl.compileShader(sh);
      if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
        throw new Error(String(gl.getShaderInfoLog(sh)));
      }
      return sh;
    };
    const prog = gl.createProgram()!;
    gl.attachShader(prog, compile(gl.VERTEX_SHADER, VS));
    gl.attachShader(prog, compile(gl.FRAGMENT_SHADER, FS));
    gl.linkProgram(prog);
    if (!gl.getProgramParameter(prog, gl.LINK_STATUS)) {
      throw new Error(String(gl.getProgramInfoLog(prog)));
    }
    return prog;
  }

  frameOn(polys: PolyData[]): void {
    const bb = bboxOf(polys);
    if (!bb) return;
    this.center = [0, 1, 2].map((i) => (bb.lo[i] + bb.hi[i]) / 2);
    this.radius = Math.max(
      1,
      Math.hypot(bb.hi[0] - bb.lo[0], bb.hi[1] - bb.lo[1], bb.hi[2] - bb.lo[2]) / 2,
    );
  }

  setMesh(id: string, polys: PolyData[], color: [number, number, number, number]): void {
    const gl = this.gl;
    const data: number[] = [];
    for (const p of polys) {
      for (const tri of p.faces) {
        const [a, b, c] = tri.map((i) => p.vertices[i]);
        const u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        const v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        const n = [
          u[1] * v[2] - u[2] * v[1],
          u[2] * v[0] - u[0] * v[2],
          u[0] * v[1] - u[1] * v[0],
        ];
        for (const vert of [a, b, c]) data.push(...vert, ...n);
      }
    }
    const existing = this.meshes.get(id);
    if (existing) gl.deleteBuffer(existing.buffer);
    if (!data.length) {
      this.meshes.delete(id);
      return;
    }
    const buffer = gl.createBuffer()!;
    gl.bindBuffer(gl.ARRAY_BUFFER, buffer);
    gl.bufferData(gl.ARRAY_BUFFER, new Float32Array(data), gl.STATIC_DRAW);
    this.meshes.set(id, { buffer, count: data.length / 6, color });
  }

  removeMesh(id: string): void {
    const m = this.meshes.get(id);
    if (m) {
      this.gl.deleteBuffer(m.buffer);
      this.meshes.delete(id);
    }
  }

  clearMeshes(): void {
    for (const id of [...this.meshes.keys()]) this.removeMesh(id);
  }

  syncLayers(layers: LayerSpec[], overrides?: Map<string, PolyData[]>): void {
    for (const layer of layers) {
      const polys = overrides?.get(layer.id) ?? layer.polys;
      if (layer.visible && polys.length) this.setMesh(layer.id, polys, layer.color);
      else this.removeMesh(layer.id);
    }
  }

  private viewMatrix(): Float32Array {
    const d = this.radius * this.zoom;
    const eye = [
      this.center[0] + d * Math.cos(this.pitch) * Math.cos(this.yaw),
      this.center[1] + d * Math.cos(this.pitch) * Math.sin(this.yaw),
      this.center[2] + d * Math.sin(this.pitch),
    ];
    return lookAt(eye, this.center, [0, 0, 1]);
  }

  draw(): void {
    const gl = this.gl;
    const w = this.canvas.clientWidth || this.canvas.width;
    const h = this.canvas.clientHeight || this.canvas.height;
    this.canvas.width = w;
    this.canvas.height = h;
    gl.viewport(0, 0, w, h);
    gl.clearColor(0.07, 0.08, 0.1, 1);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    gl.useProgram(this.program);
    const proj = perspective(0.9, w / Math.max(h, 1), this.radius * 0.01, this.radius * 40);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, "uProj"), false, proj);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, "uView"), false, this.viewMatrix());
    const aPos = gl.getAttribLocation(this.program, "aPos");
    const aNormal = gl.getAttribLocation(this.program, "aNormal");
    const uColor = gl.getUniformLocation(this.program, "uColor");
    for (const mesh of this.meshes.values()) {
      gl.bindBuffer(gl.ARRAY_BUFFER, mesh.buffer);
      gl.enableVertexAttribArray(aPos);
      gl.vertexAttribPointer(aPos, 3, gl.FLOAT, false, 24, 0);
      gl.enableVertexAttribArray(aNormal);
      gl.vertexAttribPointer(aNormal, 3, gl.FLOAT, false, 24, 12);
      gl.uniform4fv(uColor, mesh.color);
      gl.drawArrays(gl.TRIANGLES, 0, mesh.count);
    }
  }
}

function lookAt(eye: number[], target: number[], up: number[]): Float32Array {
  const sub = (a: number[], b: number[]) => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
  const cross = (a: number[], b: number[]) => [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
  const norm = (a: number[]) => {
    const L = Math.hypot(a[0], a[1], a[2]) || 1;
    return [a[0] / L, a[1] / L, a[2] / L];
  };
  const f = norm(sub(target, eye));
  const s = norm(cross(f, up));
  const u = cross(s, f);
  const dot = (a: number[], b: number[]) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return new Float32Array([
    s[0], u[0], -f[0], 0,
    s[1], u[1], -f[1], 0,
    s[2], u[2], -f[2], 0,
    -dot(s, eye), -dot(u, eye), dot(f, eye), 1,
  ]);
}

function perspective(fovy: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovy / 2);
  return new Float32Array([
    f / aspect, 0, 0, 0,
    0, f, 0, 0,
    0, 0, (far + near) / (near - far), -1,
    0, 0, (2 * far * near) / (near - far), 0,
  ]);
}
