/** Point-cloud view: decodes binary stream frames into a frame buffer and
 * paints them on a 2-D canvas with a simple pinhole projection.  Rendering
 * is decoupled from the socket: the latest frame sits in the buffer and a
 * requestAnimationFrame loop draws it. */

import { decodePointFrame } from "./protocol.js";

export interface ProjectionParams {
  focal: number; // pixels
  pointSize: number;
}

export const DEFAULT_PROJECTION: ProjectionParams = { focal: 320, pointSize: 1 };

export class CloudBuffer {
  points: Float32Array | null = null;
  frameCount = 0;

  ingest(buffer: ArrayBuffer): void {
    this.points = decodePointFrame(buffer);
    this.frameCount += 1;
  }
}

/** Project camera-frame xyz (mm) to pixel offsets around the canvas center.
 * Returns the number of points drawn into the ImageData. */
export function paintPoints(
  points: Float32Array,
  image: ImageData,
  params: ProjectionParams = DEFAULT_PROJECTION,
): number {
  const { width, height } = image;
  const data = image.data;
  data.fill(0);
  // opaque dark background
  for (let i = 3; i < data.length; i += 4) data[i] = 255;
  const cx = width / 2;
  const cy = height / 2;
  let drawn = 0;
  let zMin = Infinity;
  let zMax = -Infinity;
  for (let i = 0; i < points.length; i += 3) {
    const z = points[i + 2];
    if (z > 0) {
      if (z < zMin) zMin = z;
      if (z > zMax) zMax = z;
    }
  }
  const zSpan = Math.max(1, zMax - zMin);
  for (let i = 0; i < points.length; i += 3) {
    const x = points[i];
    const y = points[i + 1];
    const z = points[i + 2];
    if (z <= 0) continue;
    const u = Math.round(cx + (params.focal * x) / z);
    const v = Math.round(cy + (params.focal * y) / z);
    if (u < 0 || v < 0 || u >= width || v >= height) continue;
    const shade = 255 - Math.round(((z - zMin) / zSpan) * 180);
    const o = (v * width + u) * 4;
    data[o] = 40;
    data[o + 1] = shade;
    data[o + 2] = 90;
    data[o + 3] = 255;
    drawn += 1;
  }
  return drawn;
}

export function attachCloudView(
  canvas: HTMLCanvasElement,
  buffer: CloudBuffer,
  placeholder: HTMLElement,
): () => void {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const image = ctx.createImageData(canvas.width, canvas.height);
  let lastDrawnFrame = -1;
  let running = true;
  const draw = () => {
    if (!running) return;
    if (buffer.points && buffer.frameCount !== lastDrawnFrame) {
      lastDrawnFrame = buffer.frameCount;
      paintPoints(buffer.points, image);
      ctx.putImageData(image, 0, 0);
      placeholder.style.display = "none";
    } else if (!buffer.points) {
      placeholder.style.display = "block";
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
  return () => {
    running = false;
  };
}
