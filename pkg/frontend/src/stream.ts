// Live stream plumbing: a WebSocket client that pushes 100 Hz frames and
// surfaces predictions/events, plus frame sources (file replay, synthetic
// feed, device motion when the browser offers it).

import type {Frame, StreamMessage} from "./api.js";

export interface WsLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: {data: unknown}) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface StreamHooks {
  onMessage: (msg: StreamMessage) => void;
  onStatus: (status: "connected" | "reconnecting") => void;
}

/** Pushes frame batches over the stream socket; reconnects on drop (the
 * session lives server-side, so a reconnect only re-creates the
 * recognizer automaton). */
export class StreamClient {
  private ws: WsLike | null = null;
  private closed = false;

  constructor(private url: string, private hooks: StreamHooks,
              private factory: WsFactory) {}

  connect(): void {
    this.closed = false;
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => this.hooks.onStatus("connected");
    ws.onmessage = (ev) => {
      try {
        this.hooks.onMessage(JSON.parse(String(ev.data)) as StreamMessage);
      } catch {
        this.hooks.onMessage({error: "unparseable server message"});
      }
    };
    ws.onclose = () => {
      if (!this.closed) {
        this.hooks.onStatus("reconnecting");
        setTimeout(() => this.connect(), 500);
      }
    };
    ws.onerror = () => { /* onclose follows */ };
  }

  push(frames: Frame[]): void {
    this.ws?.send(JSON.stringify({frames}));
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

/** Parses a recording CSV (t,ax..gz) into frames. */
export function parseRecordingCsv(text: string): Frame[] {
  const lines = text.trim().split(/\r?\n/);
  const frames: Frame[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",").map(Number);
    if (parts.length === 7 && parts.every((v) => Number.isFinite(v))) {
      frames.push(parts.slice(1) as Frame);
    }
  }
  return frames;
}

/** Replays frames at real-time rate (default 10 batches/s). Returns a
 * cancel function; onDone fires after the final batch. */
export function replayFrames(frames: Frame[], push: (f: Frame[]) => void,
                             onDone: () => void, batch = 10,
                             intervalMs = 100): () => void {
  let i = 0;
  const timer = setInterval(() => {
    push(frames.slice(i, i + batch));
    i += batch;
    if (i >= frames.length) {
      clearInterval(timer);
      onDone();
    }
  }, intervalMs);
  return () => clearInterval(timer);
}

/** Quiet synthetic feed (sensor noise only) for demos without hardware. */
export function syntheticQuietFrames(n: number, amplitude = 0.01): Frame[] {
  const out: Frame[] = [];
  for (let i = 0; i < n; i++) {
    out.push([0, 0, 0, 0, 0, 0].map(
      () => amplitude * (Math.random() * 2 - 1)) as Frame);
  }
  return out;
}

/** Device-motion capture, feature-detected; returns null when the API is
 * unavailable (the demo paths are file replay / synthetic feed). */
export function startDeviceMotion(push: (f: Frame[]) => void): (() => void) | null {
  if (typeof window === "undefined" || !("DeviceMotionEvent" in window)) {
    return null;
  }
  const handler = (ev: DeviceMotionEvent) => {
    const a = ev.accelerationIncludingGravity;
    const r = ev.rotationRate;
    if (!a || !r) return;
    const g = 9.80665;
    push([[
      (a.x ?? 0) / g, (a.y ?? 0) / g, (a.z ?? 0) / g,
      ((r.alpha ?? 0) * Math.PI) / 180,
      ((r.beta ?? 0) * Math.PI) / 180,
      ((r.gamma ?? 0) * Math.PI) / 180,
    ]]);
  };
  window.addEventListener("devicemotion", handler);
  return () => window.removeEventListener("devicemotion", handler);
}
