/** Pose-relay client: one WebSocket that carries jog targets toward the
 * wire endpoint and periodic `state ...` lines back. */

import type { WebSocketLike } from "./events.js";
import { formatTargetLine, parseKvLine, parsePose, type Pose } from "./protocol.js";

export interface RelayHandlers {
  onState?: (kv: Record<string, string>, pose: Pose | null) => void;
  onClose?: () => void;
}

export class PoseRelay {
  private socket: InstanceType<WebSocketLike> | null = null;
  private openPromise: Promise<void> | null = null;

  constructor(
    private url: string,
    private handlers: RelayHandlers,
    private wsCtor: WebSocketLike,
  ) {}

  open(): Promise<void> {
    if (this.openPromise) return this.openPromise;
    const socket = new this.wsCtor(this.url) as InstanceType<WebSocketLike> & {
      onopen: (() => void) | null;
      onerror: ((e: unknown) => void) | null;
      send(data: string): void;
    };
    this.socket = socket;
    socket.onmessage = (ev) => {
      const line = String(ev.data);
      if (!line.startsWith("state ")) return;
      const kv = parseKvLine(line.slice("state ".length));
      this.handlers.onState?.(kv, parsePose(kv));
    };
    socket.onclose = () => this.handlers.onClose?.();
    this.openPromise = new Promise((resolve, reject) => {
      socket.onopen = () => resolve();
      socket.onerror = (e: unknown) => reject(e);
    });
    return this.openPromise;
  }

  sendTarget(pose: Pose, gripper?: "open" | "close"): void {
    (this.socket as { send?: (d: string) => void } | null)?.send?.(
      formatTargetLine(pose, gripper),
    );
  }

  requestState(): void {
    (this.socket as { send?: (d: string) => void } | null)?.send?.("reset");
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
    this.openPromise = null;
  }
}
