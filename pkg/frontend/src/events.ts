/** Push-channel client: attaches to /poll/{id}, routes ctrl-state changes
 * to the indicator and resolves elog events to toast text through the
 * two-step seqnum fetch (events carry only the seqnum, never the detail). */

import type { MonitorApi } from "./api.js";
import { formatErrorToast, parseKvLine } from "./protocol.js";
import type { CtrlState } from "./state.js";

export interface EventHandlers {
  onCtrlState?: (state: CtrlState) => void;
  onErrorToast?: (text: string, detail: Record<string, string>) => void;
  onClose?: () => void;
}

/** Minimal constructor shape so tests can pass the `ws` package and the
 * browser passes the native WebSocket. */
export type WebSocketLike = new (url: string) => {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  close(): void;
};

export class EventChannel {
  private socket: InstanceType<WebSocketLike> | null = null;
  private subId: string | null = null;

  constructor(
    private api: MonitorApi,
    private wsBase: string,
    private handlers: EventHandlers,
    private wsCtor: WebSocketLike,
  ) {}

  async open(): Promise<void> {
    const { id, poll } = await this.api.subscribe(["panel/ctrl-state", "elog/5", "elog/9"]);
    this.subId = id;
    this.socket = new this.wsCtor(`${this.wsBase}${poll}`);
    this.socket.onmessage = (ev) => {
      void this.handleLine(String(ev.data));
    };
    this.socket.onclose = () => this.handlers.onClose?.();
  }

  async handleLine(line: string): Promise<void> {
    const kv = parseKvLine(line);
    if (kv.resource === "panel/ctrl-state" && kv.state) {
      this.handlers.onCtrlState?.(kv.state as CtrlState);
      return;
    }
    if (kv.resource?.startsWith("elog/") && kv.seqnum) {
      const domain = kv.resource.split("/")[1];
      try {
        const detail = await this.api.elogDetail(domain, kv.seqnum);
        this.handlers.onErrorToast?.(formatErrorToast(detail), detail);
      } catch {
        this.handlers.onErrorToast?.(`Unknown (elog/${domain} #${kv.seqnum})`, {});
      }
    }
  }

  async close(): Promise<void> {
    this.socket?.close();
    this.socket = null;
    if (this.subId) {
      await this.api.deleteSubscription(this.subId).catch(() => undefined);
      this.subId = null;
    }
  }
}
