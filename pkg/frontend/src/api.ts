/** HTTP client for the monitor service (structured-text bodies). */

import { parseKvBody } from "./protocol.js";
import type { CtrlState } from "./state.js";

export class MonitorApi {
  constructor(public baseUrl: string) {}

  async ctrlState(): Promise<CtrlState> {
    const resp = await fetch(`${this.baseUrl}/rw/panel/ctrl-state`);
    return parseKvBody(await resp.text()).state as CtrlState;
  }

  async ctrlAction(action: "connect" | "disconnect" | "restart"): Promise<CtrlState> {
    const resp = await fetch(`${this.baseUrl}/rw/panel/ctrl-state`, {
      method: "POST",
      body: `action=${action}`,
    });
    return parseKvBody(await resp.text()).state as CtrlState;
  }

  async subscribe(resources: string[]): Promise<{ id: string; poll: string }> {
    const resp = await fetch(`${this.baseUrl}/subscription`, {
      method: "POST",
      body: `resources=${resources.join(",")}`,
    });
    if (resp.status !== 201) throw new Error(`subscribe failed: ${resp.status}`);
    const kv = parseKvBody(await resp.text());
    return { id: kv.id, poll: kv.poll };
  }

  async deleteSubscription(id: string): Promise<void> {
    await fetch(`${this.baseUrl}/subscription/${id}`, { method: "DELETE" });
  }

  async elogDetail(domain: string, seqnum: string): Promise<Record<string, string>> {
    const resp = await fetch(`${this.baseUrl}/rw/elog/${domain}/${seqnum}`);
    if (!resp.ok) throw new Error(`elog detail ${domain}/${seqnum}: ${resp.status}`);
    return parseKvBody(await resp.text());
  }

  async gripper(action: "open" | "close"): Promise<{ ok: boolean; state: string }> {
    const resp = await fetch(`${this.baseUrl}/gripper`, {
      method: "POST",
      body: `action=${action}`,
    });
    const kv = parseKvBody(await resp.text());
    return { ok: resp.ok, state: kv.gripper ?? kv.error ?? "" };
  }
}
