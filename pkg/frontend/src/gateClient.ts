/** HTTP client for the verification service and the public log server. */

import type { Decision, GateRequest } from "./decision";

export interface LogIdentityRecord {
  log_id: string;
  pub_key: string;
}

export class GateClient {
  constructor(
    private readonly gateEndpoint: string,
    private readonly plsEndpoint: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async gate(request: GateRequest): Promise<Decision> {
    const resp = await this.fetchFn(`${this.gateEndpoint}/gate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!resp.ok) throw new Error(`gate endpoint returned ${resp.status}`);
    return (await resp.json()) as Decision;
  }

  async getLogs(): Promise<LogIdentityRecord[]> {
    const resp = await this.fetchFn(`${this.plsEndpoint}/logs`);
    if (!resp.ok) throw new Error(`logs endpoint returned ${resp.status}`);
    return (await resp.json()) as LogIdentityRecord[];
  }

  async verifyScreenshot(url: string, screenshotB64: string): Promise<{
    phishing: boolean;
    matched_domain: string | null;
  }> {
    const form = new FormData();
    form.append("url", url);
    const bytes = Uint8Array.from(atob(screenshotB64), (c) => c.charCodeAt(0));
    form.append("screenshot", new Blob([bytes], { type: "image/png" }), "s.png");
    const resp = await this.fetchFn(`${this.plsEndpoint}/verify-screenshot`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) throw new Error(`verify-screenshot returned ${resp.status}`);
    return await resp.json();
  }
}
