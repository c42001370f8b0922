/**
 * The extension-side render decision.
 *
 * Login detection runs in-page for latency; everything heavier
 * (signature verification, screenshot classification) is delegated to
 * the verification service's /gate endpoint so there is a single
 * source of truth.  A screenshot is captured and the call retried once
 * when the service reports it could not complete fallback verification
 * without one.  An unreachable service fails closed for login pages.
 */

import { DEFAULT_CONFIG, DetectionConfig, detectLogin } from "./detector";

export type Action = "RENDER" | "BLOCK";

export interface Decision {
  action: Action;
  reason: string;
  detail?: string;
}

export interface GateRequest {
  url: string;
  html: string;
  headers: Record<string, string>;
  screenshot_b64?: string;
}

export interface DecisionDeps {
  /** POST to the verification service's /gate endpoint. */
  gate(request: GateRequest): Promise<Decision>;
  /** Capture the visible tab as base64 PNG; null when unavailable. */
  capture?(): Promise<string | null>;
  detection?: DetectionConfig;
  failClosed?: boolean;
}

export async function decide(
  url: string,
  html: string,
  headers: Record<string, string>,
  deps: DecisionDeps,
): Promise<Decision> {
  const report = detectLogin(html, url, deps.detection ?? DEFAULT_CONFIG);
  if (!report.isLogin) {
    return { action: "RENDER", reason: "NOT_LOGIN", detail: `score ${report.score}` };
  }

  const request: GateRequest = { url, html, headers };
  try {
    let decision = await deps.gate(request);
    if (decision.reason === "FALLBACK_UNREACHABLE" && deps.capture) {
      const screenshot = await deps.capture();
      if (screenshot) {
        decision = await deps.gate({ ...request, screenshot_b64: screenshot });
      }
    }
    return decision;
  } catch (err) {
    const detail = `verification service unreachable: ${String(err)}`;
    if (deps.failClosed === false) {
      return { action: "RENDER", reason: "FALLBACK_SAFE", detail: `fail-open: ${detail}` };
    }
    return { action: "BLOCK", reason: "FALLBACK_UNREACHABLE", detail };
  }
}
