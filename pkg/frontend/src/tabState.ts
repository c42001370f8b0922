/**
 * Per-tab navigation state: captured response headers, pipeline stage,
 * and the final render decision.  One decision per navigation; a new
 * navigation in the same tab resets the slot.
 */

import type { Decision } from "./decision";

export type Stage = "idle" | "headers" | "decided";

export interface HeaderPair {
  name: string;
  value: string;
}

export interface TabState {
  headers: Record<string, string>;
  stage: Stage;
  decision: Decision | null;
}

function emptyState(): TabState {
  return { headers: {}, stage: "idle", decision: null };
}

export class TabStateMap {
  private states = new Map<number, TabState>();

  /** Response headers for the main frame; a redirect overwrites (last wins). */
  onHeaders(tabId: number, headers: HeaderPair[]): void {
    const record: Record<string, string> = {};
    for (const { name, value } of headers) {
      // first occurrence of a duplicated header wins
      if (!(name.toLowerCase() in lowerKeys(record))) record[name] = value;
    }
    this.states.set(tabId, { headers: record, stage: "headers", decision: null });
  }

  /** A fresh navigation invalidates anything recorded for the tab. */
  onNavigation(tabId: number): void {
    this.states.set(tabId, emptyState());
  }

  get(tabId: number): TabState {
    return this.states.get(tabId) ?? emptyState();
  }

  setDecision(tabId: number, decision: Decision): void {
    const state = this.get(tabId);
    if (state.stage === "decided") {
      throw new Error(`tab ${tabId} already decided for this navigation`);
    }
    this.states.set(tabId, { ...state, stage: "decided", decision });
  }

  evict(tabId: number): void {
    this.states.delete(tabId);
  }

  get size(): number {
    return this.states.size;
  }
}

function lowerKeys(record: Record<string, string>): Record<string, true> {
  const out: Record<string, true> = {};
  for (const key of Object.keys(record)) out[key.toLowerCase()] = true;
  return out;
}
