/**
 * Service worker: wires browser events to the decision pipeline.
 *
 * onHeadersReceived records the main-frame response headers per tab;
 * when the content script reports DOMContentLoaded with the document
 * markup, the decision pipeline runs and a BLOCK verdict swaps the tab
 * to the bundled warning page.
 */

import { decide } from "./decision";
import { GateClient } from "./gateClient";
import { TabStateMap } from "./tabState";


const DEFAULTS = {
  gateEndpoint: "http://127.0.0.1:8788",
  plsEndpoint: "http://127.0.0.1:8787",
};

const tabs = new TabStateMap();

async function endpoints(): Promise<typeof DEFAULTS> {
  const stored = await chrome.storage.sync.get(DEFAULTS);
  return { ...DEFAULTS, ...stored };
}

async function captureTab(tabId: number): Promise<string | null> {
  try {
    const dataUrl: string = await chrome.tabs.captureVisibleTab(undefined, {
      format: "png",
    });
    return dataUrl.split(",", 2)[1] ?? null;
  } catch {
    return null;
  }
}

chrome.webRequest.onHeadersReceived.addListener(
  (details: any) => {
    if (details.tabId >= 0 && details.type === "main_frame") {
      tabs.onHeaders(details.tabId, details.responseHeaders ?? []);
    }
  },
  { urls: ["<all_urls>"], types: ["main_frame"] },
  ["responseHeaders"],
);

chrome.webNavigation.onBeforeNavigate.addListener((details: any) => {
  if (details.frameId === 0) tabs.onNavigation(details.tabId);
});

chrome.tabs.onRemoved.addListener((tabId: number) => tabs.evict(tabId));

chrome.runtime.onMessage.addListener(
  (message: any, sender: any, sendResponse: (response: any) => void) => {
    if (message?.kind !== "dom_loaded" || sender.tab?.id === undefined) {
      return false;
    }
    const tabId: number = sender.tab.id;
    (async () => {
      const config = await endpoints();
      const client = new GateClient(config.gateEndpoint, config.plsEndpoint);
      const decision = await decide(
        message.url, message.html, tabs.get(tabId).headers,
        {
          gate: (request) => client.gate(request),
          capture: () => captureTab(tabId),
        },
      );
      tabs.setDecision(tabId, decision);
      if (decision.action === "BLOCK") {
        const warning = chrome.runtime.getURL(
          `warning.html?reason=${encodeURIComponent(decision.reason)}` +
          `&url=${encodeURIComponent(message.url)}`);
        await chrome.tabs.update(tabId, { url: warning });
      }
      sendResponse(decision);
    })();
    return true; // async response
  },
);
