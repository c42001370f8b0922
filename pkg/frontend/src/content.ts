/**
 * Content script: freezes credential fields until the decision resolves,
 * then reports the document to the service worker.
 */


const CREDENTIAL_SELECTOR =
  'input[type="password"], input[type="email"], ' +
  'input[name="username"], input[name="userid"], input[name="email"]';

function setCredentialFieldsEnabled(enabled: boolean): void {
  document.querySelectorAll<HTMLInputElement>(CREDENTIAL_SELECTOR).forEach(
    (input) => {
      input.disabled = !enabled;
    },
  );
}

setCredentialFieldsEnabled(false);

chrome.runtime.sendMessage(
  {
    kind: "dom_loaded",
    url: window.location.href,
    html: document.documentElement.outerHTML,
  },
  (decision: { action: string } | undefined) => {
    if (decision?.action === "RENDER") {
      setCredentialFieldsEnabled(true);
    }
  },
);
