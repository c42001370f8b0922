/** Options page: persists gate/log endpoints to extension sync storage. */


const DEFAULTS = {
  gateEndpoint: "http://127.0.0.1:8788",
  plsEndpoint: "http://127.0.0.1:8787",
};

const gateInput = document.getElementById("gate-endpoint") as HTMLInputElement;
const plsInput = document.getElementById("pls-endpoint") as HTMLInputElement;
const saveButton = document.getElementById("save") as HTMLButtonElement;
const statusEl = document.getElementById("status") as HTMLElement;

chrome.storage.sync.get(DEFAULTS).then((stored: typeof DEFAULTS) => {
  gateInput.value = stored.gateEndpoint;
  plsInput.value = stored.plsEndpoint;
});

saveButton.addEventListener("click", async () => {
  await chrome.storage.sync.set({
    gateEndpoint: gateInput.value.trim() || DEFAULTS.gateEndpoint,
    plsEndpoint: plsInput.value.trim() || DEFAULTS.plsEndpoint,
  });
  statusEl.textContent = "Saved";
  setTimeout(() => (statusEl.textContent = ""), 1500);
});
