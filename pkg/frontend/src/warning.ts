/** Populates the block page from its query string. */

const params = new URLSearchParams(window.location.search);

const urlEl = document.getElementById("blocked-url");
const reasonEl = document.getElementById("blocked-reason");

if (urlEl) {
  urlEl.textContent = params.get("url") ?? "(unknown)";
}
if (reasonEl) {
  reasonEl.textContent = params.get("reason") ?? "(unknown)";
}
