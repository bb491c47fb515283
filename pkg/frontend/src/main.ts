import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

declare global {
  interface Window {
    DPM_API?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  const app = createApp({ root, api: new ApiClient(window.DPM_API ?? "") });
  const match = /^#model=(.+)$/.exec(window.location.hash);
  if (match) {
    void app.run(() => app.loadModel(decodeURIComponent(match[1])));
  }
}
