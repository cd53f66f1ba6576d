/** Browser entry point: wire query parameters to the app. */

import { AnnotationApp } from "./app.js";
import { ServiceClient } from "./api.js";

const params = new URLSearchParams(window.location.search);
const experiment = params.get("experiment");
const worker = params.get("worker");
const root = document.getElementById("app");

if (!experiment || !worker || !root) {
  document.body.textContent = "usage: index.html?experiment=<id>&worker=<token>";
} else {
  const client = new ServiceClient(window.location.origin, experiment, worker);
  const app = new AnnotationApp(root, client);
  app.start().catch((err) => {
    root.textContent = `failed to start: ${err}`;
  });
}
