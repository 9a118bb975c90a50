// Browser entry point: the app talks to the service that serves it.

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const api = new ApiClient(window.location.origin);
  const app = new App(root, api);
  void app.start();
}
