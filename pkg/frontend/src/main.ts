import { OmniviewClient } from "./api.js";
import { ViewerApp } from "./viewer.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? window.location.origin;
const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}
const app = new ViewerApp(root, new OmniviewClient(base), document);
void app.connect();
