import { ApiClient } from "./api.js";
import { mount } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // served from the same origin as the API in production; override with
  // ?api=http://host:port when developing against a separate server
  const base = new URLSearchParams(location.search).get("api") ?? "";
  void mount(root, new ApiClient(base)).init();
}
