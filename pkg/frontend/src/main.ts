import { App } from "./app.js";
import { RatingApi } from "./api.js";

function tokenFromLocation(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("token") ?? "";
}

const root = document.getElementById("app");
if (root) {
  const token = tokenFromLocation();
  if (!token) {
    root.textContent = "Missing ?token= in the URL. Use the link you were given.";
  } else {
    const app = new App(new RatingApi(window.location.origin, token), root);
    void app.start();
  }
}
