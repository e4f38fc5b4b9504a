import { bootstrap } from "./app.js";

bootstrap().catch((err) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${err}`;
});
