/** Entry point: route from the URL hash and mount the app. */

import { App } from "./ui.js";

function route(app: App): void {
  const hash = window.location.hash;
  const sessionMatch = /^#\/session\/([A-Za-z0-9._-]+)$/.exec(hash);
  if (sessionMatch) {
    void app.openSession(sessionMatch[1]);
  } else {
    void app.openCatalogue();
  }
}

export function mount(root: HTMLElement): App {
  const app = new App(root);
  window.addEventListener("hashchange", () => route(app));
  route(app);
  return app;
}

const rootElement = document.getElementById("app");
if (rootElement) {
  mount(rootElement);
}
