/** Entry point: wire the explorer into the page. */

import { ApiClient } from "./api.js";
import { StateStore } from "./state.js";
import { ExplorerApp, ExplorerOptions } from "./views.js";

export async function bootstrap(
  win: Window = window,
  api: ApiClient = new ApiClient(""),
  options: ExplorerOptions = {},
): Promise<ExplorerApp> {
  const store = new StateStore(win);
  const app = new ExplorerApp(win.document, api, store, options);
  const mount = win.document.getElementById("app") ?? win.document.body;
  mount.append(app.root);
  await app.start();
  return app;
}
