import { ApiClient } from "./api.js";
import { Workbench } from "./controller.js";
import { renderApp } from "./dom.js";
import { decodeState } from "./state.js";

const root = document.getElementById("app");
if (root) {
  const bench = new Workbench(new ApiClient(""), decodeState(location.search));
  bench.onChange(() => renderApp(root, bench));
  renderApp(root, bench);
  void bench.loadDatasets();
}
