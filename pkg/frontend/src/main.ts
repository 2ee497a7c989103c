import { ApiClient } from "./api.js";
import { ScreenerApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8008";
const dataset = params.get("dataset");

const root = document.getElementById("app");
if (!(root instanceof HTMLElement)) throw new Error("missing #app container");

const api = new ApiClient(base);
const app = new ScreenerApp(root, api);

async function boot(): Promise<void> {
  let datasetId = dataset;
  if (!datasetId) {
    const datasets = await api.listDatasets();
    datasetId = datasets[0]?.dataset_id ?? null;
  }
  if (!datasetId) {
    root!.textContent = "No datasets on the server; run the pipeline first.";
    return;
  }
  await app.start(datasetId);
}

void boot();
