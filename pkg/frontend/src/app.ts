/**
 * DOM wiring for the what-if explorer.
 *
 * One evidence grid (variables x days), preset buttons, a two-bar posterior
 * panel and an error banner. All state lives in an immutable GridModel plus
 * the last server response; the panel never shows a probability the server
 * did not send.
 */

import { fetchSchema, postWhatIf } from "./client.js";
import {
  applyPreset,
  clearGrid,
  createGrid,
  cycleCell,
  isTargetCell,
  payloadFromGrid,
  type GridModel,
} from "./grid.js";
import { PRESETS } from "./presets.js";
import { WhatIfScheduler } from "./scheduler.js";
import type { SchemaDoc, WhatIfResponse } from "./types.js";
import { describeArcs, describePosterior, shortName } from "./view.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export async function initApp(root: HTMLElement, base = ""): Promise<void> {
  root.textContent = "";
  const banner = el("div", "banner");
  banner.hidden = true;
  root.appendChild(banner);

  let schema: SchemaDoc;
  try {
    schema = await fetchSchema(base);
  } catch (error) {
    banner.hidden = false;
    banner.textContent = `could not load the model schema: ${String(error)} `;
    const retry = el("button", "retry", "retry");
    retry.addEventListener("click", () => void initApp(root, base));
    banner.appendChild(retry);
    return;
  }

  let grid = createGrid(schema);

  const controls = el("div", "controls");
  for (const preset of PRESETS) {
    const button = el("button", "preset", `${preset.name} scenario`);
    button.dataset["preset"] = preset.name;
    button.addEventListener("click", () => {
      setGrid(applyPreset(grid, preset.rows));
    });
    controls.appendChild(button);
  }
  const reset = el("button", "preset", "Clear");
  reset.dataset["preset"] = "Clear";
  reset.addEventListener("click", () => setGrid(clearGrid(grid)));
  controls.appendChild(reset);
  root.appendChild(controls);

  const table = el("table", "grid");
  const head = table.createTHead().insertRow();
  head.appendChild(el("th", "", "feature"));
  for (let slice = 0; slice < grid.tSlices; slice++) {
    head.appendChild(el("th", "", `day ${slice + 1}`));
  }
  const body = table.createTBody();
  for (const variable of grid.variables) {
    const row = body.insertRow();
    const label = el("th", "rowlabel", shortName(variable));
    label.title = variable;
    row.appendChild(label);
    for (let slice = 0; slice < grid.tSlices; slice++) {
      const cell = el("button", "cell");
      cell.dataset["variable"] = variable;
      cell.dataset["slice"] = String(slice);
      if (isTargetCell(grid, variable, slice)) {
        cell.disabled = true;
        cell.classList.add("target");
        cell.textContent = "target";
        cell.title = "queried node — evidence not allowed here";
      }
      row.insertCell().appendChild(cell);
    }
  }
  body.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLButtonElement) || target.disabled) return;
    const variable = target.dataset["variable"];
    const slice = target.dataset["slice"];
    if (variable === undefined || slice === undefined) return;
    setGrid(cycleCell(grid, variable, Number(slice)));
  });
  root.appendChild(table);

  const panel = el("div", "posterior");
  const noData = el("div", "nodata", "no data — waiting for the server");
  const bars = el("div", "bars");
  bars.hidden = true;
  const downFill = el("span", "fill down");
  const downLabel = el("span", "label");
  const downBar = el("div", "bar");
  downBar.append(downFill, downLabel);
  const upFill = el("span", "fill up");
  const upLabel = el("span", "label");
  const upBar = el("div", "bar");
  upBar.append(upFill, upLabel);
  const badge = el("span", "badge");
  bars.append(downBar, upBar, badge);
  panel.append(noData, bars);
  root.appendChild(panel);

  const footer = el("div", "footer");
  footer.textContent =
    `model: feature group ${schema.feature_group}, ` +
    `${schema.variables.length} variables, T=${schema.t_slices} · ` +
    describeArcs(schema.arcs);
  root.appendChild(footer);

  const scheduler = new WhatIfScheduler(
    (payload) => postWhatIf(payload, base),
    showPosterior,
    showError,
  );

  function setGrid(next: GridModel): void {
    grid = next;
    paintCells();
    query();
  }

  function paintCells(): void {
    for (const cell of body.querySelectorAll<HTMLButtonElement>(".cell")) {
      if (cell.disabled) continue;
      const variable = cell.dataset["variable"] ?? "";
      const slice = Number(cell.dataset["slice"] ?? -1);
      const state = grid.cells[grid.variables.indexOf(variable)]?.[slice];
      cell.classList.toggle("up", state === "Up");
      cell.classList.toggle("down", state === "Down");
      cell.textContent = state ?? "·";
    }
  }

  function query(): void {
    panel.classList.add("pending");
    scheduler.request(payloadFromGrid(grid));
  }

  function showPosterior(response: WhatIfResponse): void {
    panel.classList.remove("pending");
    banner.hidden = true;
    const view = describePosterior(response);
    noData.hidden = true;
    bars.hidden = false;
    downFill.style.width = view.downWidth;
    downLabel.textContent = view.downLabel;
    upFill.style.width = view.upWidth;
    upLabel.textContent = view.upLabel;
    badge.textContent = view.argmax;
    badge.className = `badge ${view.argmax.toLowerCase()}`;
  }

  function showError(error: unknown): void {
    panel.classList.remove("pending");
    banner.hidden = false;
    banner.textContent = String(error instanceof Error ? error.message : error);
  }

  paintCells();
  query();
}
