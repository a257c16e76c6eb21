/**
 * Evidence grid state: one tri-state cell per (variable, slice).
 *
 * The model is immutable; every mutation returns a fresh grid so a failed
 * request can never corrupt what the analyst has toggled. The target cell
 * (the queried close direction at the final slice) is locked to null and
 * ignores all mutation attempts.
 */

import type {
  CellState,
  Direction,
  EvidenceItem,
  SchemaDoc,
  WhatIfPayload,
} from "./types.js";

export interface GridModel {
  readonly variables: readonly string[];
  readonly tSlices: number;
  readonly target: string;
  /** cells[variableIndex][slice] */
  readonly cells: ReadonlyArray<ReadonlyArray<CellState>>;
}

export function createGrid(schema: SchemaDoc): GridModel {
  if (!schema.variables.includes(schema.target)) {
    throw new Error(`target ${schema.target} missing from variables`);
  }
  if (schema.t_slices < 1) {
    throw new Error("schema must have at least one slice");
  }
  return {
    variables: [...schema.variables],
    tSlices: schema.t_slices,
    target: schema.target,
    cells: schema.variables.map(() =>
      new Array<CellState>(schema.t_slices).fill(null),
    ),
  };
}

export function isTargetCell(
  grid: GridModel,
  variable: string,
  slice: number,
): boolean {
  return variable === grid.target && slice === grid.tSlices - 1;
}

export function nextState(state: CellState): CellState {
  if (state === null) return "Up";
  if (state === "Up") return "Down";
  return null;
}

function withCell(
  grid: GridModel,
  variable: string,
  slice: number,
  state: CellState,
): GridModel {
  const index = grid.variables.indexOf(variable);
  if (index < 0 || slice < 0 || slice >= grid.tSlices) {
    throw new Error(`no cell for ${variable} at slice ${slice}`);
  }
  if (isTargetCell(grid, variable, slice)) return grid;
  const cells = grid.cells.map((row, v) =>
    v === index ? row.map((s, t) => (t === slice ? state : s)) : row,
  );
  return { ...grid, cells };
}

export function cycleCell(
  grid: GridModel,
  variable: string,
  slice: number,
): GridModel {
  const index = grid.variables.indexOf(variable);
  if (index < 0) throw new Error(`unknown variable ${variable}`);
  const current = grid.cells[index]?.[slice];
  if (current === undefined) {
    throw new Error(`no cell for ${variable} at slice ${slice}`);
  }
  return withCell(grid, variable, slice, nextState(current));
}

export function clearGrid(grid: GridModel): GridModel {
  return {
    ...grid,
    cells: grid.variables.map(() =>
      new Array<CellState>(grid.tSlices).fill(null),
    ),
  };
}

/**
 * Fill rows from a scenario keyed by short feature name ("open", "volume").
 * A key matches the variable named exactly or any "<prefix>.<key>" column;
 * unmatched keys are ignored so presets work across feature groups.
 */
export function applyPreset(
  grid: GridModel,
  rows: Record<string, Direction[]>,
): GridModel {
  let next = clearGrid(grid);
  for (const [key, pattern] of Object.entries(rows)) {
    for (const variable of grid.variables) {
      if (variable !== key && !variable.endsWith(`.${key}`)) continue;
      const span = Math.min(pattern.length, grid.tSlices);
      for (let slice = 0; slice < span; slice++) {
        const state = pattern[slice];
        if (state !== undefined && !isTargetCell(next, variable, slice)) {
          next = withCell(next, variable, slice, state);
        }
      }
    }
  }
  return next;
}

/** Pure grid -> request mapping; only set cells become evidence. */
export function payloadFromGrid(grid: GridModel): WhatIfPayload {
  const evidence: EvidenceItem[] = [];
  for (let slice = 0; slice < grid.tSlices; slice++) {
    for (let v = 0; v < grid.variables.length; v++) {
      const state = grid.cells[v]?.[slice];
      const variable = grid.variables[v];
      if (state != null && variable !== undefined) {
        evidence.push({ slice, variable, state });
      }
    }
  }
  return { evidence };
}
