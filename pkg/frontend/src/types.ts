export type Direction = "Up" | "Down";

/** null means "not observed" — the cell contributes no evidence. */
export type CellState = Direction | null;

export interface SchemaDoc {
  variables: string[];
  t_slices: number;
  feature_group: number;
  target: string;
  arcs: {
    prior: [string, string][];
    intra: [string, string][];
    inter: [string, string][];
  };
}

export interface EvidenceItem {
  slice: number;
  variable: string;
  state: Direction;
}

export interface WhatIfPayload {
  evidence: EvidenceItem[];
}

export interface WhatIfResponse {
  probabilities: { down: number; up: number };
  argmax: Direction;
  model_id: string;
  evidence_echo: EvidenceItem[];
}
