import type { Direction, WhatIfResponse } from "./types.js";

export interface PosteriorView {
  downLabel: string;
  upLabel: string;
  downWidth: string;
  upWidth: string;
  argmax: Direction;
}

/** Format a server response for the two-bar panel; no numbers invented. */
export function describePosterior(response: WhatIfResponse): PosteriorView {
  const down = response.probabilities.down * 100;
  const up = response.probabilities.up * 100;
  return {
    downLabel: `Down ${down.toFixed(1)}%`,
    upLabel: `Up ${up.toFixed(1)}%`,
    downWidth: `${down.toFixed(3)}%`,
    upWidth: `${up.toFixed(3)}%`,
    argmax: response.argmax,
  };
}

/** One-line structure summary: how many arcs of each kind the model carries. */
export function describeArcs(arcs: {
  prior: [string, string][];
  intra: [string, string][];
  inter: [string, string][];
}): string {
  const inter = arcs.inter.map(([v]) => shortName(v)).join(", ");
  return (
    `arcs: ${arcs.prior.length} initial-slice, ${arcs.intra.length} ` +
    `intra-slice, ${arcs.inter.length} inter-slice` +
    (inter ? ` (${inter} persist)` : "")
  );
}

/** "price.open" -> "open"; leaves unprefixed names alone. */
export function shortName(variable: string): string {
  const dot = variable.lastIndexOf(".");
  return dot < 0 ? variable : variable.slice(dot + 1);
}
