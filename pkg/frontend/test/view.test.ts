import { describe, expect, it } from "vitest";

import { describeArcs, describePosterior, shortName } from "../src/view.js";
import type { WhatIfResponse } from "../src/types.js";

function response(down: number, argmax: "Up" | "Down"): WhatIfResponse {
  return {
    probabilities: { down, up: 1 - down },
    argmax,
    model_id: "m",
    evidence_echo: [],
  };
}

describe("describePosterior", () => {
  it("echoes the server numbers without inventing any", () => {
    const view = describePosterior(response(0.8123456, "Down"));
    expect(view.downLabel).toBe("Down 81.2%");
    expect(view.upLabel).toBe("Up 18.8%");
    expect(view.downWidth).toBe("81.235%");
    expect(view.upWidth).toBe("18.765%");
    expect(view.argmax).toBe("Down");
  });

  it("bar widths sum to 100% within display rounding", () => {
    for (const down of [0, 0.1234, 0.5, 0.66667, 1]) {
      const view = describePosterior(response(down, "Up"));
      const total =
        parseFloat(view.downWidth) + parseFloat(view.upWidth);
      expect(Math.abs(total - 100)).toBeLessThan(0.01);
    }
  });
});

describe("shortName", () => {
  it("drops the source prefix only", () => {
    expect(shortName("price.open")).toBe("open");
    expect(shortName("ti.bband_mid")).toBe("bband_mid");
    expect(shortName("volume")).toBe("volume");
  });
});

describe("describeArcs", () => {
  it("counts each arc kind and names persisting variables", () => {
    const text = describeArcs({
      prior: [["price.open", "price.close"]],
      intra: [],
      inter: [
        ["price.close", "price.close"],
        ["price.open", "price.open"],
      ],
    });
    expect(text).toBe(
      "arcs: 1 initial-slice, 0 intra-slice, 2 inter-slice " +
        "(close, open persist)",
    );
  });
});
