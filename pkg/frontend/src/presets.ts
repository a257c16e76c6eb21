import type { Direction } from "./types.js";

export interface ScenarioPreset {
  name: string;
  rows: Record<string, Direction[]>;
}

export const ETHEREUM: ScenarioPreset = {
  name: "Ethereum",
  rows: {
    open: ["Up", "Up", "Down", "Down", "Down"],
    high: ["Down", "Up", "Down", "Down", "Down"],
    low: ["Up", "Down", "Down", "Down", "Down"],
    volume: ["Down", "Up", "Down", "Up", "Up"],
  },
};

export const TETHER: ScenarioPreset = {
  name: "Tether",
  rows: {
    open: ["Up", "Up", "Up", "Down", "Down"],
    high: ["Down", "Up", "Up", "Down", "Up"],
    low: ["Up", "Down", "Up", "Down", "Down"],
    volume: ["Up", "Up", "Down", "Down", "Up"],
  },
};

export const PRESETS: ScenarioPreset[] = [ETHEREUM, TETHER];
