/** Window/level (wc/ww) handling: contrast is the rater's to adjust. */

export interface WindowLevel {
  wc: number;
  ww: number;
}

export const DEFAULT_WINDOW: WindowLevel = { wc: 40, ww: 400 };

export const PRESETS = {
  "soft-tissue": { wc: 40, ww: 400 },
  lung: { wc: -600, ww: 1500 },
  bone: { wc: 400, ww: 1800 },
} as const satisfies Record<string, WindowLevel>;

export type PresetName = keyof typeof PRESETS;

export const PRESET_NAMES = Object.keys(PRESETS) as PresetName[];

/** Width must stay positive; the service rejects ww <= 0. */
export function clampWindow(w: WindowLevel): WindowLevel {
  return { wc: w.wc, ww: Math.max(1, w.ww) };
}
