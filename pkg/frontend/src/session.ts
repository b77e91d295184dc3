/**
 * One rater's pass through one survey.
 *
 * The session never sees ground truth: it holds only item ids, the
 * rater's own judgments, and the current window/level. Advancing past an
 * item is impossible without a stored (or server-acknowledged duplicate)
 * judgment, and judged items are never re-submitted.
 */

import { ApiClient, Judgment, SurveyItemRef } from "./api.js";
import { clampWindow, DEFAULT_WINDOW, PresetName, PRESETS, WindowLevel } from "./windowing.js";

export type SubmitOutcome = "accepted" | "already-judged";

export class SurveySession {
  private items: SurveyItemRef[] = [];
  private cursor = 0;
  private judged = new Map<string, Judgment>();
  private windowLevel: WindowLevel = { ...DEFAULT_WINDOW };

  constructor(
    private readonly api: ApiClient,
    readonly surveyId: string,
    readonly raterId: string,
  ) {}

  async load(): Promise<number> {
    this.items = await this.api.listItems(this.surveyId);
    this.cursor = 0;
    this.judged.clear();
    return this.items.length;
  }

  get total(): number {
    return this.items.length;
  }

  get done(): number {
    return this.judged.size;
  }

  get complete(): boolean {
    return this.items.length > 0 && this.cursor >= this.items.length;
  }

  get currentItem(): SurveyItemRef | null {
    return this.complete ? null : (this.items[this.cursor] ?? null);
  }

  get window(): WindowLevel {
    return { ...this.windowLevel };
  }

  setWindow(wc: number, ww: number): void {
    this.windowLevel = clampWindow({ wc, ww });
  }

  applyPreset(name: PresetName): void {
    this.windowLevel = { ...PRESETS[name] };
  }

  /** URL the current item's image is fetched from; tracks wc/ww. */
  imageUrl(): string | null {
    const item = this.currentItem;
    if (!item) return null;
    return this.api.imageUrl(item.item_id, this.windowLevel.wc, this.windowLevel.ww);
  }

  fetchImage(): Promise<Blob> {
    const item = this.currentItem;
    if (!item) return Promise.reject(new Error("survey already complete"));
    return this.api.fetchImage(item.item_id, this.windowLevel.wc, this.windowLevel.ww);
  }

  /** The rater's own tallies; there is nothing truth-derived to show. */
  counts(): Record<Judgment, number> {
    const out: Record<Judgment, number> = { real: 0, synthetic: 0, indeterminable: 0 };
    for (const judgment of this.judged.values()) out[judgment] += 1;
    return out;
  }

  /**
   * Submit the judgment for the current item and advance.
   *
   * 204 stores and advances; 409 (judged in an earlier session) marks the
   * item done and advances without overwriting anything. Network failures
   * and other statuses reject with the cursor untouched, so the caller
   * can retry without losing the rater's rationale.
   */
  async submit(judgment: Judgment, rationale?: string): Promise<SubmitOutcome> {
    const item = this.currentItem;
    if (!item) throw new Error("survey already complete");
    const status = await this.api.submitResponse(this.surveyId, {
      rater_id: this.raterId,
      item_id: item.item_id,
      judgment,
      rationale: rationale && rationale.length > 0 ? rationale : null,
    });
    this.judged.set(item.item_id, judgment);
    this.cursor += 1;
    return status === 204 ? "accepted" : "already-judged";
  }
}
