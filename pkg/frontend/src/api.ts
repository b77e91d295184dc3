/** Typed client for the survey service HTTP API. */

export type Judgment = "real" | "synthetic" | "indeterminable";

export interface SurveyItemRef {
  item_id: string;
}

export interface SubmitBody {
  rater_id: string;
  item_id: string;
  judgment: Judgment;
  rationale?: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    readonly token?: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  /** Ordered item references; the payload never contains ground truth. */
  async listItems(surveyId: string): Promise<SurveyItemRef[]> {
    const res = await this.fetchFn(
      `${this.baseUrl}/api/surveys/${encodeURIComponent(surveyId)}/items`,
      { headers: this.headers(false) },
    );
    if (!res.ok) throw new ApiError(res.status, `cannot list items: HTTP ${res.status}`);
    return (await res.json()) as SurveyItemRef[];
  }

  /** URL of the windowed rendering; changes whenever wc/ww change. */
  imageUrl(itemId: string, wc: number, ww: number): string {
    return (
      `${this.baseUrl}/api/items/${encodeURIComponent(itemId)}/image` +
      `?wc=${encodeURIComponent(wc)}&ww=${encodeURIComponent(ww)}`
    );
  }

  async fetchImage(itemId: string, wc: number, ww: number): Promise<Blob> {
    const res = await this.fetchFn(this.imageUrl(itemId, wc, ww), {
      headers: this.headers(false),
    });
    if (!res.ok) throw new ApiError(res.status, `cannot fetch image: HTTP ${res.status}`);
    return await res.blob();
  }

  /**
   * Submit one judgment. Resolves with the HTTP status for 204 (stored)
   * and 409 (already judged); any other status throws ApiError. Network
   * failures reject with the underlying error so callers can offer retry.
   */
  async submitResponse(surveyId: string, body: SubmitBody): Promise<number> {
    const res = await this.fetchFn(
      `${this.baseUrl}/api/surveys/${encodeURIComponent(surveyId)}/responses`,
      { method: "POST", headers: this.headers(true), body: JSON.stringify(body) },
    );
    if (res.status === 204 || res.status === 409) return res.status;
    throw new ApiError(res.status, `submission rejected: HTTP ${res.status}`);
  }
}
