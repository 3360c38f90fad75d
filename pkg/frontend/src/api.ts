/** Typed client for the laggard archive API.
 *
 * Requests are deduplicated and cached: the server is read-only over a
 * single archive, so any (method, path, body) triple is immutable.
 */

export interface ModifierMeta {
  name: string;
  kind: "continuous" | "categorical";
  min?: number;
  max?: number;
  levels?: number[];
}

export interface Meta {
  format_version: string;
  model_class: string;
  family: string;
  n: number;
  n_lags: number;
  n_retained: number;
  exposure_names: string[];
  interaction_mode: string;
  het: boolean;
  mixture: boolean;
  modifiers: ModifierMeta[];
}

export interface Curve {
  mean: number[];
  lower: number[];
  upper: number[];
}

export interface IndividualResponse {
  format_version: string;
  exposures: Record<string, Curve>;
}

export interface SubgroupEntry {
  n_rows: number;
  exposures: Record<string, Curve>;
}

export interface SubgroupResponse {
  format_version: string;
  subgroups: Record<string, SubgroupEntry>;
}

export interface PipsResponse {
  format_version: string;
  pips: Record<string, number>;
}

export interface SplitsResponse {
  format_version: string;
  modifier: string;
  kind: string;
  n_splits: number;
  proportions: Record<string, number>;
}

export interface GroupBySpec {
  modifier: string;
  levels?: number[];
  bins?: number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private cache = new Map<string, Promise<unknown>>();

  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  /** Number of distinct requests issued so far (cache misses). */
  requestCount = 0;

  private request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const key = `${method} ${path} ${body === undefined ? "" : JSON.stringify(body)}`;
    const hit = this.cache.get(key);
    if (hit) return hit as Promise<T>;
    this.requestCount += 1;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const promise = this.fetchFn(this.base + path, init).then(async (resp) => {
      const doc = (await resp.json()) as Record<string, unknown>;
      if (!resp.ok) {
        const message = typeof doc.error === "string" ? doc.error : `HTTP ${resp.status}`;
        throw new ApiError(resp.status, message);
      }
      return doc as T;
    });
    // failed requests are evicted so a retry can succeed
    this.cache.set(
      key,
      promise.catch((err) => {
        this.cache.delete(key);
        throw err;
      }),
    );
    return this.cache.get(key) as Promise<T>;
  }

  getMeta(): Promise<Meta> {
    return this.request("GET", "/api/meta");
  }

  getPips(): Promise<PipsResponse> {
    return this.request("GET", "/api/pips");
  }

  getSplits(modifier: string): Promise<SplitsResponse> {
    return this.request("GET", `/api/splits?modifier=${encodeURIComponent(modifier)}`);
  }

  postIndividual(modifiers: Record<string, number>, conf = 0.95): Promise<IndividualResponse> {
    return this.request("POST", "/api/individual", { modifiers, conf });
  }

  postSubgroup(groupBy: GroupBySpec[], conf = 0.95): Promise<SubgroupResponse> {
    return this.request("POST", "/api/subgroup", { group_by: groupBy, conf });
  }
}
