import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type Meta, type PipsResponse } from "../src/api.js";
import { loadFixture, mockFetch, type Route } from "./helpers.js";

const ROUTES: Route[] = [
  { method: "GET", url: "/api/meta", fixture: "meta" },
  { method: "GET", url: "/api/pips", fixture: "pips" },
  { method: "GET", url: "/api/splits?modifier=age", fixture: "splits_age" },
  { method: "GET", url: "/api/splits?modifier=sex", fixture: "splits_sex" },
  { method: "GET", url: "/api/splits?modifier=bmi", fixture: "splits_unknown" },
  {
    method: "POST",
    url: "/api/individual",
    fixture: "individual",
    matchBody: (b) => "sex" in ((b as { modifiers: object }).modifiers ?? {}),
  },
  {
    method: "POST",
    url: "/api/individual",
    fixture: "individual_bad",
    matchBody: (b) => !("sex" in ((b as { modifiers: object }).modifiers ?? {})),
  },
  { method: "POST", url: "/api/subgroup", fixture: "subgroup_sex" },
];

function client(log: string[] = []): ApiClient {
  return new ApiClient("", mockFetch(ROUTES, log));
}

describe("ApiClient", () => {
  it("returns payloads exactly as served", async () => {
    const api = client();
    const meta = (await api.getMeta()) as Meta;
    expect(meta).toEqual(loadFixture("meta").body);
    const pips = (await api.getPips()) as PipsResponse;
    expect(pips).toEqual(loadFixture("pips").body);
  });

  it("deduplicates concurrent requests for the same key", async () => {
    const log: string[] = [];
    const api = client(log);
    const [a, b, c] = await Promise.all([api.getPips(), api.getPips(), api.getPips()]);
    expect(a).toEqual(b);
    expect(b).toEqual(c);
    expect(api.requestCount).toBe(1);
    expect(log).toEqual(["GET /api/pips"]);
  });

  it("caches across sequential calls but distinguishes keys", async () => {
    const api = client();
    await api.getSplits("age");
    await api.getSplits("age");
    await api.getSplits("sex");
    expect(api.requestCount).toBe(2);
  });

  it("distinguishes POST bodies in the cache key", async () => {
    const api = client();
    await api.postIndividual({ age: 40, sex: 1 });
    await api.postIndividual({ age: 40, sex: 1 });
    await api.postIndividual({ age: 55, sex: 1 });
    expect(api.requestCount).toBe(2);
  });

  it("raises ApiError carrying the server's status and message", async () => {
    const api = client();
    const err = await api.getSplits("bmi").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).message).toBe("unknown modifier 'bmi'");
  });

  it("reports the server's validation message for bad POST bodies", async () => {
    const api = client();
    const err = await api.postIndividual({ age: 40 }).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).message).toBe("missing modifier value for 'sex'");
  });

  it("evicts failed requests so a retry hits the network again", async () => {
    const api = client();
    await api.getSplits("bmi").catch(() => undefined);
    await api.getSplits("bmi").catch(() => undefined);
    expect(api.requestCount).toBe(2);
  });
});
