/** Shared test plumbing: load recorded fixtures and build a mock fetch
 * that serves them, so the client is tested against real server payloads. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export interface Fixture {
  status: number;
  body: Record<string, unknown>;
}

export function loadFixture(name: string): Fixture {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.json`), "utf8")) as Fixture;
}

/** Route table: (method, url) -> fixture name; bodies are matched for
 * POSTs by a predicate so a route can distinguish valid/invalid payloads. */
export interface Route {
  method: string;
  url: string;
  fixture: string;
  matchBody?: (body: unknown) => boolean;
}

export function mockFetch(routes: Route[], log: string[] = []) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    log.push(`${method} ${url}`);
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    const route = routes.find(
      (r) => r.method === method && r.url === url && (!r.matchBody || r.matchBody(body)),
    );
    if (!route) throw new Error(`no route for ${method} ${url} ${init?.body ?? ""}`);
    const fx = loadFixture(route.fixture);
    return new Response(JSON.stringify(fx.body), {
      status: fx.status,
      headers: { "content-type": "application/json" },
    });
  };
}
