import type { FetchLike } from "../src/api.js";

export interface RecordedCall {
  url: string;
  path: string;
  params: URLSearchParams;
  method: string;
  body: unknown;
}

export type RouteHandler = (call: RecordedCall) => Response | unknown;

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/**
 * Builds a fetch stub from (path regex, handler) pairs and records every
 * call. Handlers may return a Response directly or a plain value to wrap
 * as 200 JSON.
 */
export function makeFetch(
  routes: Array<[RegExp, RouteHandler]>,
  log: RecordedCall[],
): FetchLike {
  return async (input, init) => {
    const url = new URL(input, "http://testhost");
    const rawBody = init?.body;
    const call: RecordedCall = {
      url: input,
      path: url.pathname,
      params: url.searchParams,
      method: init?.method ?? "GET",
      body: typeof rawBody === "string" ? JSON.parse(rawBody) : undefined,
    };
    log.push(call);
    for (const [pattern, handler] of routes) {
      if (pattern.test(url.pathname)) {
        const result = await handler(call);
        return result instanceof Response ? result : jsonResponse(result);
      }
    }
    return jsonResponse({ code: "NotFound", message: `no route for ${input}` }, 404);
  };
}

export function calls(log: RecordedCall[], pattern: RegExp): RecordedCall[] {
  return log.filter((c) => pattern.test(c.path));
}

export function deferred<T>(): { promise: Promise<T>; resolve: (value: T) => void } {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}
