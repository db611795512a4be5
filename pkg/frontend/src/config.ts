/**
 * The single configuration point: the base URL of the swarmhub service.
 *
 * Resolution order: explicit setBaseUrl() (used by tests and embedders),
 * a <meta name="swarmhub-base-url"> tag, then same-origin.
 */

let overrideUrl: string | null = null;

export function setBaseUrl(url: string): void {
  overrideUrl = url.replace(/\/+$/, "");
}

export function baseUrl(): string {
  if (overrideUrl !== null) return overrideUrl;
  if (typeof document !== "undefined") {
    const meta = document.querySelector('meta[name="swarmhub-base-url"]');
    const content = meta?.getAttribute("content");
    if (content) return content.replace(/\/+$/, "");
  }
  return "";
}
