/** Stale-data detection for the poll loop.
 *
 * The dashboard shows a banner when the last successfully fetched payload is
 * older than three poll intervals; a fetch failure never blanks the panels,
 * it only lets the banner appear.
 */

export const DEFAULT_POLL_INTERVAL_MS = 2000;
export const STALE_AFTER_INTERVALS = 3;

export interface FreshnessState {
  lastSuccessAt: number | null; // epoch ms
  pollIntervalMs: number;
}

export function initialFreshness(pollIntervalMs = DEFAULT_POLL_INTERVAL_MS): FreshnessState {
  return { lastSuccessAt: null, pollIntervalMs };
}

export function markSuccess(state: FreshnessState, now: number): FreshnessState {
  return { ...state, lastSuccessAt: now };
}

export function isStale(state: FreshnessState, now: number): boolean {
  if (state.lastSuccessAt === null) return false; // nothing fetched yet
  return now - state.lastSuccessAt > STALE_AFTER_INTERVALS * state.pollIntervalMs;
}
