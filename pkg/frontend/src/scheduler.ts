import type { WhatIfPayload, WhatIfResponse } from "./types.js";

/**
 * Debounced what-if dispatch with at most one request in flight.
 *
 * Rapid toggles collapse into one request after `delayMs` of quiet. If a
 * newer payload arrives while a request is pending, the pending response
 * is discarded and the newer payload fires next: the panel only ever shows
 * the answer to the latest grid state.
 */
export class WhatIfScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private queued: WhatIfPayload | null = null;

  constructor(
    private readonly post: (payload: WhatIfPayload) => Promise<WhatIfResponse>,
    private readonly onResult: (response: WhatIfResponse) => void,
    private readonly onError: (error: unknown) => void,
    private readonly delayMs: number = 250,
  ) {}

  request(payload: WhatIfPayload): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.dispatch(payload);
    }, this.delayMs);
  }

  private dispatch(payload: WhatIfPayload): void {
    if (this.inFlight) {
      this.queued = payload;
      return;
    }
    void this.fire(payload);
  }

  private async fire(payload: WhatIfPayload): Promise<void> {
    this.inFlight = true;
    try {
      const response = await this.post(payload);
      if (this.queued === null) this.onResult(response);
    } catch (error) {
      if (this.queued === null) this.onError(error);
    } finally {
      this.inFlight = false;
      const next = this.queued;
      this.queued = null;
      if (next !== null) void this.fire(next);
    }
  }
}
