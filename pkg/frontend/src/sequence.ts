/**
 * Monotonic request sequencing: rapid-fire edits fire overlapping requests,
 * and only the response belonging to the most recently issued request may
 * touch the screen. Responses that arrive after a newer request was issued
 * resolve to `stale` instead.
 */
export class RequestGate {
  private seq = 0;

  /** Issue a new token, invalidating every outstanding one. */
  issue(): number {
    return ++this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }

  /**
   * Run `work` under a fresh token. Resolves `{ stale: true }` when a newer
   * token was issued before the work settled; rejections from stale work are
   * swallowed the same way, since the screen no longer cares.
   */
  async run<T>(work: () => Promise<T>): Promise<{ stale: true } | { stale: false; value: T }> {
    const token = this.issue();
    try {
      const value = await work();
      if (!this.isCurrent(token)) return { stale: true };
      return { stale: false, value };
    } catch (err) {
      if (!this.isCurrent(token)) return { stale: true };
      throw err;
    }
  }
}
