/**
 * One in-flight mutation per view: while a request is pending, further
 * attempts from the same view are dropped instead of queued.
 */
export class MutationGate {
  private busy = false;

  get inFlight(): boolean {
    return this.busy;
  }

  async run<T>(fn: () => Promise<T>): Promise<T | undefined> {
    if (this.busy) {
      return undefined;
    }
    this.busy = true;
    try {
      return await fn();
    } finally {
      this.busy = false;
    }
  }
}
