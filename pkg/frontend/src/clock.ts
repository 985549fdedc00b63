/** Monotonic time source. All psychophysical timings use this; wall-clock
 * time is only ever attached server-side for auditing. */
export interface Clock {
  /** Milliseconds from an arbitrary but monotonic origin. */
  now(): number;
}

/** High-resolution monotonic clock (browser and node). */
export class SystemClock implements Clock {
  now(): number {
    return performance.now();
  }
}

/** Hand-advanced clock for scripted tests. */
export class ManualClock implements Clock {
  private t = 0;

  now(): number {
    return this.t;
  }

  advanceTo(ms: number): void {
    if (ms < this.t) {
      throw new Error(`clock cannot run backwards (${ms} < ${this.t})`);
    }
    this.t = ms;
  }

  advanceBy(ms: number): void {
    this.advanceTo(this.t + ms);
  }
}
