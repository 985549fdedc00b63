import type { AnnotationBody } from './types.js';

export interface PendingSubmission {
  sessionId: string;
  body: AnnotationBody;
}

/**
 * Holds submissions that failed to reach the service (offline, 5xx) and
 * replays them strictly in order, one at a time. A failure mid-flush
 * stops the drain and keeps the remainder queued for the next attempt.
 */
export class RetryQueue {
  private readonly jobs: PendingSubmission[] = [];
  private flushing = false;

  get length(): number {
    return this.jobs.length;
  }

  enqueue(job: PendingSubmission): void {
    this.jobs.push(job);
  }

  /** Returns how many submissions went through. */
  async flush(send: (job: PendingSubmission) => Promise<void>): Promise<number> {
    if (this.flushing) {
      return 0; // a drain is already running; retries stay serialized
    }
    this.flushing = true;
    let sent = 0;
    try {
      while (this.jobs.length > 0) {
        try {
          await send(this.jobs[0]!);
        } catch {
          break;
        }
        this.jobs.shift();
        sent += 1;
      }
    } finally {
      this.flushing = false;
    }
    return sent;
  }
}
