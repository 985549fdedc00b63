import { describe, expect, it } from 'vitest';

import { RetryQueue, type PendingSubmission } from '../src/queue.js';
import type { LineAnnotationBody } from '../src/types.js';

function job(id: string): PendingSubmission {
  const body: LineAnnotationBody = {
    item_id: id,
    transcription: 'x',
    keystroke_times_ms: [10],
    keystrokes: [['x', 10]],
  };
  return { sessionId: 's', body };
}

describe('RetryQueue', () => {
  it('drains in order once the network is back', async () => {
    const queue = new RetryQueue();
    queue.enqueue(job('a'));
    queue.enqueue(job('b'));
    const sent: string[] = [];
    const flushed = await queue.flush(async (j) => {
      sent.push((j.body as LineAnnotationBody).item_id);
    });
    expect(flushed).toBe(2);
    expect(sent).toEqual(['a', 'b']);
    expect(queue.length).toBe(0);
  });

  it('stops at the first failure and keeps the remainder', async () => {
    const queue = new RetryQueue();
    queue.enqueue(job('a'));
    queue.enqueue(job('b'));
    let calls = 0;
    const flushed = await queue.flush(async () => {
      calls += 1;
      throw new Error('still offline');
    });
    expect(flushed).toBe(0);
    expect(calls).toBe(1); // serialized: no parallel blasting
    expect(queue.length).toBe(2);
  });

  it('partial drain keeps unsent jobs', async () => {
    const queue = new RetryQueue();
    queue.enqueue(job('a'));
    queue.enqueue(job('b'));
    queue.enqueue(job('c'));
    let n = 0;
    const flushed = await queue.flush(async () => {
      n += 1;
      if (n === 3) throw new Error('flaky');
    });
    expect(flushed).toBe(2);
    expect(queue.length).toBe(1);
  });
});
