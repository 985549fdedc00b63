import type { Clock } from './clock.js';
import type { LineAnnotationBody, TimedKeystroke, WorkItem } from './types.js';

export const BACKSPACE = '\b';

/**
 * Captures a timed line transcription. The timer starts when the item's
 * image has rendered, never when it was requested, so network latency
 * stays out of the measurements. Backspaces are kept in the event log
 * (they are part of the reading record) but removed from the final
 * transcription string.
 */
export class LineTypingSession {
  private readonly events: TimedKeystroke[] = [];
  private renderedAt: number | null = null;

  constructor(private readonly clock: Clock, readonly item: WorkItem) {}

  /** Call exactly when the image finished painting. */
  markImageRendered(): void {
    if (this.renderedAt === null) {
      this.renderedAt = this.clock.now();
    }
  }

  get rendered(): boolean {
    return this.renderedAt !== null;
  }

  private record(char: string): TimedKeystroke {
    if (this.renderedAt === null) {
      throw new Error('keystroke before the image rendered');
    }
    const tMs = this.clock.now() - this.renderedAt;
    const last = this.events[this.events.length - 1];
    if (last !== undefined && tMs < last.tMs) {
      throw new Error('keystroke times must be non-decreasing');
    }
    const stroke: TimedKeystroke = { char, tMs };
    this.events.push(stroke);
    return stroke;
  }

  keystroke(char: string): TimedKeystroke {
    if (char.length !== 1) {
      throw new Error(`expected a single character, got ${JSON.stringify(char)}`);
    }
    return this.record(char);
  }

  backspace(): TimedKeystroke {
    return this.record(BACKSPACE);
  }

  timeline(): readonly TimedKeystroke[] {
    return this.events;
  }

  /** Transcription with backspaces applied. */
  finalString(): string {
    const chars: string[] = [];
    for (const { char } of this.events) {
      if (char === BACKSPACE) {
        chars.pop();
      } else {
        chars.push(char);
      }
    }
    return chars.join('');
  }

  /** Last keystroke offset; the line's reaction time. */
  lineTimeMs(): number {
    const last = this.events[this.events.length - 1];
    return last === undefined ? 0 : last.tMs;
  }

  annotation(difficulty?: number): LineAnnotationBody {
    if (this.events.length === 0) {
      throw new Error('nothing was typed');
    }
    const body: LineAnnotationBody = {
      item_id: this.item.item_id,
      transcription: this.finalString(),
      keystroke_times_ms: this.events.map((e) => e.tMs),
      keystrokes: this.events.map((e): [string, number] => [e.char, e.tMs]),
    };
    if (difficulty !== undefined) {
      body.difficulty = difficulty;
    }
    return body;
  }
}
