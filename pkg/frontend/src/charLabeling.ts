import type { Clock } from './clock.js';
import type { CharAnnotationBody, CharTrial, WorkItem } from './types.js';

/**
 * One single-character labeling trial: the reader picks the best label
 * from the server's predefined option list and rates how hard the
 * character was to read (1 easy .. 5 hard). Reaction time runs from
 * image paint to the (last) label click. Submission is blocked until
 * both a label and a difficulty rating exist.
 */
export class CharTrialSession {
  readonly options: readonly string[];
  private renderedAt: number | null = null;
  private chosenLabel: string | null = null;
  private reactionMs: number | null = null;
  private difficulty: number | null = null;

  constructor(private readonly clock: Clock, readonly item: WorkItem) {
    this.options = item.char_options ?? [];
  }

  markImageRendered(): void {
    if (this.renderedAt === null) {
      this.renderedAt = this.clock.now();
    }
  }

  choose(label: string): void {
    if (this.renderedAt === null) {
      throw new Error('label click before the image rendered');
    }
    if (!this.options.includes(label)) {
      throw new Error(`label ${JSON.stringify(label)} is not among the options`);
    }
    this.chosenLabel = label;
    this.reactionMs = this.clock.now() - this.renderedAt;
  }

  rateDifficulty(value: number): void {
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error('difficulty must be an integer from 1 to 5');
    }
    this.difficulty = value;
  }

  /** Human-readable reasons the trial cannot be submitted yet. */
  blockers(): string[] {
    const out: string[] = [];
    if (this.chosenLabel === null) {
      out.push('pick a label');
    }
    if (this.difficulty === null) {
      out.push('rate the difficulty');
    }
    return out;
  }

  get submittable(): boolean {
    return this.blockers().length === 0;
  }

  trial(): CharTrial {
    const blockers = this.blockers();
    if (blockers.length > 0) {
      throw new Error(`trial incomplete: ${blockers.join(', ')}`);
    }
    return {
      itemId: this.item.item_id,
      chosenLabel: this.chosenLabel!,
      reactionMs: this.reactionMs!,
      difficulty: this.difficulty!,
    };
  }

  annotation(): CharAnnotationBody {
    const t = this.trial();
    return {
      item_id: t.itemId,
      label: t.chosenLabel,
      reaction_ms: t.reactionMs,
      difficulty: t.difficulty,
    };
  }
}
