/** Shared wire and domain types for the annotator UI. */

/** One keypress, timed from the moment the item's image rendered. */
export interface TimedKeystroke {
  char: string;
  tMs: number;
}

/** A completed single-character labeling trial. */
export interface CharTrial {
  itemId: string;
  chosenLabel: string;
  reactionMs: number;
  difficulty: number;
}

export type TaskKind = 'line_typing' | 'char_labeling';

/** Item payload from GET /sessions/{id}/next. */
export interface WorkItem {
  item_id: string;
  image_url: string;
  char_options?: string[];
}

export interface LineAnnotationBody {
  item_id: string;
  transcription: string;
  keystroke_times_ms: number[];
  keystrokes: [string, number][];
  difficulty?: number;
}

export interface CharAnnotationBody {
  item_id: string;
  label: string;
  reaction_ms: number;
  difficulty?: number;
}

export type AnnotationBody = LineAnnotationBody | CharAnnotationBody;
