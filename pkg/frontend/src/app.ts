/** Browser entry: one active item per tab, task picked at the top. */

import { ApiClient, ApiError } from './api.js';
import { CharTrialSession } from './charLabeling.js';
import { SystemClock } from './clock.js';
import { LineTypingSession } from './lineTyping.js';
import { RetryQueue } from './queue.js';
import type { TaskKind, WorkItem } from './types.js';

const clock = new SystemClock();
const api = new ApiClient('');
const retries = new RetryQueue();

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
};

const status = (text: string): void => {
  el<HTMLElement>('status').textContent = text;
};

async function submitWithRetry(sessionId: string, body: Parameters<ApiClient['submitAnnotation']>[1]): Promise<void> {
  try {
    await api.submitAnnotation(sessionId, body);
  } catch (err) {
    if (err instanceof ApiError) throw err; // validation problem, surface it
    retries.enqueue({ sessionId, body });
    status(`offline: ${retries.length} submission(s) queued`);
    return;
  }
  const flushed = await retries.flush(async (job) => {
    await api.submitAnnotation(job.sessionId, job.body);
  });
  if (flushed > 0) status(`flushed ${flushed} queued submission(s)`);
}

function showImage(item: WorkItem, onRendered: () => void): void {
  const image = el<HTMLImageElement>('line-image');
  image.onload = () => onRendered(); // the timer starts at paint
  image.src = api.imageUrl(item);
}

async function runLineTyping(sessionId: string): Promise<void> {
  const item = await api.nextItem(sessionId);
  if (item === null) {
    status('queue drained, thank you');
    return;
  }
  const session = new LineTypingSession(clock, item);
  showImage(item, () => session.markImageRendered());
  const input = el<HTMLInputElement>('line-input');
  input.value = '';
  input.focus();
  const onKey = (event: KeyboardEvent): void => {
    if (!session.rendered) return;
    if (event.key === 'Backspace') session.backspace();
    else if (event.key.length === 1) session.keystroke(event.key);
  };
  input.addEventListener('keydown', onKey);
  el<HTMLButtonElement>('line-submit').onclick = async () => {
    input.removeEventListener('keydown', onKey);
    await submitWithRetry(sessionId, session.annotation());
    status(`stored "${session.finalString()}" (${session.lineTimeMs().toFixed(0)} ms)`);
    void runLineTyping(sessionId);
  };
}

async function runCharLabeling(sessionId: string): Promise<void> {
  const item = await api.nextItem(sessionId);
  if (item === null) {
    status('queue drained, thank you');
    return;
  }
  const session = new CharTrialSession(clock, item);
  showImage(item, () => session.markImageRendered());
  const optionsBox = el<HTMLElement>('char-options');
  optionsBox.textContent = '';
  for (const label of session.options) {
    const button = document.createElement('button');
    button.textContent = label === ' ' ? 'space' : label;
    button.onclick = () => {
      session.choose(label);
      status(`picked "${label}"`);
    };
    optionsBox.appendChild(button);
  }
  for (const radio of document.querySelectorAll<HTMLInputElement>('input[name=difficulty]')) {
    radio.checked = false;
    radio.onchange = () => session.rateDifficulty(Number(radio.value));
  }
  el<HTMLButtonElement>('char-submit').onclick = async () => {
    if (!session.submittable) {
      status(`cannot submit: ${session.blockers().join(' and ')}`);
      return;
    }
    await submitWithRetry(sessionId, session.annotation());
    status('trial stored');
    void runCharLabeling(sessionId);
  };
}

async function start(task: TaskKind): Promise<void> {
  const annotator = el<HTMLInputElement>('annotator').value || 'anonymous';
  const sessionId = await api.createSession(annotator, task);
  el<HTMLElement>('line-view').hidden = task !== 'line_typing';
  el<HTMLElement>('char-view').hidden = task !== 'char_labeling';
  if (task === 'line_typing') await runLineTyping(sessionId);
  else await runCharLabeling(sessionId);
}

el<HTMLButtonElement>('start-line').onclick = () => void start('line_typing');
el<HTMLButtonElement>('start-char').onclick = () => void start('char_labeling');
