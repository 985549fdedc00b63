import type { AnnotationBody, TaskKind, WorkItem } from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(`HTTP ${status}: ${message}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client for the annotation service. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<Response> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status >= 400) {
      let detail = response.statusText;
      try {
        detail = ((await response.json()) as { error?: string }).error ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async createSession(annotatorId: string, task: TaskKind): Promise<string> {
    const response = await this.request('POST', '/sessions', {
      annotator_id: annotatorId,
      task,
    });
    return ((await response.json()) as { session_id: string }).session_id;
  }

  /** Next pending item, or null when the queue is drained (204). */
  async nextItem(sessionId: string): Promise<WorkItem | null> {
    const response = await this.request('GET', `/sessions/${sessionId}/next`);
    if (response.status === 204) {
      return null;
    }
    return (await response.json()) as WorkItem;
  }

  /** Returns the HTTP status (201 stored, 200 replaced). */
  async submitAnnotation(sessionId: string, body: AnnotationBody): Promise<number> {
    const response = await this.request('POST', `/sessions/${sessionId}/annotations`, body);
    return response.status;
  }

  imageUrl(item: WorkItem): string {
    return this.baseUrl + item.image_url;
  }
}
