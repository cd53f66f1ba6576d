/**
 * Typed client for the collection service JSON API.
 *
 * Submissions retry with the byte-identical payload on network
 * failure; the server acknowledges an exact duplicate of an already
 * logged answer without writing a second record, so retries are safe.
 */

export interface TaskPayload {
  task_id: string;
  probe: string;
  grid: string[];
  k: number;
  instruction: string;
}

export interface DoneSignal {
  done: true;
}

export type NextResponse = TaskPayload | DoneSignal;

export interface SubmitBody {
  task_id: string;
  worker: string;
  selected: number[];
  elapsed_ms: number;
}

export class RejectedError extends Error {
  readonly code: string;
  constructor(code: string, detail: string) {
    super(detail || code);
    this.code = code;
  }
}

export function isDone(response: NextResponse): response is DoneSignal {
  return (response as DoneSignal).done === true;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  fetchFn?: FetchLike;
  /** attempts per submission, network failures only */
  maxRetries?: number;
  /** pause between retries, injectable for tests */
  wait?: (ms: number) => Promise<void>;
  retryDelayMs?: number;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ServiceClient {
  private readonly base: string;
  private readonly experimentId: string;
  private readonly worker: string;
  private readonly fetchFn: FetchLike;
  private readonly maxRetries: number;
  private readonly wait: (ms: number) => Promise<void>;
  private readonly retryDelayMs: number;

  constructor(base: string, experimentId: string, worker: string, options: ClientOptions = {}) {
    this.base = base.replace(/\/$/, "");
    this.experimentId = experimentId;
    this.worker = worker;
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.maxRetries = options.maxRetries ?? 5;
    this.wait = options.wait ?? sleep;
    this.retryDelayMs = options.retryDelayMs ?? 500;
  }

  async nextTask(): Promise<NextResponse> {
    const url = `${this.base}/experiments/${this.experimentId}/next?worker=${encodeURIComponent(this.worker)}`;
    const response = await this.fetchFn(url);
    if (!response.ok) {
      const body = await response.json().catch(() => ({}));
      throw new RejectedError(body.code ?? `http_${response.status}`, body.detail ?? "");
    }
    return (await response.json()) as NextResponse;
  }

  /**
   * Submit one answer. Network failures retry the identical payload;
   * HTTP rejections surface their machine-readable code verbatim.
   */
  async submit(taskId: string, selected: number[], elapsedMs: number): Promise<void> {
    const body: SubmitBody = {
      task_id: taskId,
      worker: this.worker,
      selected: [...selected].sort((a, b) => a - b),
      elapsed_ms: Math.round(elapsedMs),
    };
    const payload = JSON.stringify(body);
    const url = `${this.base}/experiments/${this.experimentId}/answers`;
    let lastError: unknown = null;
    for (let attempt = 0; attempt < this.maxRetries; attempt++) {
      if (attempt > 0) await this.wait(this.retryDelayMs);
      let response: Response;
      try {
        response = await this.fetchFn(url, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: payload,
        });
      } catch (err) {
        lastError = err; // network failure: retry the same payload
        continue;
      }
      if (response.ok) return;
      const detail = await response.json().catch(() => ({}));
      throw new RejectedError(detail.code ?? `http_${response.status}`, detail.detail ?? "");
    }
    throw lastError instanceof Error ? lastError : new Error("submission failed after retries");
  }
}
