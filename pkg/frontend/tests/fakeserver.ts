/**
 * In-memory stand-in for the collection service, mirroring its
 * semantics: sequential task assignment idempotent until answered, and
 * idempotent acknowledgement of byte-identical duplicate submissions
 * (at most one stored record per task).
 */

import type { FetchLike, SubmitBody, TaskPayload } from "../src/api.js";

const json = (body: unknown, status = 200): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });

export class FakeServer {
  readonly tasks: TaskPayload[];
  readonly records = new Map<string, SubmitBody>();
  /** when > 0, that many upcoming POSTs store the record but fail on the wire */
  dropResponses = 0;
  private cursor = 0;

  constructor(tasks: TaskPayload[]) {
    this.tasks = tasks;
  }

  get fetchFn(): FetchLike {
    return async (url, init) => {
      if (url.includes("/next")) {
        while (this.cursor < this.tasks.length) {
          const task = this.tasks[this.cursor]!;
          if (!this.records.has(task.task_id)) return json(task);
          this.cursor += 1;
        }
        return json({ done: true });
      }
      if (url.includes("/answers")) {
        const body = JSON.parse(String(init?.body)) as SubmitBody;
        const existing = this.records.get(body.task_id);
        if (existing) {
          if (JSON.stringify(existing) === JSON.stringify(body)) {
            return json({ ok: true, task_id: body.task_id });
          }
          return json({ code: "already_answered", detail: "conflict" }, 409);
        }
        if (body.selected.length !== this.taskById(body.task_id).k) {
          return json({ code: "wrong_selection_count", detail: "" }, 409);
        }
        this.records.set(body.task_id, body);
        if (this.dropResponses > 0) {
          this.dropResponses -= 1;
          throw new TypeError("network error: response lost");
        }
        return json({ ok: true, task_id: body.task_id });
      }
      return json({ code: "unknown_route", detail: url }, 404);
    };
  }

  private taskById(taskId: string): TaskPayload {
    const task = this.tasks.find((t) => t.task_id === taskId);
    if (!task) throw new Error(`no such task ${taskId}`);
    return task;
  }
}

export function makeTasks(count: number, k = 2, gridSize = 4): TaskPayload[] {
  return Array.from({ length: count }, (_, i) => ({
    task_id: `t${i}`,
    probe: `/assets/probe${i}.jpg`,
    grid: Array.from({ length: gridSize }, (_, g) => `/assets/g${i}-${g}.jpg`),
    k,
    instruction: "Select the images most similar to the probe.",
  }));
}
