/**
 * The annotation screen: probe on the left, grid on the right, a
 * counter, and a submit control gated on exactly-k selection.
 *
 * Flow per screen: fetch task -> preload all images -> render and
 * stamp the clock -> user toggles cells (clicks or number keys) ->
 * submit (button or Enter) posts elapsed time measured from the
 * render stamp. The next task is fetched and preloaded before its
 * clock starts, so load latency never inflates elapsed_ms.
 */

import { isDone, RejectedError, ServiceClient, TaskPayload } from "./api.js";
import { Preloader, preloadImages } from "./preload.js";
import { SelectionState } from "./selection.js";

export interface AppOptions {
  now?: () => number;
  preload?: Preloader;
  document?: Document;
}

export class AnnotationApp {
  private readonly client: ServiceClient;
  private readonly root: HTMLElement;
  private readonly now: () => number;
  private readonly preload: Preloader;
  private readonly doc: Document;

  private selection: SelectionState | null = null;
  private task: TaskPayload | null = null;
  private renderStartedAt = 0;
  private screensAnswered = 0;
  private submitting = false;

  constructor(root: HTMLElement, client: ServiceClient, options: AppOptions = {}) {
    this.root = root;
    this.client = client;
    this.now = options.now ?? (() => performance.now());
    this.preload = options.preload ?? preloadImages;
    this.doc = options.document ?? root.ownerDocument;
    this.doc.addEventListener("keydown", (event) => this.onKey(event as KeyboardEvent));
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Fetch, preload, then render the next task (or the completion screen). */
  private async advance(): Promise<void> {
    const next = await this.client.nextTask();
    if (isDone(next)) {
      this.renderDone();
      return;
    }
    await this.preload([next.probe, ...next.grid]);
    this.task = next;
    this.selection = new SelectionState(next.k, next.grid.length);
    this.renderTask(next);
    this.renderStartedAt = this.now();
  }

  private renderTask(task: TaskPayload): void {
    this.root.innerHTML = "";
    const header = this.el("div", "header");
    header.append(
      this.el("span", "instruction", task.instruction),
      this.el("span", "counter", `answered: ${this.screensAnswered}`)
    );

    const probe = this.el("img", "probe") as HTMLImageElement;
    probe.src = task.probe;
    probe.alt = "probe";

    const grid = this.el("div", "grid");
    task.grid.forEach((url, position) => {
      const cell = this.el("button", "cell") as HTMLButtonElement;
      cell.dataset.position = String(position);
      const img = this.el("img") as HTMLImageElement;
      img.src = url;
      img.alt = `grid item ${position}`;
      cell.append(img);
      cell.addEventListener("click", () => this.toggle(position));
      grid.append(cell);
    });

    const feedback = this.el("div", "feedback");
    feedback.setAttribute("role", "status");

    const submit = this.el("button", "submit", "Submit") as HTMLButtonElement;
    submit.disabled = true;
    submit.addEventListener("click", () => void this.submit());

    this.root.append(header, this.el("div", "screen", undefined, [probe, grid]), feedback, submit);
  }

  private renderDone(): void {
    this.task = null;
    this.selection = null;
    this.root.innerHTML = "";
    this.root.append(
      this.el("div", "done", `All done. Screens answered: ${this.screensAnswered}`)
    );
  }

  private toggle(position: number): void {
    if (!this.selection || !this.task) return;
    const result = this.selection.toggle(position);
    const feedback = this.root.querySelector<HTMLElement>(".feedback");
    if (feedback) {
      feedback.textContent = result.accepted
        ? ""
        : `Only ${this.task.k} selections allowed; deselect one first.`;
    }
    this.root.querySelectorAll<HTMLButtonElement>(".cell").forEach((cell) => {
      const pos = Number(cell.dataset.position);
      cell.classList.toggle("selected", this.selection!.isSelected(pos));
    });
    const submit = this.root.querySelector<HTMLButtonElement>(".submit");
    if (submit) submit.disabled = !result.submittable;
  }

  private async submit(): Promise<void> {
    if (!this.selection || !this.task || !this.selection.submittable || this.submitting) {
      return;
    }
    this.submitting = true;
    const elapsed = this.now() - this.renderStartedAt;
    try {
      await this.client.submit(this.task.task_id, [...this.selection.selected], elapsed);
      this.screensAnswered += 1;
      await this.advance();
    } catch (err) {
      const feedback = this.root.querySelector<HTMLElement>(".feedback");
      if (feedback) {
        feedback.textContent = err instanceof RejectedError ? err.code : String(err);
      }
    } finally {
      this.submitting = false;
    }
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.task) return;
    if (event.key === "Enter") {
      void this.submit();
      return;
    }
    // number keys toggle grid cells: 1..9 then 0 for position 9,
    // shifted row beyond that is out of keyboard reach by design
    if (/^[0-9]$/.test(event.key)) {
      const position = event.key === "0" ? 9 : Number(event.key) - 1;
      if (position < this.task.grid.length) this.toggle(position);
    }
  }

  private el(tag: string, className?: string, text?: string, children?: Element[]): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    if (children) node.append(...children);
    return node;
  }
}
