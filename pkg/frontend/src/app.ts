/** Rating session state machine and DOM rendering.
 *
 * Exactly one task is active at a time and submitting it is the only
 * forward transition; the server is authoritative, so reloading the page
 * re-fetches the same task until a response is accepted.
 */

import { ApiError, isDone, MalformedPayloadError, RatingApi, TaskView } from "./api.js";
import { renderBarPlot, sharedScale } from "./barplot.js";

type Screen =
  | { kind: "loading" }
  | { kind: "task"; view: TaskView; notice?: string; submitError?: string }
  | { kind: "done"; completed: number; total: number }
  | { kind: "error"; message: string };

export class App {
  private screen: Screen = { kind: "loading" };
  private choice: "left" | "right" | null = null;
  private confidence: number | null = null;
  private submitting = false;

  constructor(
    private readonly api: RatingApi,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    await this.loadTask();
  }

  private async loadTask(): Promise<void> {
    this.screen = { kind: "loading" };
    this.render();
    try {
      const payload = await this.api.getTask();
      if (isDone(payload)) {
        this.screen = { kind: "done", completed: payload.completed, total: payload.total };
      } else {
        this.screen = { kind: "task", view: payload };
        this.choice = null;
        this.confidence = null;
      }
    } catch (err) {
      this.screen = {
        kind: "error",
        message: err instanceof MalformedPayloadError ? `malformed task payload: ${err.message}` : String(err),
      };
    }
    this.render();
  }

  private async submit(): Promise<void> {
    if (this.screen.kind !== "task" || this.submitting) return;
    if (this.choice === null || this.confidence === null) return;
    this.submitting = true;
    this.render();
    try {
      await this.api.postResponse(this.screen.view.task_id, this.choice, this.confidence);
      this.submitting = false;
      await this.loadTask();
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError && err.status === 409) {
        // already answered (double click, stale tab): show the notice, then
        // fall forward to the server's idea of the current task
        this.screen = { ...this.screen, notice: "This task was already answered; loading the next one." };
        this.render();
        await this.loadTask();
        return;
      }
      // keep the task and the selections; offer a retry that re-submits once
      this.screen = { ...this.screen, submitError: `Submission failed: ${String(err)}` };
      this.render();
    }
  }

  private render(): void {
    this.root.textContent = "";
    switch (this.screen.kind) {
      case "loading":
        this.root.appendChild(el("p", { class: "status" }, "Loading task..."));
        return;
      case "done":
        this.renderDone(this.screen.completed, this.screen.total);
        return;
      case "error":
        this.renderError(this.screen.message);
        return;
      case "task":
        this.renderTask(this.screen.view, this.screen.notice, this.screen.submitError);
        return;
    }
  }

  private renderDone(completed: number, total: number): void {
    const panel = el("div", { class: "panel done-screen" });
    panel.appendChild(el("h2", {}, "All tasks complete"));
    panel.appendChild(el("p", {}, `You answered ${completed} of ${total} tasks. Thank you!`));
    this.root.appendChild(panel);
  }

  private renderError(message: string): void {
    const panel = el("div", { class: "panel error-panel" });
    panel.appendChild(el("h2", {}, "Something went wrong"));
    panel.appendChild(el("p", { class: "error-message" }, message));
    const button = el("button", { class: "retry", type: "button" }, "Retry") as HTMLButtonElement;
    button.addEventListener("click", () => {
      void this.loadTask();
    });
    panel.appendChild(button);
    this.root.appendChild(panel);
  }

  private renderTask(view: TaskView, notice?: string, submitError?: string): void {
    const { completed, total } = view.progress;
    const header = el("header", { class: "task-header" });
    header.appendChild(el("h2", {}, `Task ${completed + 1} of ${total}`));
    header.appendChild(
      el(
        "p",
        { class: "instructions" },
        "Two AI predictions for the same patient. Pick the one you believe is better.",
      ),
    );
    header.appendChild(
      el("a", { class: "feature-help", href: "/static/features.html", target: "_blank" }, "Feature explanations"),
    );
    this.root.appendChild(header);

    if (notice) {
      this.root.appendChild(el("p", { class: "notice" }, notice));
    }
    if (submitError) {
      const banner = el("div", { class: "error-panel submit-error" });
      banner.appendChild(el("p", { class: "error-message" }, submitError));
      const retry = el("button", { class: "retry", type: "button" }, "Retry submission") as HTMLButtonElement;
      retry.addEventListener("click", () => void this.submit());
      banner.appendChild(retry);
      this.root.appendChild(banner);
    }

    const table = el("table", { class: "patient-table" });
    const head = el("tr", {});
    head.appendChild(el("th", {}, "Feature"));
    head.appendChild(el("th", {}, "Value"));
    table.appendChild(head);
    for (const row of view.patient) {
      const tr = el("tr", {});
      tr.appendChild(el("td", {}, row.feature));
      tr.appendChild(el("td", {}, row.value === null ? "missing" : String(row.value)));
      table.appendChild(tr);
    }
    this.root.appendChild(table);

    const scale = sharedScale(view.left, view.right);
    const plots = el("div", { class: "plot-row" });
    for (const side of ["left", "right"] as const) {
      const cell = el("figure", { class: `plot-cell plot-${side}` });
      cell.appendChild(renderBarPlot(view[side], scale, side.toUpperCase()));
      plots.appendChild(cell);
    }
    this.root.appendChild(plots);

    this.root.appendChild(this.renderForm());
  }

  private renderForm(): HTMLElement {
    const form = el("form", { class: "response-form" });
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });

    const choiceSet = el("fieldset", { class: "choice-set" });
    choiceSet.appendChild(el("legend", {}, "Which prediction is better?"));
    for (const side of ["left", "right"] as const) {
      const label = el("label", { class: "choice-option" });
      const radio = el("input", {
        type: "radio",
        name: "choice",
        value: side,
      }) as HTMLInputElement;
      radio.checked = this.choice === side;
      radio.addEventListener("change", () => {
        this.choice = side;
        this.syncSubmitState(form);
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(side.toUpperCase()));
      choiceSet.appendChild(label);
    }
    form.appendChild(choiceSet);

    const confSet = el("fieldset", { class: "confidence-set" });
    confSet.appendChild(el("legend", {}, "Confidence (1 = low, 5 = high)"));
    for (let level = 1; level <= 5; level += 1) {
      const label = el("label", { class: "confidence-option" });
      const radio = el("input", {
        type: "radio",
        name: "confidence",
        value: String(level),
      }) as HTMLInputElement;
      radio.checked = this.confidence === level;
      radio.addEventListener("change", () => {
        this.confidence = level;
        this.syncSubmitState(form);
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(String(level)));
      confSet.appendChild(label);
    }
    form.appendChild(confSet);

    const submit = el("button", { class: "submit", type: "submit" }, "Submit") as HTMLButtonElement;
    form.appendChild(submit);
    this.syncSubmitState(form);
    return form;
  }

  private syncSubmitState(form: HTMLElement): void {
    const submit = form.querySelector("button.submit") as HTMLButtonElement | null;
    if (submit) {
      submit.disabled = this.choice === null || this.confidence === null || this.submitting;
    }
  }
}

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}
