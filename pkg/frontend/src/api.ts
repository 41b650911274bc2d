/** Typed client for the rating service's JSON contract. */

export interface BarEntry {
  feature: string;
  value: number | string | null;
  attribution: number;
  direction: -1 | 0 | 1;
}

export interface PatientRow {
  feature: string;
  value: number | string | null;
}

export interface TaskView {
  task_id: string;
  patient: PatientRow[];
  left: BarEntry[];
  right: BarEntry[];
  progress: { completed: number; total: number };
}

export interface DoneView {
  done: true;
  completed: number;
  total: number;
}

export type TaskPayload = TaskView | DoneView;

export interface Ack {
  ok: boolean;
  completed: number;
  total: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class MalformedPayloadError extends Error {}

export function isDone(payload: TaskPayload): payload is DoneView {
  return (payload as DoneView).done === true;
}

function checkEntry(e: unknown): BarEntry {
  const entry = e as BarEntry;
  if (
    typeof entry !== "object" ||
    entry === null ||
    typeof entry.feature !== "string" ||
    typeof entry.attribution !== "number" ||
    ![-1, 0, 1].includes(entry.direction)
  ) {
    throw new MalformedPayloadError("bar entry is missing fields");
  }
  return entry;
}

export function validateTaskPayload(body: unknown): TaskPayload {
  const obj = body as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null) {
    throw new MalformedPayloadError("payload is not an object");
  }
  if (obj.done === true) {
    if (typeof obj.completed !== "number" || typeof obj.total !== "number") {
      throw new MalformedPayloadError("done marker is missing counts");
    }
    return { done: true, completed: obj.completed, total: obj.total };
  }
  if (typeof obj.task_id !== "string" || !Array.isArray(obj.left) || !Array.isArray(obj.right)) {
    throw new MalformedPayloadError("task payload is missing fields");
  }
  const progress = obj.progress as { completed?: unknown; total?: unknown } | undefined;
  if (!progress || typeof progress.completed !== "number" || typeof progress.total !== "number") {
    throw new MalformedPayloadError("task payload is missing progress");
  }
  if (!Array.isArray(obj.patient)) {
    throw new MalformedPayloadError("task payload is missing the patient table");
  }
  return {
    task_id: obj.task_id,
    patient: obj.patient as PatientRow[],
    left: obj.left.map(checkEntry),
    right: obj.right.map(checkEntry),
    progress: { completed: progress.completed, total: progress.total },
  };
}

export class RatingApi {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private headers(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}`, "Content-Type": "application/json" };
  }

  async getTask(): Promise<TaskPayload> {
    const res = await fetch(`${this.baseUrl}/task`, { headers: this.headers() });
    if (!res.ok) {
      throw new ApiError(res.status, `task fetch failed (${res.status})`);
    }
    return validateTaskPayload(await res.json());
  }

  async postResponse(taskId: string, choice: "left" | "right", confidence: number): Promise<Ack> {
    const res = await fetch(`${this.baseUrl}/response`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ task_id: taskId, choice, confidence }),
    });
    if (!res.ok) {
      throw new ApiError(res.status, `response rejected (${res.status})`);
    }
    return (await res.json()) as Ack;
  }
}
