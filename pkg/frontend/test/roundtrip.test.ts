// @vitest-environment jsdom
//
// Live round trip: a scripted session in the DOM drives the real rating
// service over HTTP, then the exported log is joined back to the tasks and
// the analysis subcommand must reproduce this session's summary exactly.
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RatingApi } from "../src/api.js";
import { App } from "../src/app.js";

const PY = process.env.PYTHON ?? "python3";
const PORT = 8787 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let workDir: string;
let storeDir: string;
let tokens: { raters: Record<string, string>; admin: string };
let server: ChildProcess;

async function waitForHealth(): Promise<void> {
  for (let i = 0; i < 100; i += 1) {
    try {
      const res = await fetch(`${BASE}/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "ui-roundtrip-"));
  storeDir = join(workDir, "store");
  const made = spawnSync(PY, [join(__dirname, "make_store.py"), storeDir], { encoding: "utf-8" });
  if (made.status !== 0) {
    throw new Error(`make_store failed: ${made.stderr}`);
  }
  tokens = JSON.parse(readFileSync(join(storeDir, "tokens.json"), "utf-8"));
  server = spawn(
    PY,
    ["-m", "alignboost.cli", "exp-serve", "--store", storeDir, "--port", String(PORT)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealth();
}, 30000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

describe("scripted session against the live server", () => {
  it("completes a 3-task assignment, exports, and re-analyzes exactly", async () => {
    const seen: string[] = [];
    const realFetch = globalThis.fetch;
    // record every rater-visible byte for the blinding audit
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      const res = await realFetch(input, init);
      const copy = res.clone();
      seen.push(await copy.text());
      return res;
    }) as typeof fetch;

    try {
      document.body.innerHTML = '<div id="app"></div>';
      const root = document.getElementById("app")!;
      const app = new App(new RatingApi(BASE, tokens.raters.r1!), root);
      await app.start();

      const plan: Array<["left" | "right", number]> = [
        ["left", 4],
        ["right", 2],
        ["left", 5],
      ];
      const submitted: Array<{ task_id: string; choice: string; confidence: number }> = [];
      for (const [choice, confidence] of plan) {
        const heading = root.querySelector("h2")!.textContent!;
        expect(heading).toMatch(/^Task \d of 3$/);
        expect(root.querySelectorAll("svg.barplot")).toHaveLength(2);
        const taskId = await currentTaskId();
        root.querySelector<HTMLInputElement>(`input[name="choice"][value="${choice}"]`)!.click();
        root
          .querySelector<HTMLInputElement>(`input[name="confidence"][value="${confidence}"]`)!
          .click();
        const button = root.querySelector<HTMLButtonElement>("button.submit")!;
        expect(button.disabled).toBe(false);
        button.click();
        await waitFor(() => !root.textContent!.includes(`#${taskId}`));
        await waitForScreenChange(root, heading);
        submitted.push({ task_id: taskId, choice, confidence });
      }
      expect(root.querySelector(".done-screen")).not.toBeNull();

      for (const body of seen) {
        expect(body).not.toContain("constrained"); // also matches "unconstrained"
      }

      // refresh after completion stays on the done screen (server-authoritative)
      const again = new App(new RatingApi(BASE, tokens.raters.r1!), root);
      await again.start();
      expect(root.querySelector(".done-screen")).not.toBeNull();

      // export with the admin token and join every line to a submitted task
      const exportRes = await realFetch(`${BASE}/export`, {
        headers: { Authorization: `Bearer ${tokens.admin}` },
      });
      expect(exportRes.status).toBe(200);
      const lines = (await exportRes.text()).trim().split("\n").map((l) => JSON.parse(l));
      expect(lines).toHaveLength(3);
      const byTask = new Map(submitted.map((s) => [s.task_id, s]));
      let expectedConstrained = 0;
      for (const line of lines) {
        const mine = byTask.get(line.task_id)!;
        expect(mine).toBeDefined();
        expect(line.choice).toBe(mine.choice);
        expect(line.confidence).toBe(mine.confidence);
        const chosen = line.choice === "left" ? line.left_model : other(line.left_model);
        expect(line.chosen_model).toBe(chosen);
        if (chosen === "constrained") expectedConstrained += 1;
      }

      // exp-analyze over the same store reproduces this session's summary
      const analysisDir = join(workDir, "analysis");
      const analyzed = spawnSync(
        PY,
        ["-m", "alignboost.cli", "exp-analyze", "--store", storeDir, "--out", analysisDir],
        { encoding: "utf-8" },
      );
      expect(analyzed.status).toBe(0);
      const analysis = JSON.parse(readFileSync(join(analysisDir, "analysis.json"), "utf-8"));
      expect(analysis.n_responses).toBe(3);
      expect(analysis.summary.n).toBe(3);
      expect(analysis.summary.chose_constrained).toBe(expectedConstrained);
      expect(analysis.summary.rate).toBeCloseTo(expectedConstrained / 3, 12);
      const meanConf = (model: string) => {
        const vals = lines
          .filter((l) => l.chosen_model === model)
          .map((l) => l.confidence as number);
        return vals.length ? vals.reduce((a, b) => a + b, 0) / vals.length : null;
      };
      for (const model of ["constrained", "unconstrained"]) {
        const expected = meanConf(model);
        const got = analysis.summary.confidence_by_choice[model];
        if (expected === null) {
          expect(got).toBeNull();
        } else {
          expect(got[0]).toBeCloseTo(expected, 12);
        }
      }
    } finally {
      globalThis.fetch = realFetch;
    }
  }, 60000);
});

function other(model: string): string {
  return model === "constrained" ? "unconstrained" : "constrained";
}

async function currentTaskId(): Promise<string> {
  const res = await fetch(`${BASE}/task`, {
    headers: { Authorization: `Bearer ${tokens.raters.r1!}` },
  });
  const body = await res.json();
  return body.task_id;
}

async function waitFor(predicate: () => boolean): Promise<void> {
  for (let i = 0; i < 200; i += 1) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

async function waitForScreenChange(root: HTMLElement, oldHeading: string): Promise<void> {
  for (let i = 0; i < 200; i += 1) {
    const h2 = root.querySelector("h2");
    if (root.querySelector(".done-screen")) return;
    if (h2 && h2.textContent !== oldHeading) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error("screen did not advance");
}
