/** Horizontal attribution bar plots rendered as inline SVG.
 *
 * Both plots of a task share one axis scale so bar lengths are comparable
 * across sides; positive and negative attributions get distinct classes and
 * grow in opposite directions from a center baseline.
 */

import type { BarEntry } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const PLOT_WIDTH = 360;
export const ROW_HEIGHT = 34;
const LABEL_WIDTH = 130;
const PAD = 8;

export function sharedScale(left: BarEntry[], right: BarEntry[]): number {
  const magnitudes = [...left, ...right].map((e) => Math.abs(e.attribution));
  const max = Math.max(0, ...magnitudes);
  return max > 0 ? max : 1;
}

export function sortEntries(entries: BarEntry[]): BarEntry[] {
  return [...entries].sort(
    (a, b) => Math.abs(b.attribution) - Math.abs(a.attribution) || a.feature.localeCompare(b.feature),
  );
}

function formatValue(value: number | string | null): string {
  if (value === null) return "missing";
  if (typeof value === "number") return Number.isInteger(value) ? String(value) : value.toFixed(2);
  return value;
}

export function renderBarPlot(entries: BarEntry[], scale: number, title: string): SVGSVGElement {
  const sorted = sortEntries(entries);
  const svg = document.createElementNS(SVG_NS, "svg");
  const height = ROW_HEIGHT * sorted.length + 30;
  svg.setAttribute("width", String(PLOT_WIDTH));
  svg.setAttribute("height", String(height));
  svg.setAttribute("viewBox", `0 0 ${PLOT_WIDTH} ${height}`);
  svg.setAttribute("role", "img");
  svg.classList.add("barplot");

  const caption = document.createElementNS(SVG_NS, "text");
  caption.textContent = title;
  caption.setAttribute("x", String(PLOT_WIDTH / 2));
  caption.setAttribute("y", "18");
  caption.setAttribute("text-anchor", "middle");
  caption.classList.add("plot-title");
  svg.appendChild(caption);

  const barSpan = (PLOT_WIDTH - LABEL_WIDTH - 2 * PAD) / 2;
  const center = LABEL_WIDTH + PAD + barSpan;

  const axis = document.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(center));
  axis.setAttribute("x2", String(center));
  axis.setAttribute("y1", "24");
  axis.setAttribute("y2", String(height - 6));
  axis.classList.add("axis");
  svg.appendChild(axis);

  sorted.forEach((entry, i) => {
    const y = 28 + i * ROW_HEIGHT;
    const label = document.createElementNS(SVG_NS, "text");
    label.textContent = `${entry.feature} = ${formatValue(entry.value)}`;
    label.setAttribute("x", String(LABEL_WIDTH));
    label.setAttribute("y", String(y + 17));
    label.setAttribute("text-anchor", "end");
    label.classList.add("bar-label");
    svg.appendChild(label);

    const width = (Math.abs(entry.attribution) / scale) * barSpan;
    const bar = document.createElementNS(SVG_NS, "rect");
    bar.setAttribute("y", String(y + 4));
    bar.setAttribute("height", String(ROW_HEIGHT - 12));
    bar.setAttribute("width", String(width));
    bar.setAttribute("x", String(entry.attribution >= 0 ? center : center - width));
    bar.classList.add("bar", entry.attribution >= 0 ? "bar-positive" : "bar-negative");
    bar.dataset.attribution = String(entry.attribution);
    svg.appendChild(bar);

    const amount = document.createElementNS(SVG_NS, "text");
    amount.textContent = entry.attribution.toFixed(3);
    amount.setAttribute("y", String(y + 17));
    amount.setAttribute(
      "x",
      String(entry.attribution >= 0 ? center + width + 4 : center - width - 4),
    );
    amount.setAttribute("text-anchor", entry.attribution >= 0 ? "start" : "end");
    amount.classList.add("bar-amount");
    svg.appendChild(amount);
  });
  return svg;
}
