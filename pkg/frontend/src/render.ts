/**
 * Pure DOM builders for query results and sweep curves.
 *
 * Every number rendered here is copied verbatim (after formatting) from a
 * service response; nothing is recomputed client-side.
 */

import type { QueryResponse, SweepPoint, SweepResponse } from "./types";

export function formatProbability(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function formatStderr(se: number): string {
  return `±${(se * 100).toFixed(2)}pp`;
}

const KIND_LABELS: Record<string, string> = {
  admission_risk: "Risk of any positive test this stay",
  extended_stay_risk: "Risk of a positive within the horizon",
  retest_now: "Probability a nares swab now is positive",
  deisolation: "Probability it is safe to de-isolate",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** A card showing one query answer with its uncertainty and provenance. */
export function renderResultCard(kind: string, res: QueryResponse): HTMLElement {
  const card = el("article", "result-card");
  card.appendChild(el("h3", "result-kind", KIND_LABELS[kind] ?? kind));

  const estimate = el("p", "result-estimate", formatProbability(res.estimate));
  estimate.dataset.estimate = String(res.estimate);
  card.appendChild(estimate);

  const band = el(
    "p",
    "result-band",
    `90% posterior band ${formatProbability(res.posterior_band.lo)} – ${formatProbability(
      res.posterior_band.hi,
    )}`,
  );
  band.dataset.lo = String(res.posterior_band.lo);
  band.dataset.hi = String(res.posterior_band.hi);
  card.appendChild(band);

  card.appendChild(
    el(
      "p",
      "result-mc",
      `Monte Carlo ${formatStderr(res.mc_stderr)} over ${res.n_effective.toLocaleString()} sequences`,
    ),
  );

  const prov = el(
    "p",
    "result-provenance",
    `seed ${res.seed} · model ${res.artifact_version.slice(0, 12)} · ${res.compute_seconds.toFixed(
      2,
    )}s`,
  );
  prov.dataset.seed = String(res.seed);
  card.appendChild(prov);
  return card;
}

export interface SweepSeries {
  label: string;
  points: SweepPoint[];
  color: string;
}

const WIDTH = 640;
const HEIGHT = 320;
const PAD = 44;

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

const SVG_NS = "http://www.w3.org/2000/svg";

/**
 * An SVG line chart of one or more sweep series (estimate vs grid value),
 * each with its posterior band as a translucent polygon. Multiple series
 * make an overlay, e.g. the same sweep at from_healthcare_facility 0 vs 1.
 */
export function renderSweepChart(axisLabel: string, series: SweepSeries[]): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "sweep-chart");
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", `Estimate vs ${axisLabel}`);

  const all = series.flatMap((s) => s.points);
  if (all.length === 0) return svg;
  const xs = all.map((p) => p.grid);
  const los = all.map((p) => p.posterior_band.lo);
  const his = all.map((p) => p.posterior_band.hi);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.max(0, Math.min(...los) - 0.02);
  const yHi = Math.min(1, Math.max(...his) + 0.02);

  const px = (x: number) => scale(x, xLo, xHi, PAD, WIDTH - PAD / 2);
  const py = (y: number) => scale(y, yLo, yHi, HEIGHT - PAD, PAD / 2);

  for (const s of series) {
    const pts = [...s.points].sort((a, b) => a.grid - b.grid);

    const bandPath =
      pts.map((p) => `${px(p.grid)},${py(p.posterior_band.hi)}`).join(" ") +
      " " +
      [...pts]
        .reverse()
        .map((p) => `${px(p.grid)},${py(p.posterior_band.lo)}`)
        .join(" ");
    const band = document.createElementNS(SVG_NS, "polygon");
    band.setAttribute("points", bandPath);
    band.setAttribute("fill", s.color);
    band.setAttribute("opacity", "0.15");
    band.setAttribute("class", "sweep-band");
    svg.appendChild(band);

    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", pts.map((p) => `${px(p.grid)},${py(p.estimate)}`).join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", s.color);
    line.setAttribute("stroke-width", "2");
    line.setAttribute("class", "sweep-line");
    line.dataset.label = s.label;
    line.dataset.estimates = pts.map((p) => p.estimate).join(",");
    svg.appendChild(line);
  }

  const xAxis = document.createElementNS(SVG_NS, "text");
  xAxis.setAttribute("x", String(WIDTH / 2));
  xAxis.setAttribute("y", String(HEIGHT - 8));
  xAxis.setAttribute("text-anchor", "middle");
  xAxis.setAttribute("class", "axis-label");
  xAxis.textContent = axisLabel;
  svg.appendChild(xAxis);

  let ly = 18;
  for (const s of series) {
    const item = document.createElementNS(SVG_NS, "text");
    item.setAttribute("x", String(WIDTH - PAD / 2));
    item.setAttribute("y", String(ly));
    item.setAttribute("text-anchor", "end");
    item.setAttribute("fill", s.color);
    item.setAttribute("class", "legend-item");
    item.textContent = s.label;
    svg.appendChild(item);
    ly += 18;
  }
  return svg;
}

/** Convenience: one sweep response as a single-series chart. */
export function renderSweep(axisLabel: string, res: SweepResponse, label = ""): SVGSVGElement {
  return renderSweepChart(axisLabel, [{ label, points: res.points, color: "#1f6feb" }]);
}
