/** Hand-rolled SVG charts rendered to strings (no DOM required). */

import type { Curve } from "./api.js";

const W = 560;
const H = 240;
const PAD = { left: 48, right: 12, top: 12, bottom: 28 };

function fmt(x: number): string {
  return Number.isInteger(x) ? String(x) : x.toPrecision(4);
}

function scale(domainLo: number, domainHi: number, rangeLo: number, rangeHi: number) {
  const span = domainHi - domainLo || 1;
  return (v: number) => rangeLo + ((v - domainLo) / span) * (rangeHi - rangeLo);
}

/** Lag-effect curve with a shaded credible band and a zero line. */
export function lineChartSVG(curve: Curve, title: string): string {
  const T = curve.mean.length;
  const lags = Array.from({ length: T }, (_, i) => i + 1);
  const lo = Math.min(0, ...curve.lower);
  const hi = Math.max(0, ...curve.upper);
  const sx = scale(1, T, PAD.left, W - PAD.right);
  const sy = scale(lo, hi, H - PAD.bottom, PAD.top);

  const band =
    lags.map((t, i) => `${sx(t)},${sy(curve.upper[i])}`).join(" ") +
    " " +
    lags
      .slice()
      .reverse()
      .map((t) => `${sx(t)},${sy(curve.lower[t - 1])}`)
      .join(" ");
  const line = lags.map((t, i) => `${sx(t)},${sy(curve.mean[i])}`).join(" ");
  const zero = sy(0);

  const ticks = [lo, 0, hi]
    .filter((v, i, a) => a.indexOf(v) === i)
    .map(
      (v) =>
        `<text class="tick" x="${PAD.left - 6}" y="${sy(v) + 4}" text-anchor="end">${fmt(v)}</text>`,
    )
    .join("");
  const lagTicks = [1, Math.round(T / 2), T]
    .filter((v, i, a) => a.indexOf(v) === i)
    .map(
      (t) =>
        `<text class="tick" x="${sx(t)}" y="${H - 8}" text-anchor="middle">${t}</text>`,
    )
    .join("");

  return (
    `<svg class="chart" viewBox="0 0 ${W} ${H}" role="img" aria-label="${title}">` +
    `<title>${title}</title>` +
    `<polygon class="band" points="${band}"/>` +
    `<line class="zero" x1="${PAD.left}" y1="${zero}" x2="${W - PAD.right}" y2="${zero}"/>` +
    `<polyline class="mean" fill="none" points="${line}"/>` +
    ticks +
    lagTicks +
    `</svg>`
  );
}

/** Horizontal bars on [0, 1], used for PIPs and split proportions. */
export function barChartSVG(entries: Array<[string, number]>, title: string): string {
  const rowH = 26;
  const height = entries.length * rowH + 8;
  const labelW = 150;
  const sx = scale(0, 1, labelW, W - PAD.right - 56);
  const rows = entries
    .map(([label, value], i) => {
      const y = 4 + i * rowH;
      return (
        `<text class="label" x="${labelW - 8}" y="${y + 16}" text-anchor="end">${label}</text>` +
        `<rect class="bar" x="${sx(0)}" y="${y + 4}" width="${sx(value) - sx(0)}" height="${rowH - 10}"/>` +
        `<text class="value" x="${sx(value) + 6}" y="${y + 16}">${value.toFixed(3)}</text>`
      );
    })
    .join("");
  return (
    `<svg class="chart" viewBox="0 0 ${W} ${height}" role="img" aria-label="${title}">` +
    `<title>${title}</title>` +
    rows +
    `</svg>`
  );
}
