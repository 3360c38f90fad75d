/** Pure HTML renderers for the three explorer tabs. Every number shown
 * comes straight from an API payload (or is a 1-based lag index). */

import type {
  IndividualResponse,
  Meta,
  PipsResponse,
  SplitsResponse,
  SubgroupResponse,
} from "./api.js";
import { barChartSVG, lineChartSVG } from "./charts.js";
import type { ProfileField } from "./state.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderHeader(meta: Meta): string {
  return (
    `<header><h1>laggard explorer</h1>` +
    `<p class="meta">${esc(meta.model_class)} (${esc(meta.family)}) &middot; ` +
    `n=${meta.n} &middot; ${meta.n_lags} lags &middot; ` +
    `${meta.n_retained} retained draws &middot; format ${esc(meta.format_version)}</p></header>`
  );
}

export function renderModifierTab(pips: PipsResponse, splits: SplitsResponse[]): string {
  const pipEntries = Object.entries(pips.pips).sort((a, b) => b[1] - a[1]);
  const pipChart = barChartSVG(pipEntries, "Posterior inclusion probability by modifier");
  const splitBlocks = splits
    .map((s) => {
      const entries = Object.entries(s.proportions);
      if (!entries.length) {
        return `<section><h3>${esc(s.modifier)}</h3><p class="empty">no splits in the posterior</p></section>`;
      }
      return (
        `<section><h3>${esc(s.modifier)} <small>(${s.n_splits} splits)</small></h3>` +
        barChartSVG(entries, `Split locations for ${s.modifier}`) +
        `</section>`
      );
    })
    .join("");
  return (
    `<h2>Modifiers</h2>` +
    `<section><h3>Posterior inclusion probability</h3>${pipChart}</section>` +
    `<h3>Split locations</h3>` +
    splitBlocks
  );
}

export function renderProfileForm(fields: ProfileField[]): string {
  const rows = fields
    .map((f) => {
      if (f.kind === "continuous") {
        return (
          `<label>${esc(f.name)} <input type="number" data-modifier="${esc(f.name)}" ` +
          `min="${f.min}" max="${f.max}" step="any" value="${f.value}"></label>`
        );
      }
      const options = (f.levels ?? [])
        .map(
          (lv) =>
            `<option value="${lv}"${lv === f.value ? " selected" : ""}>level ${lv}</option>`,
        )
        .join("");
      return `<label>${esc(f.name)} <select data-modifier="${esc(f.name)}">${options}</select></label>`;
    })
    .join("");
  return `<form id="profile-form">${rows}<button type="submit">Estimate</button></form>`;
}

export function renderIndividualCurves(resp: IndividualResponse): string {
  return Object.entries(resp.exposures)
    .map(
      ([name, curve]) =>
        `<section><h3>${esc(name)}</h3>${lineChartSVG(curve, `Lag effects for ${name}`)}</section>`,
    )
    .join("");
}

export function renderSubgroupTab(resp: SubgroupResponse): string {
  return Object.entries(resp.subgroups)
    .map(([label, entry]) => {
      if (!entry.n_rows) {
        return `<section><h3>${esc(label)}</h3><p class="empty">no subjects in this subgroup</p></section>`;
      }
      const charts = Object.entries(entry.exposures)
        .map(
          ([name, curve]) =>
            `<h4>${esc(name)}</h4>` + lineChartSVG(curve, `${label}: lag effects for ${name}`),
        )
        .join("");
      return `<section><h3>${esc(label)} <small>(${entry.n_rows} subjects)</small></h3>${charts}</section>`;
    })
    .join("");
}

export function renderError(message: string): string {
  return `<p class="error">${esc(message)}</p>`;
}
