/** Entry point: wires tab navigation and form events to the API client
 * and the pure renderers. All display logic lives in views.ts. */

import { ApiClient, ApiError, type Meta } from "./api.js";
import { MAX_SUBGROUP_MODIFIERS, SubgroupSelection, defaultProfile, profileToRequest } from "./state.js";
import {
  renderError,
  renderHeader,
  renderIndividualCurves,
  renderModifierTab,
  renderProfileForm,
  renderSubgroupTab,
} from "./views.js";

const api = new ApiClient("");

const TABS = ["modifiers", "individual", "subgroups"] as const;
type Tab = (typeof TABS)[number];

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function showModifiers(meta: Meta): Promise<void> {
  const panel = el("panel");
  try {
    const pips = await api.getPips();
    const splits = await Promise.all(meta.modifiers.map((m) => api.getSplits(m.name)));
    panel.innerHTML = renderModifierTab(pips, splits);
  } catch (err) {
    panel.innerHTML = renderError(
      err instanceof ApiError ? err.message : "failed to load modifier data",
    );
  }
}

async function showIndividual(meta: Meta): Promise<void> {
  const panel = el("panel");
  const fields = defaultProfile(meta);
  panel.innerHTML = `<h2>Individual profile</h2>${renderProfileForm(fields)}<div id="curves"></div>`;
  const form = el("profile-form") as HTMLFormElement;
  const update = async () => {
    for (const input of form.querySelectorAll<HTMLInputElement | HTMLSelectElement>(
      "[data-modifier]",
    )) {
      const field = fields.find((f) => f.name === input.dataset.modifier);
      if (field) field.value = Number(input.value);
    }
    try {
      const resp = await api.postIndividual(profileToRequest(fields));
      el("curves").innerHTML = renderIndividualCurves(resp);
    } catch (err) {
      el("curves").innerHTML = renderError(
        err instanceof ApiError ? err.message : "estimation failed",
      );
    }
  };
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void update();
  });
  await update();
}

async function showSubgroups(meta: Meta): Promise<void> {
  const panel = el("panel");
  const selection = new SubgroupSelection(meta);
  const options = meta.modifiers
    .map((m) => `<option value="${m.name}">${m.name}</option>`)
    .join("");
  panel.innerHTML =
    `<h2>Subgroups</h2>` +
    `<form id="subgroup-form"><select id="subgroup-pick">${options}</select>` +
    `<button type="submit">Add</button>` +
    `<span id="subgroup-note" class="note">up to ${MAX_SUBGROUP_MODIFIERS} modifiers</span></form>` +
    `<ul id="subgroup-list"></ul><div id="subgroup-curves"></div>`;

  const refresh = async () => {
    el("subgroup-list").innerHTML = selection
      .list()
      .map((c) => `<li>${c.modifier}</li>`)
      .join("");
    if (!selection.list().length) {
      el("subgroup-curves").innerHTML = "";
      return;
    }
    try {
      const resp = await api.postSubgroup(selection.toGroupBy());
      el("subgroup-curves").innerHTML = renderSubgroupTab(resp);
    } catch (err) {
      el("subgroup-curves").innerHTML = renderError(
        err instanceof ApiError ? err.message : "subgroup estimation failed",
      );
    }
  };

  (el("subgroup-form") as HTMLFormElement).addEventListener("submit", (ev) => {
    ev.preventDefault();
    const pick = (el("subgroup-pick") as HTMLSelectElement).value;
    const def = meta.modifiers.find((m) => m.name === pick);
    const added = selection.add(
      def?.kind === "categorical" ? { modifier: pick } : { modifier: pick, nBins: 2 },
    );
    el("subgroup-note").textContent = added
      ? `up to ${MAX_SUBGROUP_MODIFIERS} modifiers`
      : `cannot add ${pick}: at most ${MAX_SUBGROUP_MODIFIERS} distinct modifiers`;
    void refresh();
  });
}

async function main(): Promise<void> {
  let meta: Meta;
  try {
    meta = await api.getMeta();
  } catch {
    el("app").innerHTML = renderError("archive server unreachable");
    return;
  }
  el("app").innerHTML =
    renderHeader(meta) +
    (meta.het
      ? `<nav>${TABS.map((t) => `<button data-tab="${t}">${t}</button>`).join("")}</nav><main id="panel"></main>`
      : `<main id="panel"><p>This archive has no modifier trees; use the CLI summary instead.</p></main>`);
  if (!meta.het) return;

  const show = (tab: Tab) =>
    tab === "modifiers" ? showModifiers(meta) : tab === "individual" ? showIndividual(meta) : showSubgroups(meta);
  document.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((btn) => {
    btn.addEventListener("click", () => void show(btn.dataset.tab as Tab));
  });
  await show("modifiers");
}

void main();
