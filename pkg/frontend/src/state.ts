/** UI state that is worth testing in isolation: the subgroup selector
 * (at most two modifiers, each with bins or levels) and the individual
 * profile form derived from archive metadata. */

import type { GroupBySpec, Meta, ModifierMeta } from "./api.js";

export const MAX_SUBGROUP_MODIFIERS = 2;

export interface SubgroupChoice {
  modifier: string;
  /** number of equal-width bins for continuous modifiers */
  nBins?: number;
  /** level codes for categorical modifiers */
  levels?: number[];
}

export class SubgroupSelection {
  private choices: SubgroupChoice[] = [];

  constructor(private readonly meta: Meta) {}

  list(): readonly SubgroupChoice[] {
    return this.choices;
  }

  /** Add a modifier; returns false (and changes nothing) beyond the cap
   * or for unknown/duplicate names. */
  add(choice: SubgroupChoice): boolean {
    if (this.choices.length >= MAX_SUBGROUP_MODIFIERS) return false;
    const def = this.meta.modifiers.find((m) => m.name === choice.modifier);
    if (!def) return false;
    if (this.choices.some((c) => c.modifier === choice.modifier)) return false;
    this.choices.push(choice);
    return true;
  }

  remove(modifier: string): void {
    this.choices = this.choices.filter((c) => c.modifier !== modifier);
  }

  /** Request body for POST /api/subgroup. */
  toGroupBy(): GroupBySpec[] {
    return this.choices.map((choice) => {
      const def = this.meta.modifiers.find((m) => m.name === choice.modifier)!;
      if (def.kind === "categorical") {
        return { modifier: def.name, levels: choice.levels ?? def.levels ?? [] };
      }
      const n = choice.nBins ?? 2;
      const lo = def.min ?? 0;
      const hi = def.max ?? 1;
      const edges: number[] = [];
      // widen the top edge so max-valued rows land in the last bin
      const top = hi + Math.max(1e-9, Math.abs(hi) * 1e-9);
      for (let i = 0; i <= n; i++) edges.push(lo + ((top - lo) * i) / n);
      return { modifier: def.name, bins: edges };
    });
  }
}

/** One input row of the individual-profile form. */
export interface ProfileField {
  name: string;
  kind: "continuous" | "categorical";
  min?: number;
  max?: number;
  levels?: number[];
  value: number;
}

export function defaultProfile(meta: Meta): ProfileField[] {
  return meta.modifiers.map((d: ModifierMeta) => ({
    name: d.name,
    kind: d.kind,
    min: d.min,
    max: d.max,
    levels: d.levels,
    value: d.kind === "continuous" ? ((d.min ?? 0) + (d.max ?? 0)) / 2 : (d.levels?.[0] ?? 0),
  }));
}

export function profileToRequest(fields: ProfileField[]): Record<string, number> {
  const out: Record<string, number> = {};
  for (const f of fields) out[f.name] = f.value;
  return out;
}
