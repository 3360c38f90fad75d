import { describe, expect, it } from "vitest";

import type { Meta } from "../src/api.js";
import {
  MAX_SUBGROUP_MODIFIERS,
  SubgroupSelection,
  defaultProfile,
  profileToRequest,
} from "../src/state.js";
import { loadFixture } from "./helpers.js";

const meta = loadFixture("meta").body as unknown as Meta;

describe("SubgroupSelection", () => {
  it("accepts up to two modifiers and rejects a third", () => {
    const sel = new SubgroupSelection(meta);
    expect(sel.add({ modifier: "sex" })).toBe(true);
    expect(sel.add({ modifier: "age", nBins: 2 })).toBe(true);
    expect(sel.add({ modifier: "age", nBins: 3 })).toBe(false); // duplicate
    expect(sel.list()).toHaveLength(MAX_SUBGROUP_MODIFIERS);
  });

  it("rejects a third distinct modifier even if known", () => {
    const wide: Meta = {
      ...meta,
      modifiers: [...meta.modifiers, { name: "grp", kind: "categorical", levels: [0, 1, 2] }],
    };
    const sel = new SubgroupSelection(wide);
    expect(sel.add({ modifier: "sex" })).toBe(true);
    expect(sel.add({ modifier: "age", nBins: 2 })).toBe(true);
    expect(sel.add({ modifier: "grp" })).toBe(false);
    expect(sel.list().map((c) => c.modifier)).toEqual(["sex", "age"]);
  });

  it("rejects unknown modifiers", () => {
    const sel = new SubgroupSelection(meta);
    expect(sel.add({ modifier: "bmi" })).toBe(false);
    expect(sel.list()).toHaveLength(0);
  });

  it("remove frees a slot", () => {
    const sel = new SubgroupSelection(meta);
    sel.add({ modifier: "sex" });
    sel.add({ modifier: "age", nBins: 2 });
    sel.remove("sex");
    expect(sel.add({ modifier: "sex" })).toBe(true);
  });

  it("builds levels for categorical and bin edges for continuous", () => {
    const sel = new SubgroupSelection(meta);
    sel.add({ modifier: "sex" });
    sel.add({ modifier: "age", nBins: 2 });
    const [sexSpec, ageSpec] = sel.toGroupBy();
    expect(sexSpec).toEqual({ modifier: "sex", levels: [0, 1] });
    expect(ageSpec.modifier).toBe("age");
    const edges = ageSpec.bins!;
    expect(edges).toHaveLength(3);
    const ageMeta = meta.modifiers.find((m) => m.name === "age")!;
    expect(edges[0]).toBe(ageMeta.min);
    // the top edge is widened so max-valued rows fall inside the last bin
    expect(edges[2]).toBeGreaterThan(ageMeta.max!);
  });
});

describe("profile form state", () => {
  it("defaults continuous to the midpoint and categorical to the first level", () => {
    const fields = defaultProfile(meta);
    const age = fields.find((f) => f.name === "age")!;
    const sex = fields.find((f) => f.name === "sex")!;
    expect(age.value).toBeCloseTo((age.min! + age.max!) / 2);
    expect(sex.value).toBe(0);
  });

  it("serializes to the /api/individual request shape", () => {
    const fields = defaultProfile(meta);
    const body = profileToRequest(fields);
    expect(Object.keys(body).sort()).toEqual(["age", "sex"]);
    expect(typeof body.age).toBe("number");
  });
});
