import { describe, expect, it } from "vitest";
import { PurchaseValidator } from "../src/validator.js";
import { Constraints, Project } from "../src/types.js";

const CONSTRAINTS: Constraints = {
  supply: { r1: 10, r2: 10, r3: 6 },
  unit_cost: { r1: 1, r2: 1.5, r3: 3 },
  budget: 18,
  max_types: 2,
};

const PROJECTS: Project[] = [
  { name: "pa", requirements: { r1: 2 }, reward: 3 },
  { name: "pb", requirements: { r1: 1, r3: 1 }, reward: 5 },
];

const validator = new PurchaseValidator(CONSTRAINTS, PROJECTS);

describe("PurchaseValidator", () => {
  it("accepts a plain affordable purchase", () => {
    expect(validator.validate({ quantities: { r1: 10 } })).toEqual({
      valid: true,
      violations: [],
    });
  });

  it("accepts two resource types at exactly the budget", () => {
    // 10*1 + 5*1.5 = 17.5 <= 18
    expect(validator.validate({ quantities: { r1: 10, r2: 5 } }).valid).toBe(true);
  });

  it("rejects unknown resources", () => {
    const verdict = validator.validate({ quantities: { gold: 1 } });
    expect(verdict.valid).toBe(false);
    expect(verdict.violations.join(" ")).toContain("unknown resource");
  });

  it("rejects non-integer and negative quantities", () => {
    expect(validator.validate({ quantities: { r1: 1.5 } }).valid).toBe(false);
    expect(validator.validate({ quantities: { r1: -2 } }).valid).toBe(false);
  });

  it("rejects over-budget purchases", () => {
    const verdict = validator.validate({ quantities: { r3: 12 } });
    expect(verdict.valid).toBe(false);
    expect(verdict.violations.join(" ")).toContain("budget");
  });

  it("skips the budget check while per-resource violations are pending", () => {
    const verdict = validator.validate({ quantities: { gold: 1000 } });
    expect(verdict.violations.some((v) => v.includes("budget"))).toBe(false);
  });

  it("rejects more resource types than allowed", () => {
    const verdict = validator.validate({ quantities: { r1: 1, r2: 1, r3: 1 } });
    expect(verdict.valid).toBe(false);
    expect(verdict.violations.join(" ")).toContain("type count");
  });

  it("ignores zero-quantity entries when counting types", () => {
    expect(validator.validate({ quantities: { r1: 1, r2: 1, r3: 0 } }).valid).toBe(true);
  });

  it("does not cap a single seat's purchase at the supply", () => {
    // 12 r1 costs 12 <= 18; supply is a joint constraint settled later.
    expect(validator.validate({ quantities: { r1: 12 } }).valid).toBe(true);
  });

  it("accepts runs covered by the purchase", () => {
    expect(
      validator.validate({ quantities: { r1: 10 }, runs: { pa: 5 } }).valid,
    ).toBe(true);
  });

  it("rejects unknown projects and uncovered runs", () => {
    expect(
      validator.validate({ quantities: { r1: 10 }, runs: { nope: 1 } }).valid,
    ).toBe(false);
    const verdict = validator.validate({ quantities: { r1: 4 }, runs: { pa: 3 } });
    expect(verdict.valid).toBe(false);
    expect(verdict.violations.join(" ")).toContain("runs need 6 of r1");
  });

  it("sums requirements across projects when checking coverage", () => {
    // pa:2 runs needs 4 r1; pb:2 runs needs 2 r1 + 2 r3 -> 6 r1, 2 r3 total.
    const ok = validator.validate({
      quantities: { r1: 6, r3: 2 },
      runs: { pa: 2, pb: 2 },
    });
    expect(ok.valid).toBe(true);
    const short = validator.validate({
      quantities: { r1: 6, r3: 1 },
      runs: { pa: 2, pb: 2 },
    });
    expect(short.valid).toBe(false);
  });

  it("computes cost for the live budget meter", () => {
    expect(validator.costOf({ r1: 2, r2: 2 })).toBe(5);
    expect(validator.costOf({})).toBe(0);
  });
});
