/** Client-side purchase validation built from the constraint parameters the
 * server sends at game start. The rules are generated from that payload, never
 * from hardcoded constants; the server remains authoritative and this mirror
 * only exists so the form can refuse obviously-invalid submissions inline.
 *
 * Deliberately NOT enforced here, matching the server: per-resource supply is
 * a *joint* constraint settled at round end (overdraw annuls the round), so a
 * single seat's purchase may legally exceed supply on its own. */

import { Constraints, Project, Purchase, Verdict } from "./types.js";

export class PurchaseValidator {
  constructor(
    private readonly constraints: Constraints,
    private readonly projects: Project[] = [],
  ) {}

  validate(purchase: Purchase): Verdict {
    const violations: string[] = [];
    const known = new Set(Object.keys(this.constraints.supply));
    const quantities = Object.entries(purchase.quantities).filter(([, q]) => q !== 0);

    for (const [resource, quantity] of quantities) {
      if (!known.has(resource)) violations.push(`unknown resource '${resource}'`);
      if (!Number.isInteger(quantity)) {
        violations.push(`quantity for '${resource}' must be an integer, got ${quantity}`);
      } else if (quantity < 0) {
        violations.push(`quantity for '${resource}' must be nonnegative, got ${quantity}`);
      }
    }
    if (violations.length === 0) {
      const cost = quantities.reduce(
        (sum, [resource, quantity]) => sum + this.constraints.unit_cost[resource] * quantity,
        0,
      );
      if (cost > this.constraints.budget) {
        violations.push(`total cost ${cost} exceeds budget ${this.constraints.budget}`);
      }
    }
    if (quantities.length > this.constraints.max_types) {
      violations.push(`type count ${quantities.length} > ${this.constraints.max_types}`);
    }
    if (purchase.runs !== undefined) {
      const byName = new Map(this.projects.map((p) => [p.name, p]));
      for (const [name, count] of Object.entries(purchase.runs)) {
        if (!byName.has(name)) violations.push(`unknown project '${name}'`);
        else if (!Number.isInteger(count) || count < 0) {
          violations.push(`run count for '${name}' must be a nonnegative integer`);
        }
      }
      if (violations.length === 0) {
        const bought = new Map(quantities);
        for (const resource of known) {
          let needed = 0;
          for (const [name, count] of Object.entries(purchase.runs)) {
            needed += (byName.get(name)!.requirements[resource] ?? 0) * count;
          }
          if (needed > (bought.get(resource) ?? 0)) {
            violations.push(
              `runs need ${needed} of ${resource} but only ${bought.get(resource) ?? 0} purchased`,
            );
          }
        }
      }
    }
    return { valid: violations.length === 0, violations };
  }

  /** Total cost of the current scratch purchase, for the live budget meter. */
  costOf(quantities: Record<string, number>): number {
    return Object.entries(quantities).reduce(
      (sum, [resource, quantity]) =>
        sum + (this.constraints.unit_cost[resource] ?? 0) * quantity,
      0,
    );
  }
}
