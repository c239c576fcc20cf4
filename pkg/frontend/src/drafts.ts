/** Unsent label work: groups of cluster ids awaiting a state name and tag.
 * Drafts live only in the client; the server learns about them on submit. */

import type { LabelEntry, StateTag } from "./types.js";

export const TAGS: StateTag[] = ["healthy", "faulty", "transient", "unknown"];

export interface DraftEntry {
  clusters: number[];
  name: string;
  tag: StateTag;
}

/** Problem description for a draft, or null when it is submittable. */
export function validateDraft(entries: readonly DraftEntry[]): string | null {
  if (entries.length === 0) return "draft is empty";
  const seen = new Map<number, string>();
  for (const e of entries) {
    if (e.clusters.length === 0) return `entry "${e.name}" selects no clusters`;
    if (e.name.trim() === "") return "every state needs a name";
    if (!TAGS.includes(e.tag)) return `unknown tag "${e.tag}"`;
    for (const c of e.clusters) {
      const owner = seen.get(c);
      if (owner !== undefined) {
        return `cluster ${c} appears in both "${owner}" and "${e.name}"`;
      }
      seen.set(c, e.name);
    }
  }
  return null;
}

/** Distinct cluster ids behind a row selection, noise excluded, ascending. */
export function clustersOfSelection(selection: Iterable<number>, labels: readonly number[]): number[] {
  const ids = new Set<number>();
  for (const row of selection) {
    const label = labels[row];
    if (label !== undefined && label >= 0) ids.add(label);
  }
  return [...ids].sort((a, b) => a - b);
}

export class LabelDraft {
  entries: DraftEntry[] = [];
  /** True once the draft differs from what the server last acknowledged. */
  unsent = false;

  /** Add one named group. Clusters already claimed by another entry are
   * rejected so a cluster never appears in two entries. */
  add(clusters: number[], name: string, tag: StateTag): void {
    const entry: DraftEntry = {
      clusters: [...new Set(clusters)].sort((a, b) => a - b),
      name: name.trim(),
      tag,
    };
    const problem = validateDraft([...this.entries, entry]);
    if (problem !== null) throw new Error(problem);
    this.entries.push(entry);
    this.unsent = true;
  }

  removeAt(index: number): void {
    this.entries.splice(index, 1);
    this.unsent = this.entries.length > 0;
  }

  clear(): void {
    this.entries = [];
    this.unsent = false;
  }

  get canSubmit(): boolean {
    return validateDraft(this.entries) === null;
  }

  toOverrides(): LabelEntry[] {
    return this.entries.map((e) => ({
      clusters: [...e.clusters],
      name: e.name,
      tag: e.tag,
    }));
  }
}
