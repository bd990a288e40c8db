// The spec inspector: a pretty-printed view of the session's document
// where every top-level property is hoverable (highlighting its bound
// interface elements, and back), findings are pinned to their paths,
// and leaf values can be edited inline. Edits ride an existing control
// binding when one exists, otherwise the whole patched document is
// re-posted; either way the server re-validates before anything
// changes.

import { VNode, findAll, h } from "./h.js";
import { ClientSession, ChangeOutcome } from "./session.js";
import { Control, Finding, InterfaceDescription } from "./types.js";

// --- spec paths (same grammar the engine uses) -----------------------------

export function parsePath(path: string): Array<string | number> {
  const segments: Array<string | number> = [];
  for (const token of path.match(/[^.[\]]+|\[\d+\]/g) ?? []) {
    segments.push(token.startsWith("[") ? Number(token.slice(1, -1)) : token);
  }
  return segments;
}

export function pathSet(tree: Record<string, unknown>, path: string,
                        value: unknown): void {
  const segments = parsePath(path);
  let node: unknown = tree;
  for (const segment of segments.slice(0, -1)) {
    node = (node as Record<string | number, unknown>)[segment];
    if (node === undefined) {
      throw new Error(`path not found: ${path}`);
    }
  }
  (node as Record<string | number, unknown>)[segments[segments.length - 1]] =
    value;
}

// --- property <-> element binding map ---------------------------------------

export interface HighlightTarget {
  attr: string;
  /** Match on prefix so experiments[0].perturb[1].value binds to
   * "experiments". Empty string matches any non-empty value. */
  prefix: string;
}

/** Which rendered elements a top-level spec property is bound to. */
export function bindingTargets(property: string,
                               desc: InterfaceDescription): HighlightTarget[] {
  switch (property) {
    case "dataset":
      return [{ attr: "data-role", prefix: "dataset-badge" }];
    case "objective":
      return [{ attr: "data-role", prefix: "objective-badge" }];
    case "model":
      return [{ attr: "data-role", prefix: "model-badge" }];
    case "scope":
      return [{ attr: "data-binding-path", prefix: "scope" }];
    case "outputVariable":
      return [{ attr: "data-output-variable", prefix: "" }];
    case "experiments":
      return [
        { attr: "data-experiment-path", prefix: "experiments" },
        { attr: "data-binding-path", prefix: "experiments" },
      ];
    default:
      return [];
  }
}

function matches(node: VNode, target: HighlightTarget): boolean {
  const value = node.attrs[target.attr];
  if (typeof value !== "string" || value === "") return false;
  return target.prefix === "" || value === target.prefix ||
    value.startsWith(target.prefix);
}

/** The vnodes a property highlights; non-empty iff the binding resolves. */
export function resolveTargets(property: string, desc: InterfaceDescription,
                               tree: VNode): VNode[] {
  const targets = bindingTargets(property, desc);
  return findAll(tree, (node) => targets.some((t) => matches(node, t)));
}

/** Reverse direction: the top-level property an element belongs to. */
export function propertyForElement(node: VNode): string | null {
  const binding = node.attrs["data-binding-path"];
  if (typeof binding === "string" && binding) {
    return String(parsePath(binding)[0]);
  }
  const role = node.attrs["data-role"];
  if (role === "dataset-badge") return "dataset";
  if (role === "objective-badge") return "objective";
  if (role === "model-badge") return "model";
  const path = node.attrs["data-experiment-path"];
  if (typeof path === "string" && path) return "experiments";
  return null;
}

// --- rendering ---------------------------------------------------------------

export interface InspectorHooks {
  onHoverProperty?: (property: string | null) => void;
  onEditLeaf?: (path: string, value: unknown) => void;
}

export function renderSpecPanel(documentText: string, findings: Finding[],
                                hooks: InspectorHooks = {},
                                highlighted: string | null = null): VNode {
  const tree = JSON.parse(documentText) as Record<string, unknown>;
  const blocks = Object.keys(tree).sort().map((property) => {
    const value = JSON.stringify(tree[property], null, 2);
    const pinned = findings.filter(
      (f) => f.path === property || f.path.startsWith(property + ".") ||
        f.path.startsWith(property + "["));
    const badges = pinned.map((f) =>
      h("span", { class: `finding-badge ${f.severity}`,
                  "data-finding-path": f.path, title: f.message },
        [f.category]));
    return h("div", {
      class: "spec-property" + (pinned.length ? " has-findings" : "")
        + (highlighted === property ? " highlight" : ""),
      "data-spec-path": property,
    }, [
      h("div", { class: "spec-key" }, [h("span", {}, [property]), ...badges]),
      h("pre", { class: "spec-value" }, [value]),
    ], {
      mouseenter: () => hooks.onHoverProperty?.(property),
      mouseleave: () => hooks.onHoverProperty?.(null),
    });
  });
  return h("aside", { class: "spec-inspector", "data-role": "spec-inspector" },
           blocks);
}

// --- controller ----------------------------------------------------------------

export class InspectorController {
  hovered: string | null = null;

  constructor(private session: ClientSession,
              private getDocument: () => string) {}

  hover(property: string | null): void {
    this.hovered = property;
  }

  /** Elements currently highlighted by the hovered property. */
  highlightedElements(tree: VNode): VNode[] {
    if (!this.hovered || !this.session.description) return [];
    return resolveTargets(this.hovered, this.session.description, tree);
  }

  /** Inline edit of a leaf value (or list entry add/remove upstream).
   * Rides the bound control when one exists so the server treats it
   * exactly like any other interaction. */
  async applyEdit(path: string, value: unknown): Promise<ChangeOutcome> {
    const control = this.boundControl(path);
    if (control) {
      return this.session.onControlChange(control, value);
    }
    const tree = JSON.parse(this.getDocument()) as Record<string, unknown>;
    pathSet(tree, path, value);
    return this.session.postSpec(tree);
  }

  private boundControl(path: string): Control | undefined {
    return this.session.description?.controls.find(
      (c) => c.bindingPath === path);
  }
}
