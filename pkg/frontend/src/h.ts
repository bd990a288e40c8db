// Minimal virtual nodes: rendering stays a pure function of its inputs,
// serializes deterministically for snapshots, and mounts to real DOM in
// the browser.

export type Handler = (value: unknown) => void;

export interface VNode {
  tag: string;
  attrs: Record<string, string | number | boolean>;
  children: Array<VNode | string>;
  on?: Record<string, Handler>;
}

export function h(
  tag: string,
  attrs: Record<string, string | number | boolean> = {},
  children: Array<VNode | string> = [],
  on?: Record<string, Handler>,
): VNode {
  return { tag, attrs, children, on };
}

const VOID_TAGS = new Set(["input", "br", "hr", "img"]);

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Deterministic serialization: attributes in sorted order, two-space
 * indentation. Equal trees produce byte-equal documents. */
export function renderToString(node: VNode | string, indent = 0): string {
  const pad = "  ".repeat(indent);
  if (typeof node === "string") {
    return `${pad}${escapeHtml(node)}\n`;
  }
  const attrs = Object.keys(node.attrs)
    .sort()
    .map((key) => {
      const value = node.attrs[key];
      if (value === true) return ` ${key}`;
      if (value === false) return "";
      return ` ${key}="${escapeHtml(String(value))}"`;
    })
    .join("");
  if (VOID_TAGS.has(node.tag)) {
    return `${pad}<${node.tag}${attrs}>\n`;
  }
  if (node.children.length === 0) {
    return `${pad}<${node.tag}${attrs}></${node.tag}>\n`;
  }
  const inner = node.children
    .map((child) => renderToString(child, indent + 1))
    .join("");
  return `${pad}<${node.tag}${attrs}>\n${inner}${pad}</${node.tag}>\n`;
}

/** Create real DOM (browser only); event handlers receive the target's
 * value for inputs/selects and the raw event otherwise. */
export function mount(node: VNode | string, doc: Document): Node {
  if (typeof node === "string") {
    return doc.createTextNode(node);
  }
  const el = doc.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) {
    if (value === false) continue;
    el.setAttribute(key, value === true ? "" : String(value));
  }
  for (const [event, handler] of Object.entries(node.on ?? {})) {
    el.addEventListener(event, (ev) => {
      const target = ev.target as HTMLInputElement | HTMLSelectElement | null;
      handler(target && "value" in target ? target.value : ev);
    });
  }
  for (const child of node.children) {
    el.appendChild(mount(child, doc));
  }
  return el;
}

/** Depth-first search over a vnode tree (tests and highlight lookups). */
export function findAll(
  node: VNode | string,
  predicate: (n: VNode) => boolean,
): VNode[] {
  if (typeof node === "string") return [];
  const here = predicate(node) ? [node] : [];
  return here.concat(node.children.flatMap((c) => findAll(c, predicate)));
}
