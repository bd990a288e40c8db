// Page shell: header badges (dataset, objective, models), the rendered
// interface, notices, and the spec inspector side panel. The whole page
// is re-rendered from (description, document, findings) on every change.

import { ApiClient } from "./client.js";
import { VNode, h, mount } from "./h.js";
import { InspectorController, renderSpecPanel } from "./inspector.js";
import { renderInterface } from "./render.js";
import { ClientSession } from "./session.js";
import { Finding, InterfaceDescription, SUPPORTED_VERSION } from "./types.js";

export function renderApp(desc: InterfaceDescription | null,
                          documentText: string | null,
                          findings: Finding[],
                          session: ClientSession,
                          inspector: InspectorController | null): VNode {
  if (desc && desc.version !== SUPPORTED_VERSION) {
    return h("main", {}, [h("div", { class: "placeholder" },
      [`unsupported interface version: ${desc.version}`])]);
  }
  const doc = documentText ? JSON.parse(documentText) as {
    dataset?: string;
    objective?: { goal?: string; targetValue?: number };
    model?: Array<{ id?: string; type?: string }>;
  } : {};
  const header = h("header", { class: "session-header" }, [
    h("span", { class: "badge", "data-role": "dataset-badge" },
      [`dataset: ${doc.dataset ?? "?"}`]),
    h("span", { class: "badge", "data-role": "objective-badge" },
      [`objective: ${doc.objective?.goal ?? "minimize"}`
        + (doc.objective?.targetValue !== undefined
          ? ` ${doc.objective.targetValue}` : "")]),
    h("span", { class: "badge", "data-role": "model-badge" },
      [`models: ${(doc.model ?? []).map((m) => `${m.id}:${m.type}`).join(", ")
        || "?"}`]),
  ]);
  const notices = h("div", { class: "notices", "data-role": "notices" },
    session.notices.map((n) => h("div", { class: "notice" }, [n])));
  const body = desc
    ? renderInterface(desc, findings,
                      { onControlChange: (c, v) => void session.onControlChange(c, v) },
                      session.inlineFindings)
    : h("main", {}, [h("div", { class: "empty" }, ["no specification yet"])]);
  const panel = documentText
    ? renderSpecPanel(documentText, findings,
                      { onHoverProperty: (p) => inspector?.hover(p) },
                      inspector?.hovered ?? null)
    : h("aside", { class: "spec-inspector" }, []);
  return h("div", { class: "app" }, [header, notices, body, panel]);
}

/** Browser bootstrap: create a session, post a starter document if one
 * is embedded in the page, and keep the DOM in sync. */
export async function start(root: HTMLElement, baseUrl: string,
                            dataset: string): Promise<ClientSession> {
  const client = new ApiClient(baseUrl);
  const created = await client.createSession(dataset);
  let documentText: string | null = null;

  const session = new ClientSession(client, created.body.sessionId, () => {
    void redraw();
  });
  const inspector = new InspectorController(session, () => documentText ?? "{}");

  async function redraw(): Promise<void> {
    const feed = await client.getSpec(session.sessionId);
    documentText = feed.status === 200 ? feed.body.document : null;
    const tree = renderApp(session.description, documentText, session.findings,
                           session, inspector);
    root.replaceChildren(mount(tree, root.ownerDocument));
  }

  await redraw();
  return session;
}
