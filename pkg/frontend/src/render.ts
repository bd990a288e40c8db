// Renders an interface description into a vnode tree. One widget per
// view and per control, in description order; the client performs no
// analysis math, it draws exactly the series the engine computed.

import { Handler, VNode, h } from "./h.js";
import { Control, Finding, InterfaceDescription, View } from "./types.js";

export interface RenderHooks {
  /** Exactly one event per user action on a control. */
  onControlChange?: (control: Control, newValue: unknown) => void;
}

export function fmt(value: unknown): string {
  if (typeof value === "number" && Number.isFinite(value)) {
    return Number(value.toPrecision(6)).toString();
  }
  return String(value);
}

function barRow(label: string, value: number, maxAbs: number, extra = ""): VNode {
  const width = maxAbs > 0 ? Math.round((Math.abs(value) / maxAbs) * 1000) / 10 : 0;
  return h("div", { class: "bar-row" + extra }, [
    h("span", { class: "bar-label" }, [label]),
    h("div", { class: "bar-track" }, [
      h("div", {
        class: "bar-fill" + (value < 0 ? " negative" : ""),
        style: `width:${width}%`,
      }),
    ]),
    h("span", { class: "bar-value" }, [fmt(value)]),
  ]);
}

function renderBarChart(view: View): VNode[] {
  const bars = (view.series.bars as { label: string; value: number }[]) ?? [];
  const maxAbs = Math.max(...bars.map((b) => Math.abs(b.value)), 0);
  const rows = bars.map((b) => barRow(b.label, b.value, maxAbs));
  if (typeof view.series.delta === "number") {
    rows.push(h("div", { class: "delta-note" },
                [`delta ${fmt(view.series.delta)}`]));
  }
  return rows;
}

function renderLineChart(view: View): VNode[] {
  const points = (view.series.points as { x: number; y: number }[]) ?? [];
  if (points.length === 0) return [h("div", { class: "empty" }, ["no points"])];
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x: number) => (x1 > x0 ? ((x - x0) / (x1 - x0)) * 100 : 50);
  const sy = (y: number) => (y1 > y0 ? 40 - ((y - y0) / (y1 - y0)) * 40 : 20);
  const path = points
    .map((p) => `${fmt(Math.round(sx(p.x) * 100) / 100)},${fmt(Math.round(sy(p.y) * 100) / 100)}`)
    .join(" ");
  return [
    h("svg", { class: "line-chart", viewBox: "0 0 100 40",
               "data-points": points.length }, [
      h("polyline", { fill: "none", points: path, stroke: "currentColor" }),
    ]),
    h("div", { class: "axis-note" },
      [`${String(view.series.sweptVariable)}: ${fmt(x0)} to ${fmt(x1)}`]),
  ];
}

function renderTable(view: View): VNode[] {
  const series = view.series as {
    rows?: Array<Record<string, unknown>>;
    columns?: string[];
    constraints?: Array<{ variable: string; operator: string; value: number }>;
    infeasible?: boolean;
    changedColumns?: string[];
    found?: boolean;
  };
  const out: VNode[] = [];
  if (series.infeasible) {
    out.push(h("div", { class: "infeasible-note" },
               ["no assignment satisfies the constraints"]));
  }
  const rows = series.rows ?? [];
  if (rows.length === 0) {
    out.push(h("div", { class: "empty" }, ["no rows"]));
  } else if ("assignment" in rows[0]) {
    const columns = series.columns ?? [];
    out.push(h("table", { class: "solutions" }, [
      h("thead", {}, [h("tr", {}, [
        ...columns.map((c) => h("th", {}, [c])),
        h("th", {}, ["achieved"]),
        h("th", {}, ["gap"]),
        h("th", {}, ["distance"]),
      ])]),
      h("tbody", {}, rows.map((row) => {
        const assignment = row.assignment as Record<string, number>;
        return h("tr", {}, [
          ...columns.map((c) => h("td", {}, [fmt(assignment[c])])),
          h("td", {}, [fmt(row.achievedOutput)]),
          h("td", {}, [fmt(row.gap)]),
          h("td", {}, [fmt(row.distanceFromBaseline)]),
        ]);
      })),
    ]));
  } else {
    // anchor vs counterfactual comparison
    const changed = new Set(series.changedColumns ?? []);
    const columns = Object.keys((rows[0].values as object) ?? {});
    out.push(h("table", { class: "comparison" }, [
      h("thead", {}, [h("tr", {}, [
        h("th", {}, ["row"]),
        ...columns.map((c) =>
          h("th", { class: changed.has(c) ? "changed" : "" }, [c])),
      ])]),
      h("tbody", {}, rows.map((row) =>
        h("tr", {}, [
          h("td", {}, [String(row.role)]),
          ...columns.map((c) => {
            const values = row.values as Record<string, unknown>;
            return h("td", { class: changed.has(c) ? "changed" : "" },
                     [fmt(values[c])]);
          }),
        ]))),
    ]));
  }
  return out;
}

function renderPredictionCard(view: View): VNode[] {
  const entries = Object.entries(view.series).filter(
    ([, v]) => v === null || typeof v !== "object");
  const items = entries.flatMap(([key, value]) => [
    h("dt", {}, [key]),
    h("dd", {}, [fmt(value)]),
  ]);
  const best = view.series.best as Record<string, unknown> | undefined;
  if (best) {
    items.push(h("dt", {}, ["best assignment"]));
    items.push(h("dd", {}, [JSON.stringify(best.assignment)]));
  }
  return [h("dl", { class: "prediction-card" }, items)];
}

function renderTornado(view: View): VNode[] {
  const bars = (view.series.bars as { label: string; value: number }[]) ?? [];
  const maxAbs = Math.max(...bars.map((b) => Math.abs(b.value)), 0);
  return bars.map((b) => barRow(b.label, b.value, maxAbs, " tornado"));
}

export function renderView(view: View): VNode {
  let body: VNode[];
  switch (view.viewType) {
    case "barChart":
      body = renderBarChart(view);
      break;
    case "lineChart":
      body = renderLineChart(view);
      break;
    case "smallMultiples":
      body = ((view.series.panels as View[]) ?? []).map(renderView);
      break;
    case "table":
      body = renderTable(view);
      break;
    case "predictionCard":
      body = renderPredictionCard(view);
      break;
    case "tornadoChart":
      body = renderTornado(view);
      break;
    default:
      // never a blank page: unknown views render a visible placeholder
      body = [h("div", { class: "placeholder" },
                [`unsupported view type: ${view.viewType}`])];
  }
  const outputVariable = typeof view.series.outputVariable === "string"
    ? view.series.outputVariable : "";
  return h("section", {
    class: `view view-${view.viewType}`,
    "data-experiment-path": view.experimentPath,
    "data-output-variable": outputVariable,
  }, [h("h3", {}, [view.title]), ...body]);
}

function controlHandler(control: Control, hooks: RenderHooks): Handler {
  return (raw) => {
    let value: unknown = raw;
    if (control.controlType === "slider" && typeof raw === "string") {
      value = Number(raw);
    }
    if (control.controlType === "dropdown" && typeof raw === "string") {
      // options keep their original types; map the DOM string back
      const match = (control.options ?? []).find((o) => String(o) === raw);
      value = match !== undefined ? match : raw;
    }
    hooks.onControlChange?.(control, value);
  };
}

export function renderControl(control: Control, hooks: RenderHooks,
                              inline: Finding[] = []): VNode {
  const children: Array<VNode | string> = [
    h("label", { for: control.controlId }, [control.label]),
  ];
  if (control.controlType === "slider") {
    children.push(h("input", {
      type: "range",
      id: control.controlId,
      min: fmt(control.min ?? 0),
      max: fmt(control.max ?? 100),
      step: fmt(control.step ?? 1),
      value: fmt(control.currentValue),
    }, [], { input: controlHandler(control, hooks) }));
    children.push(h("output", {}, [fmt(control.currentValue)]));
  } else if (control.controlType === "dropdown") {
    children.push(h("select", { id: control.controlId },
      (control.options ?? []).map((option) =>
        h("option", {
          value: String(option),
          selected: String(option) === String(control.currentValue),
        }, [String(option)])),
      { change: controlHandler(control, hooks) }));
  } else if (control.controlType === "scopeChip") {
    children.push(h("button", { class: "chip-dismiss", type: "button" }, ["×"],
      { click: () => hooks.onControlChange?.(control, null) }));
  } else if (control.controlType === "constraintControl") {
    // constraints stay visible: variable, direction, and bound
    children.push(h("span", { class: "constraint-bound" },
      [`${control.variable} ${control.operator} ${fmt(control.currentValue)}`]));
    if (control.min !== undefined) {
      children.push(h("input", {
        type: "range",
        id: control.controlId,
        min: fmt(control.min),
        max: fmt(control.max ?? 0),
        step: fmt(control.step ?? 1),
        value: fmt(control.currentValue),
      }, [], { input: controlHandler(control, hooks) }));
    }
  } else {
    children.push(h("span", { class: "placeholder" },
      [`unsupported control: ${control.controlType}`]));
  }
  for (const finding of inline) {
    children.push(h("div", { class: "inline-finding" }, [
      h("strong", {}, [finding.category]),
      ` at ${finding.path}: ${finding.message}`,
    ]));
  }
  return h("div", {
    class: `control control-${control.controlType}`,
    "data-binding-path": control.bindingPath,
    "data-control-id": control.controlId,
  }, children);
}

/** Pure function of (description, findings): same inputs, same tree. */
export function renderInterface(
  desc: InterfaceDescription,
  findings: Finding[] = [],
  hooks: RenderHooks = {},
  inlineByControl: Record<string, Finding[]> = {},
): VNode {
  const chips = desc.controls.filter((c) => c.controlType === "scopeChip");
  const others = desc.controls.filter((c) => c.controlType !== "scopeChip");
  return h("main", { class: "interface", "data-revision": desc.revision }, [
    h("div", { class: "scope-chips", "data-role": "scope-chips" },
      chips.map((c) => renderControl(c, hooks, inlineByControl[c.controlId]))),
    h("div", { class: "views" }, desc.views.map(renderView)),
    h("div", { class: "controls" },
      others.map((c) => renderControl(c, hooks, inlineByControl[c.controlId]))),
    h("aside", { class: "findings", "data-role": "findings" },
      findings.map((f) => h("div", { class: `finding ${f.severity}` },
        [`${f.category} ${f.path}: ${f.message}`]))),
  ]);
}
