import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/client.js";
import { findAll } from "../src/h.js";
import { renderInterface } from "../src/render.js";
import { ClientSession, valueInRange } from "../src/session.js";
import { Control, InteractionEvent, InterfaceDescription } from "../src/types.js";

const GOLDEN_DIR = join(__dirname, "..", "..", "fixtures", "goldens", "ifacedesc");

function golden(name: string): InterfaceDescription {
  return JSON.parse(readFileSync(join(GOLDEN_DIR, `${name}.json`), "utf-8"));
}

interface StubCall {
  url: string;
  method: string;
  payload?: Record<string, unknown>;
}

/** A stub server: POST /interaction bumps the revision and echoes a
 * description with the control's new value; everything else replays a
 * canned state. */
function stubServer(initial: InterfaceDescription) {
  const calls: StubCall[] = [];
  let current = initial;
  let conflictOnce = false;

  const fetchImpl: FetchLike = async (url, init) => {
    const payload = init?.body ? JSON.parse(init.body) : undefined;
    calls.push({ url, method: init?.method ?? "GET", payload });
    if (url.endsWith("/interaction")) {
      const event = payload as unknown as InteractionEvent;
      if (conflictOnce) {
        conflictOnce = false;
        return { status: 409,
                 json: async () => ({ error: { message: "stale" },
                                      currentRevision: current.revision }) };
      }
      if (event.revision !== current.revision) {
        return { status: 409,
                 json: async () => ({ error: { message: "stale" },
                                      currentRevision: current.revision }) };
      }
      current = {
        ...current,
        revision: current.revision + 1,
        controls: current.controls.map((c) =>
          c.controlId === event.controlId
            ? { ...c, currentValue: event.newValue } : c),
      };
      return { status: 200,
               json: async () => ({ revision: current.revision,
                                    interface: current, findings: [] }) };
    }
    if (url.endsWith("/interface")) {
      return { status: 200,
               json: async () => ({ revision: current.revision,
                                    interface: current }) };
    }
    throw new Error(`unexpected ${url}`);
  };
  return {
    calls,
    fetchImpl,
    armConflict: () => { conflictOnce = true; },
    interactions: () => calls.filter((c) => c.url.endsWith("/interaction")),
  };
}

function sliderOf(desc: InterfaceDescription): Control {
  return desc.controls.find((c) => c.controlType === "slider")!;
}

describe("client session", () => {
  it("a slider change posts exactly one event with the bound path", async () => {
    const desc = golden("barChart");
    const server = stubServer(desc);
    const session = new ClientSession(
      new ApiClient("http://stub", server.fetchImpl), "s1");
    session.revision = desc.revision;
    session.description = desc;
    const slider = sliderOf(desc);

    const outcome = await session.onControlChange(slider, -25);
    expect(outcome.accepted).toBe(true);
    const events = server.interactions();
    expect(events).toHaveLength(1);
    expect(events[0].payload?.controlId).toBe(slider.bindingPath);
    expect(events[0].payload?.newValue).toBe(-25);

    // the returned description re-renders with the new value
    const tree = renderInterface(session.description!);
    const control = findAll(tree, (n) =>
      n.attrs["data-control-id"] === slider.controlId)[0];
    const input = findAll(control, (n) => n.tag === "input")[0];
    expect(input.attrs.value).toBe("-25");
    expect(session.revision).toBe(desc.revision + 1);
  });

  it("out-of-range values are rejected client-side with no request", async () => {
    const desc = golden("barChart");
    const server = stubServer(desc);
    const session = new ClientSession(
      new ApiClient("http://stub", server.fetchImpl), "s1");
    session.revision = desc.revision;
    session.description = desc;
    const slider = sliderOf(desc);

    const outcome = await session.onControlChange(slider, (slider.max ?? 0) + 1);
    expect(outcome).toMatchObject({ accepted: false, rejectedLocally: true });
    expect(server.interactions()).toHaveLength(0);
    expect(session.notices.length).toBe(1);
  });

  it("dropdowns only accept listed options", () => {
    const desc = golden("barChart");
    const dropdown = desc.controls.find((c) => c.controlType === "dropdown")!;
    expect(valueInRange(dropdown, dropdown.options![0])).toBe(true);
    expect(valueInRange(dropdown, "Mars")).toBe(false);
  });

  it("conflicts refetch, notify, and replay without losing the intent",
     async () => {
    const desc = golden("barChart");
    const server = stubServer(desc);
    const session = new ClientSession(
      new ApiClient("http://stub", server.fetchImpl), "s1");
    session.revision = desc.revision;
    session.description = desc;
    server.armConflict();

    const outcome = await session.onControlChange(sliderOf(desc), -10);
    expect(outcome.accepted).toBe(true);
    expect(outcome.replayed).toBe(true);
    expect(server.interactions()).toHaveLength(2); // the conflict, the replay
    expect(session.notices.some((n) => n.includes("refreshed"))).toBe(true);
    expect(session.revision).toBe(desc.revision + 1);
  });

  it("server findings attach inline to the offending control", async () => {
    const desc = golden("inspectorSession");
    const finding = { category: "EC9", code: "invalidTop",
                      path: "experiments[1].top",
                      message: "'top' must be non-zero", severity: "nonFunctional" };
    const fetchImpl: FetchLike = async () => ({
      status: 422, json: async () => ({ findings: [finding] }) });
    const session = new ClientSession(new ApiClient("http://stub", fetchImpl),
                                      "s1");
    session.revision = desc.revision;
    session.description = desc;
    const top = desc.controls.find(
      (c) => c.bindingPath === "experiments[1].top")!;

    const outcome = await session.onControlChange(top, 1);
    expect(outcome.accepted).toBe(false);
    expect(session.inlineFindings[top.controlId]).toHaveLength(1);
    const tree = renderInterface(desc, [], {}, session.inlineFindings);
    const control = findAll(tree, (n) =>
      n.attrs["data-control-id"] === top.controlId)[0];
    const inline = findAll(control, (n) =>
      n.attrs.class === "inline-finding");
    expect(inline).toHaveLength(1);
    expect(JSON.stringify(inline[0].children)).toContain("experiments[1].top");
  });

  it("interactions queue one at a time", async () => {
    const desc = golden("barChart");
    const order: string[] = [];
    const server = stubServer(desc);
    const slowFetch: FetchLike = async (url, init) => {
      order.push("start");
      const result = await server.fetchImpl(url, init);
      order.push("end");
      return result;
    };
    const session = new ClientSession(new ApiClient("http://stub", slowFetch),
                                      "s1");
    session.revision = desc.revision;
    session.description = desc;
    const slider = sliderOf(desc);
    await Promise.all([
      session.onControlChange(slider, -10),
      session.onControlChange(slider, -20),
    ]);
    expect(order).toEqual(["start", "end", "start", "end"]);
    expect(session.revision).toBe(desc.revision + 2);
  });
});
