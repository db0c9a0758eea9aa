// Contract tests: view models built from recorded service payloads must
// mirror the server numbers exactly (the UI computes nothing itself).
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import type { SessionState, StepResponse } from "../src/types.js";
import { describeEvent, samePot, toViewModel } from "../src/viewmodel.js";

function fixture<T>(name: string): T {
  const path = join(__dirname, "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

describe("multiball session", () => {
  const initial = fixture<SessionState>("multiball_wc2022_initial");

  it("renders the 4x8 grid with the pinned host in place", () => {
    const vm = toViewModel(initial);
    expect(vm.groupLabels).toHaveLength(8);
    expect(vm.grid).toHaveLength(4);
    expect(vm.grid[0]![0]).toBe("Qatar");
    expect(vm.grid.flat().filter((t) => t !== null)).toHaveLength(1);
  });

  it("mirrors the bowl exactly: counts sum to M, indices pass through", () => {
    const vm = toViewModel(initial);
    const pending = initial.pending!;
    if (!("bowl" in pending)) throw new Error("expected a bowl");
    expect(vm.ballTotal).toBe(pending.M);
    const total = vm.bowl.reduce((acc, b) => acc + b.count, 0);
    expect(total).toBe(pending.M);
    const indices = vm.bowl.flatMap((b) => b.indices).sort((a, b) => a - b);
    expect(indices).toEqual(
      Array.from({ length: pending.M }, (_, i) => i + 1)
    );
    expect(vm.bowl).toEqual(pending.bowl);
    expect(vm.pendingSlot).toEqual(pending.slot);
    expect(vm.swapsRemaining).toBeNull();
  });

  it("reflects a pick step in grid and history", () => {
    const step = fixture<StepResponse>("multiball_wc2022_step");
    const vm = toViewModel(step.state);
    if (!("team" in step.event)) throw new Error("expected a ball event");
    const gi = vm.groupLabels.indexOf(step.event.slot.group!);
    expect(vm.grid[step.event.slot.pot - 1]![gi]).toBe(step.event.team);
    expect(vm.history).toHaveLength(1);
    expect(vm.history[0]).toContain(`ball ${step.event.picked_index}`);
    expect(vm.history[0]).toContain(step.event.team);
  });

  it("shows a finished draw as complete and valid with no bowl", () => {
    const done = fixture<SessionState>("multiball_wc2022_complete");
    const vm = toViewModel(done);
    expect(vm.complete).toBe(true);
    expect(vm.valid).toBe(true);
    expect(vm.bowl).toEqual([]);
    expect(vm.ballTotal).toBeNull();
    expect(vm.grid.flat().every((t) => t !== null)).toBe(true);
  });
});

describe("fifa-sequential session", () => {
  const initial = fixture<SessionState>("fifa_motivating_initial");

  it("shows one ball per remaining team and no target group", () => {
    const vm = toViewModel(initial);
    expect(vm.bowl.every((b) => b.count === 1)).toBe(true);
    expect(vm.ballTotal).toBe(vm.bowl.length);
    expect(vm.pendingSlot?.group).toBeNull();
  });
});

describe("metropolis session", () => {
  const initial = fixture<SessionState>("metropolis_wc2022_initial");
  const step = fixture<StepResponse>("metropolis_wc2022_step");

  it("starts from a full valid board with the server swap budget", () => {
    const vm = toViewModel(initial);
    expect(vm.valid).toBe(true);
    expect(vm.grid.flat().every((t) => t !== null)).toBe(true);
    const pending = initial.pending!;
    if (!("swaps_remaining" in pending)) throw new Error("expected swaps");
    expect(vm.swapsRemaining).toBe(pending.swaps_remaining);
    expect(vm.bowl).toEqual([]);
  });

  it("enforces the same-pot precheck from board rows only", () => {
    const vm = toViewModel(initial);
    const potTwo = vm.grid[1]!.filter((t): t is string => t !== null);
    expect(samePot(vm, potTwo[0]!, potTwo[1]!)).toBe(true);
    expect(samePot(vm, vm.grid[0]![0]!, potTwo[0]!)).toBe(false);
    expect(samePot(vm, "NotATeam", potTwo[0]!)).toBe(false);
  });

  it("describes swap outcomes from the event payload alone", () => {
    if (!("team_a" in step.event)) throw new Error("expected a swap event");
    const line = describeEvent(step.event);
    expect(line).toContain(step.event.team_a);
    expect(line).toContain(step.event.team_b);
    expect(line).toContain(step.event.accepted ? "accepted" : "rejected");
    const vm = toViewModel(step.state);
    expect(vm.swapsRemaining).toBe(step.event.swaps_remaining);
  });
});

describe("error payloads", () => {
  it("server rejections carry a human-readable detail string", () => {
    const err = fixture<{ status: number; body: { detail: string } }>(
      "error_cross_pot"
    );
    expect(err.status).toBe(422);
    expect(typeof err.body.detail).toBe("string");
    expect(err.body.detail.length).toBeGreaterThan(0);
  });
});
