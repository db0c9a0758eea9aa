import type {
  BowlEntry,
  HistoryEvent,
  PendingBowl,
  SessionState,
  SlotRef,
  SwapEvent,
} from "./types.js";

export interface BoardViewModel {
  method: string;
  seed: number;
  complete: boolean;
  valid: boolean;
  groupLabels: string[];
  grid: (string | null)[][]; // [pot][group], same order as groupLabels
  potOf: Record<string, number>; // placed team -> 0-based pot row
  pendingSlot: SlotRef | null;
  bowl: BowlEntry[];
  ballTotal: number | null; // M straight from the server
  swapsRemaining: number | null;
  history: string[];
}

function isSwapEvent(ev: HistoryEvent): ev is SwapEvent {
  return "team_a" in ev;
}

export function describeEvent(ev: HistoryEvent): string {
  if (isSwapEvent(ev)) {
    const pair = `${ev.team_a} (${ev.group_a}) ↔ ${ev.team_b} (${ev.group_b})`;
    return ev.accepted ? `swap ${pair}: accepted` : `swap ${pair}: rejected`;
  }
  return `ball ${ev.picked_index}: ${ev.team} → group ${ev.slot.group}`;
}

export function toViewModel(state: SessionState): BoardViewModel {
  const groupLabels = Object.keys(state.groups);
  const first = groupLabels[0];
  const nPots = first === undefined ? 0 : state.groups[first]!.length;
  const grid: (string | null)[][] = [];
  const potOf: Record<string, number> = {};
  for (let p = 0; p < nPots; p++) {
    const row = groupLabels.map((g) => state.groups[g]![p] ?? null);
    row.forEach((team) => {
      if (team !== null) potOf[team] = p;
    });
    grid.push(row);
  }
  const pending = state.pending;
  const hasBowl = pending !== null && "bowl" in pending;
  const bowlPending = hasBowl ? (pending as PendingBowl) : null;
  return {
    method: state.method,
    seed: state.seed,
    complete: state.complete,
    valid: state.valid,
    groupLabels,
    grid,
    potOf,
    pendingSlot: bowlPending ? bowlPending.slot : null,
    bowl: bowlPending ? bowlPending.bowl : [],
    ballTotal: bowlPending ? bowlPending.M : null,
    swapsRemaining:
      pending !== null && "swaps_remaining" in pending
        ? pending.swaps_remaining
        : null,
    history: state.history.map(describeEvent),
  };
}

/** Client-side precheck for swap pairs; the server still validates. */
export function samePot(vm: BoardViewModel, teamA: string, teamB: string): boolean {
  const a = vm.potOf[teamA];
  const b = vm.potOf[teamB];
  return a !== undefined && a === b;
}
