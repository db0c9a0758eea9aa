// Mirrors of the service JSON payloads. The UI never computes any of
// these numbers itself; it only displays what the server sent.

export interface SlotRef {
  pot: number; // 1-based
  group: string | null; // null when the rules decide the group
}

export interface BowlEntry {
  team: string;
  count: number;
  indices: number[]; // 1-based ball indices
}

export interface PendingBowl {
  slot: SlotRef;
  M: number;
  bowl: BowlEntry[];
  gcd_reduced?: boolean;
}

export interface PendingSwaps {
  swaps_remaining: number;
}

export type Pending = PendingBowl | PendingSwaps | null;

export interface BallEvent {
  action: string;
  picked_index: number;
  team: string;
  slot: SlotRef;
  M?: number;
}

export interface SwapEvent {
  action: string;
  team_a: string;
  team_b: string;
  accepted: boolean;
  group_a: string;
  group_b: string;
  swaps_remaining: number;
}

export type HistoryEvent = BallEvent | SwapEvent;

export interface SessionState {
  id: string;
  method: string;
  seed: number;
  complete: boolean;
  groups: Record<string, (string | null)[]>; // group label -> team per pot
  valid: boolean;
  pending: Pending;
  history: HistoryEvent[];
}

export interface StepResponse {
  event: HistoryEvent;
  state: SessionState;
}

export interface PresetsResponse {
  presets: string[];
  methods: string[];
}
