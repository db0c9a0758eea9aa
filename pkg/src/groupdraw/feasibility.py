"""Validity, completability, and exact counting for partial draws.

Whether (and in how many ways) a partial draw can be completed depends
only on the region make-up of each group and the multiset of region tags
remaining in each pot, not on team identities.  All search here therefore
runs over canonicalized signatures: per-group packed integers plus
per-pot class-count vectors, memoized in caches shared across calls on
the same config instance.
"""

from __future__ import annotations

from typing import Optional

from .model import DrawConfig, PartialDraw

__all__ = [
    "InstanceTooLargeError",
    "check_immediate",
    "is_completable",
    "count_completions",
    "next_position_counts",
    "enumerate_valid",
]

# enumerate_valid refuses configs whose unconstrained search space exceeds this
ENUMERATION_GUARD = 10_000_000


class InstanceTooLargeError(ValueError):
    """Raised when exhaustive enumeration would be intractable."""


def _encode_sig(idx, mask: int, counts) -> int:
    """Pack a group's filled-pot bitmask and region counts into one int."""
    sig = mask
    shift = idx.n_pots
    for c in counts:
        sig |= c << shift
        shift += 4
    return sig


def _sig_counts(idx, sig: int) -> list[int]:
    shift = idx.n_pots
    return [(sig >> (shift + 4 * r)) & 0xF for r in range(idx.n_regions)]


class _State:
    """Mutable search state: group signatures + remaining class counts."""

    __slots__ = ("idx", "sigs", "rem", "infeasible")

    def __init__(self, partial: PartialDraw):
        idx = partial.config.index
        self.idx = idx
        self.infeasible = False
        work = partial
        # Force-place any still-pending pins so canonical sorting of group
        # signatures stays sound (pinned slots are not exchangeable).
        pending = [
            (t, p, g)
            for (p, g), t in idx.pin_at_slot.items()
            if partial.board[p][g] == -1
        ]
        if pending:
            work = partial.copy()
            for t, p, g in pending:
                if t in work.placed:
                    self.infeasible = True  # pin's team already placed elsewhere
                    return
                if not check_immediate(work.config, work, t, (p, g)):
                    self.infeasible = True
                    return
                work.place(t, p, g)
        # an already-violated maximum can never be repaired
        for g in range(idx.n_groups):
            for r in range(idx.n_regions):
                if work.group_counts[g][r] > idx.quota_max[r]:
                    self.infeasible = True
                    return
        self.sigs = [
            _encode_sig(idx, work.filled_mask[g], work.group_counts[g])
            for g in range(idx.n_groups)
        ]
        self.rem = []
        for p, ids in enumerate(idx.pot_team_ids):
            counts = [0] * len(idx.pot_classes[p])
            for t in ids:
                if t not in work.placed:
                    counts[idx.class_of[t]] += 1
            self.rem.append(counts)


def _prune_infeasible(idx, sigs, rem) -> bool:
    """Cheap necessary-condition checks; True means provably no completion.

    Per region: outstanding minimum-quota deficits must not exceed the
    remaining supply of teams carrying that region, and all remaining
    carriers must fit under the maximum quotas of groups with open slots.
    """
    n_pots = idx.n_pots
    full_mask = (1 << n_pots) - 1
    qmin = idx.quota_min
    qmax = idx.quota_max
    # supply[r] = remaining teams tagged r (dual-region teams count in each)
    supply = [0] * idx.n_regions
    for p, counts in enumerate(rem):
        for c, n in enumerate(counts):
            if n:
                for r in idx.pot_classes[p][c]:
                    supply[r] += n
    for r in range(idx.n_regions):
        deficit = 0
        capacity = 0
        for sig in sigs:
            mask = sig & full_mask
            open_slots = n_pots - bin(mask).count("1")
            cnt = (sig >> (n_pots + 4 * r)) & 0xF
            d = qmin[r] - cnt
            if d > 0:
                if d > open_slots:
                    return True
                deficit += d
            cap = qmax[r] - cnt
            capacity += min(cap, open_slots) if cap > 0 else 0
        if deficit > supply[r]:
            return True
        if supply[r] > capacity:
            return True
    return False


def _next_pot(rem) -> int:
    for p, counts in enumerate(rem):
        if any(counts):
            return p
    return -1


def _state_key(idx, sigs, rem) -> int:
    """Pack the canonical state into one int (compact dict key)."""
    sig_bits = idx.n_pots + 4 * idx.n_regions
    cnt_bits = max(4, idx.n_groups.bit_length())
    key = 0
    for s in sorted(sigs):
        key = (key << sig_bits) | s
    for counts in rem:
        for c in counts:
            key = (key << cnt_bits) | c
    return key


def _completable_rec(idx, sigs, rem, cache) -> bool:
    p = _next_pot(rem)
    if p < 0:
        # complete: minimum quotas must hold in every group
        for sig in sigs:
            for r in range(idx.n_regions):
                if (sig >> (idx.n_pots + 4 * r)) & 0xF < idx.quota_min[r]:
                    return False
        return True
    key = _state_key(idx, sigs, rem)
    hit = cache.get(key)
    if hit is not None:
        return hit
    # memoized exhaustive search; necessary-condition pruning measured
    # slower than cache hits on the warm path, so none is applied here
    result = False
    bit = 1 << p
    # fill the open group with the smallest signature (canonical choice)
    g_best, sig_best = -1, None
    for g, sig in enumerate(sigs):
        if not sig & bit and (sig_best is None or sig < sig_best):
            g_best, sig_best = g, sig
    counts = rem[p]
    qmax = idx.quota_max
    for c, n in enumerate(counts):
        if not n:
            continue
        regs = idx.pot_classes[p][c]
        new_sig = sig_best | bit
        ok = True
        for r in regs:
            cur = (new_sig >> (idx.n_pots + 4 * r)) & 0xF
            if cur + 1 > qmax[r]:
                ok = False
                break
            new_sig += 1 << (idx.n_pots + 4 * r)
        if not ok:
            continue
        sigs[g_best] = new_sig
        counts[c] = n - 1
        found = _completable_rec(idx, sigs, rem, cache)
        sigs[g_best] = sig_best
        counts[c] = n
        if found:
            result = True
            break
    cache[key] = result
    return result


def _count_rec(idx, sigs, rem, cache) -> int:
    p = _next_pot(rem)
    if p < 0:
        for sig in sigs:
            for r in range(idx.n_regions):
                if (sig >> (idx.n_pots + 4 * r)) & 0xF < idx.quota_min[r]:
                    return 0
        return 1
    key = _state_key(idx, sigs, rem)
    hit = cache.get(key)
    if hit is not None:
        return hit
    total = 0
    if not _prune_infeasible(idx, sigs, rem):
        bit = 1 << p
        g_best, sig_best = -1, None
        for g, sig in enumerate(sigs):
            if not sig & bit and (sig_best is None or sig < sig_best):
                g_best, sig_best = g, sig
        counts = rem[p]
        qmax = idx.quota_max
        for c, n in enumerate(counts):
            if not n:
                continue
            regs = idx.pot_classes[p][c]
            new_sig = sig_best | bit
            ok = True
            for r in regs:
                cur = (new_sig >> (idx.n_pots + 4 * r)) & 0xF
                if cur + 1 > qmax[r]:
                    ok = False
                    break
                new_sig += 1 << (idx.n_pots + 4 * r)
            if not ok:
                continue
            sigs[g_best] = new_sig
            counts[c] = n - 1
            # n distinct teams of this class could take the slot
            total += n * _count_rec(idx, sigs, rem, cache)
            sigs[g_best] = sig_best
            counts[c] = n
    cache[key] = total
    return total


def check_immediate(
    config: DrawConfig, partial: PartialDraw, team: int, slot: tuple[int, int]
) -> bool:
    """True iff placing ``team`` at ``slot`` violates no per-group maximum.

    The slot must be empty and the team unplaced and of the slot's pot.
    """
    idx = config.index
    p, g = slot
    assert partial.board[p][g] == -1, "slot already filled"
    assert team not in partial.placed, "team already placed"
    assert idx.pot_of[team] == p, "team is not in the slot's pot"
    gc = partial.group_counts[g]
    for r in idx.team_regions[team]:
        if gc[r] + 1 > idx.quota_max[r]:
            return False
    return True


def is_completable(config: DrawConfig, partial: PartialDraw) -> bool:
    """True iff at least one valid assignment extends ``partial``."""
    state = _State(partial)
    if state.infeasible:
        return False
    return _completable_rec(
        config.index, state.sigs, state.rem, config.index.completable_cache
    )


def count_completions(config: DrawConfig, partial: PartialDraw) -> int:
    """Exact number of valid assignments extending ``partial``."""
    state = _State(partial)
    if state.infeasible:
        return 0
    return _count_rec(config.index, state.sigs, state.rem, config.index.count_cache)


def _next_counts_by_team(
    config: DrawConfig, partial: PartialDraw, slot: tuple[int, int]
) -> dict[int, int]:
    """Per-team completion counts (team ids) for the next slot; zeros omitted."""
    idx = config.index
    p, g = slot
    assert partial.next_slot() == slot, "slot is not next in fill order"
    per_class: dict[int, int] = {}
    out: dict[int, int] = {}
    for t in idx.pot_team_ids[p]:
        if t in partial.placed:
            continue
        c = idx.class_of[t]
        if c not in per_class:
            if check_immediate(config, partial, t, slot):
                partial.place(t, p, g)
                per_class[c] = count_completions(config, partial)
                partial.unplace(p, g)
            else:
                per_class[c] = 0
        if per_class[c] > 0:
            out[t] = per_class[c]
    return out


def next_position_counts(
    config: DrawConfig, partial: PartialDraw, slot: tuple[int, int]
) -> dict[str, int]:
    """Completion counts keyed by team name for the next slot in fill order."""
    idx = config.index
    return {
        idx.teams[t].name: n
        for t, n in _next_counts_by_team(config, partial, slot).items()
    }


def enumerate_valid(config: DrawConfig) -> list[PartialDraw]:
    """Every valid assignment exactly once, in deterministic order.

    Guarded: refuses when the unconstrained assignment space (product of
    factorials of free slots per pot) exceeds ENUMERATION_GUARD.
    """
    idx = config.index
    space = 1
    for p, ids in enumerate(idx.pot_team_ids):
        free = len(ids) - sum(1 for t in ids if t in idx.pinned_slot_of_team)
        for k in range(2, free + 1):
            space *= k
        if space > ENUMERATION_GUARD:
            raise InstanceTooLargeError(
                f"unconstrained space exceeds {ENUMERATION_GUARD}"
            )
    start = PartialDraw.initial(config)
    order = [s for s in idx.fill_order if start.board[s[0]][s[1]] == -1]
    out: list[PartialDraw] = []

    def rec(i: int):
        if i == len(order):
            if start.is_valid_complete():
                out.append(start.copy())
            return
        p, g = order[i]
        for t in idx.pot_team_ids[p]:
            if t in start.placed:
                continue
            if not check_immediate(config, start, t, (p, g)):
                continue
            start.place(t, p, g)
            rec(i + 1)
            start.unplace(p, g)

    rec(0)
    return out
