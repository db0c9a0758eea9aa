"""Draw mechanisms.

Five ways of producing a complete assignment:

* ``rejection_draw`` — propose unconstrained assignments until one passes
  the quotas; exactly uniform over valid assignments.
* ``sequential_draw`` — ball-by-ball placement into the first acceptable
  group under an order policy; with the lexicographic policy this is the
  classic televised procedure (biased).
* ``uefa_variant_draw`` — club first, then a uniformly random acceptable
  group (also biased).
* ``metropolis_chain`` — valid-swap moves that preserve uniformity when
  started from a uniform assignment.
* ``multiple_rejection_draw`` — per-slot geometric "race" with win
  probability proportional to the exact completion counts; exactly uniform.

The rejection path is vectorized with numpy so that million-draw
experiments run in minutes on one core.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .feasibility import (
    _completable_rec,
    _encode_sig,
    check_immediate,
    next_position_counts,
)
from .model import DrawConfig, PartialDraw
from .rng import as_generator

__all__ = [
    "OrderPolicy",
    "SwapProposal",
    "GeometricRace",
    "RejectionBudgetError",
    "rejection_draw",
    "complete_uniform_batch",
    "sequential_draw",
    "uefa_variant_draw",
    "propose_swap",
    "metropolis_chain",
    "sample_geometric_lives",
    "multiple_rejection_select",
    "multiple_rejection_draw",
]


class RejectionBudgetError(RuntimeError):
    """Proposal budget exhausted without an accepted draw."""


@dataclass(frozen=True)
class OrderPolicy:
    """Group attempt order for sequential placement.

    * lexicographic: every drawn team tries groups in label order.
    * fixed(order): every drawn team tries groups in the given order.
    * uniform_random: every drawn team tries the still-open groups in a
      fresh uniformly random order.
    """

    kind: str
    order: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in ("lexicographic", "fixed", "uniform_random"):
            raise ValueError(f"unknown order policy {self.kind!r}")
        if self.kind == "fixed" and not self.order:
            raise ValueError("fixed policy needs an explicit group order")

    @classmethod
    def lexicographic(cls) -> "OrderPolicy":
        return cls("lexicographic")

    @classmethod
    def fixed(cls, order) -> "OrderPolicy":
        return cls("fixed", tuple(order))

    @classmethod
    def uniform_random(cls) -> "OrderPolicy":
        return cls("uniform_random")


@dataclass
class SwapProposal:
    pot_index: int
    team_a: str
    team_b: str
    accepted: bool
    group_a: str = ""
    group_b: str = ""


@dataclass
class GeometricRace:
    eligible: list[str]
    counts: dict[str, int]
    n_max: int
    lives: dict[str, int]
    picks: list[str] = field(default_factory=list)
    winner: Optional[str] = None


# ---------------------------------------------------------------------------
# rejection sampling (vectorized)
# ---------------------------------------------------------------------------

def _free_structure(partial: PartialDraw):
    """Per-pot arrays of unplaced team ids and their open group indices."""
    idx = partial.config.index
    free_teams, free_groups = [], []
    for p in range(idx.n_pots):
        ts = np.array(
            [t for t in idx.pot_team_ids[p] if t not in partial.placed],
            dtype=np.int64,
        )
        gs = np.array(
            [g for g in range(idx.n_groups) if partial.board[p][g] == -1],
            dtype=np.int64,
        )
        free_teams.append(ts)
        free_groups.append(gs)
    return free_teams, free_groups


def _packed_tables(idx):
    """uint64 region-count fields (8 bits per region) for SWAR validity.

    Falls back to None when the config has too many regions or quota
    values to fit the packed fields.
    """
    if idx.n_regions > 8 or int(idx.quota_max.max()) > 0x3F or idx.n_pots > 0x3F:
        return None
    shifts = (8 * np.arange(idx.n_regions, dtype=np.uint64))
    codes = (idx.region_matrix.astype(np.uint64) << shifts).sum(axis=1)
    qmin = (idx.quota_min.astype(np.uint64) << shifts).sum()
    qmax = (idx.quota_max.astype(np.uint64) << shifts).sum()
    guard = (np.uint64(0x40) << shifts).sum()
    return codes.astype(np.uint64), np.uint64(qmin), np.uint64(qmax), np.uint64(guard)


def _packed_for(idx):
    cached = getattr(idx, "_packed", "unset")
    if cached == "unset":
        cached = _packed_tables(idx)
        idx._packed = cached
    return cached


def _propose_chunk(idx, base_counts, free_teams, free_groups, size, gen):
    """Propose ``size`` unconstrained completions; return per-pot team
    matrices and the validity mask."""
    packed = _packed_for(idx)
    teams_by_pot = []
    if packed is not None:
        codes, qmin, qmax, guard = packed
        base = np.zeros(idx.n_groups, dtype=np.uint64)
        for g in range(idx.n_groups):
            for r in range(idx.n_regions):
                base[g] += np.uint64(base_counts[g, r]) << np.uint64(8 * r)
        counts = np.broadcast_to(base, (size, idx.n_groups)).copy()
        for p in range(idx.n_pots):
            k = len(free_teams[p])
            if k == 0:
                teams_by_pot.append(None)
                continue
            perm = np.argsort(gen.random((size, k)), axis=1)
            teams = free_teams[p][perm]
            vals = codes[teams]
            fg = free_groups[p]
            if len(fg) == idx.n_groups:
                counts += vals
            else:
                counts[:, fg] += vals
            teams_by_pot.append(teams)
        # guard-bit subtraction: a field's guard survives iff no underflow,
        # i.e. count >= min and count <= max in that region
        ge = ((counts | guard) - qmin) & guard
        le = ((qmax | guard) - counts) & guard
        valid = ((ge & le) == guard).all(axis=1)
        return teams_by_pot, valid

    counts = np.repeat(base_counts[None, :, :], size, axis=0)
    for p in range(idx.n_pots):
        k = len(free_teams[p])
        if k == 0:
            teams_by_pot.append(None)
            continue
        perm = np.argsort(gen.random((size, k)), axis=1)
        teams = free_teams[p][perm]
        counts[:, free_groups[p], :] += idx.region_matrix[teams]
        teams_by_pot.append(teams)
    valid = (
        (counts >= idx.quota_min) & (counts <= idx.quota_max)
    ).all(axis=(1, 2))
    return teams_by_pot, valid


# pots larger than this would need oversized permutation tables
_TABLE_MAX_FREE = 8


def _permutation_tables(idx, free_teams, free_groups):
    """Per-pot tables of every free-team permutation and its packed
    group-count contribution; None when the instance does not fit."""
    packed = _packed_for(idx)
    if packed is None:
        return None
    codes = packed[0]
    tables = []
    for p in range(idx.n_pots):
        k = len(free_teams[p])
        if k == 0:
            tables.append(None)
            continue
        if k > _TABLE_MAX_FREE:
            return None
        perms = np.array(
            list(itertools.permutations(range(k))), dtype=np.int64
        )
        vals = codes[free_teams[p]][perms]
        full = np.zeros((len(perms), idx.n_groups), dtype=np.uint64)
        full[:, free_groups[p]] = vals
        tables.append((perms, full))
    return tables


def _complete_tabled(
    idx, partial, free_teams, free_groups, tables, base_assign,
    n, gen, max_proposals,
):
    """Rejection loop drawing one table row per pot instead of sorting
    fresh permutations; same distribution, different random stream."""
    _, qmin, qmax, guard = _packed_for(idx)
    base = np.zeros(idx.n_groups, dtype=np.uint64)
    base_counts = np.array(partial.group_counts, dtype=np.int16)
    for g in range(idx.n_groups):
        for r in range(idx.n_regions):
            base[g] += np.uint64(base_counts[g, r]) << np.uint64(8 * r)

    out = np.empty((n, idx.n_teams), dtype=np.int8)
    out[:] = base_assign
    got = 0
    proposals = 0
    chunk = min(max(4 * n, 256), 1 << 17)
    while got < n:
        if max_proposals is not None:
            chunk = min(chunk, max_proposals - proposals)
            if chunk <= 0:
                raise RejectionBudgetError(
                    f"no {n} valid completions within {max_proposals} proposals"
                )
        counts = np.broadcast_to(base, (chunk, idx.n_groups)).copy()
        picks = []
        for p in range(idx.n_pots):
            if tables[p] is None:
                picks.append(None)
                continue
            perms, full = tables[p]
            ix = gen.integers(0, len(perms), size=chunk)
            counts += full[ix]
            picks.append(ix)
        ge = ((counts | guard) - qmin) & guard
        le = ((qmax | guard) - counts) & guard
        valid = ((ge & le) == guard).all(axis=1)
        rows = np.flatnonzero(valid)
        take = rows[: n - got]
        if got + len(take) == n:
            proposals += int(take[-1]) + 1
        else:
            proposals += chunk
        for p in range(idx.n_pots):
            if picks[p] is None:
                continue
            perms, _ = tables[p]
            sel = free_teams[p][perms[picks[p][take]]]
            np.put_along_axis(
                out[got : got + len(take)],
                sel,
                np.broadcast_to(
                    free_groups[p].astype(np.int8), sel.shape
                ),
                axis=1,
            )
        got += len(take)
        if got < n and valid.any():
            rate = max(valid.mean(), 1e-6)
            chunk = int(min(max((n - got) / rate * 1.2, 256), 1 << 17))
    return out, proposals


def _base_assignment(partial: PartialDraw) -> np.ndarray:
    idx = partial.config.index
    base = np.full(idx.n_teams, -1, dtype=np.int8)
    for p in range(idx.n_pots):
        for g, t in enumerate(partial.board[p]):
            if t != -1:
                base[t] = g
    return base


def complete_uniform_batch(
    config: DrawConfig,
    partial: Optional[PartialDraw],
    n: int,
    rng,
    max_proposals: Optional[int] = None,
    tabled: bool = False,
):
    """Draw ``n`` uniformly distributed valid completions of ``partial``.

    Returns (assign, proposals): ``assign[i, t]`` is the group index of
    team ``t`` in the i-th accepted completion, and ``proposals`` counts
    every unconstrained proposal made (accepted ones included).

    With ``tabled`` the per-pot permutations are enumerated once and each
    proposal picks table rows instead of sorting fresh random keys; the
    sampling distribution is identical but the random stream differs, so
    it is opt-in (worth it for large ``n`` on small pots).
    """
    idx = config.index
    gen = as_generator(rng)
    if partial is None:
        partial = PartialDraw.initial(config)
    free_teams, free_groups = _free_structure(partial)
    base_counts = np.array(partial.group_counts, dtype=np.int16)
    base_assign = _base_assignment(partial)

    if tabled:
        tables = _permutation_tables(idx, free_teams, free_groups)
        if tables is not None:
            return _complete_tabled(
                idx, partial, free_teams, free_groups, tables,
                base_assign, n, gen, max_proposals,
            )

    out = np.empty((n, idx.n_teams), dtype=np.int8)
    out[:] = base_assign
    got = 0
    proposals = 0
    chunk = min(max(4 * n, 256), 1 << 17)
    while got < n:
        if max_proposals is not None:
            chunk = min(chunk, max_proposals - proposals)
            if chunk <= 0:
                raise RejectionBudgetError(
                    f"no {n} valid completions within {max_proposals} proposals"
                )
        teams_by_pot, valid = _propose_chunk(
            idx, base_counts, free_teams, free_groups, chunk, gen
        )
        rows = np.flatnonzero(valid)
        take = rows[: n - got]
        if got + len(take) == n:
            # final chunk: proposals after the last accepted one never happened
            proposals += int(take[-1]) + 1
        else:
            proposals += chunk
        for p in range(idx.n_pots):
            if teams_by_pot[p] is None:
                continue
            sel = teams_by_pot[p][take]
            np.put_along_axis(
                out[got : got + len(take)],
                sel,
                np.broadcast_to(
                    free_groups[p].astype(np.int8), sel.shape
                ),
                axis=1,
            )
        got += len(take)
        # adapt the chunk to the observed acceptance rate
        if got < n and valid.any():
            rate = max(valid.mean(), 1e-6)
            chunk = int(min(max((n - got) / rate * 1.2, 256), 1 << 17))
    return out, proposals


def _assignment_from_row(config: DrawConfig, row: np.ndarray) -> PartialDraw:
    idx = config.index
    pd = PartialDraw(config)
    for t in range(idx.n_teams):
        pd.place(t, idx.pot_of[t], int(row[t]))
    return pd


def rejection_draw(
    config: DrawConfig, rng, max_proposals: Optional[int] = None
) -> tuple[PartialDraw, int]:
    """One exactly-uniform assignment plus the number of proposals used."""
    idx = config.index
    gen = as_generator(rng)
    partial = PartialDraw.initial(config)
    free_teams, free_groups = _free_structure(partial)
    base_counts = np.array(partial.group_counts, dtype=np.int16)

    consumed = 0
    chunk = 64
    while True:
        if max_proposals is not None:
            chunk = min(chunk, max_proposals - consumed)
            if chunk <= 0:
                raise RejectionBudgetError(
                    f"no valid draw within {max_proposals} proposals"
                )
        teams_by_pot, valid = _propose_chunk(
            idx, base_counts, free_teams, free_groups, chunk, gen
        )
        hit = np.flatnonzero(valid)
        if len(hit):
            i = int(hit[0])
            pd = partial.copy()
            for p in range(idx.n_pots):
                if teams_by_pot[p] is None:
                    continue
                for j, g in enumerate(free_groups[p]):
                    pd.place(int(teams_by_pot[p][i, j]), p, int(g))
            return pd, consumed + i + 1
        consumed += chunk
        chunk = min(chunk * 4, 1 << 16)


# ---------------------------------------------------------------------------
# sequential draws
# ---------------------------------------------------------------------------

class _SeqState:
    """Signature/pool mirror of a PartialDraw for fast completability checks."""

    __slots__ = ("idx", "sigs", "rem", "cache")

    def __init__(self, partial: PartialDraw):
        idx = partial.config.index
        self.idx = idx
        self.sigs = [
            _encode_sig(idx, partial.filled_mask[g], partial.group_counts[g])
            for g in range(idx.n_groups)
        ]
        self.rem = []
        for p, ids in enumerate(idx.pot_team_ids):
            counts = [0] * len(idx.pot_classes[p])
            for t in ids:
                if t not in partial.placed:
                    counts[idx.class_of[t]] += 1
            self.rem.append(counts)
        self.cache = idx.completable_cache

    def try_place(self, pot: int, group: int, cls: int) -> bool:
        """Tentatively place one team of class ``cls``; keep the placement
        and return True iff the result is still completable."""
        idx = self.idx
        sig = self.sigs[group]
        new_sig = sig | (1 << pot)
        for r in idx.pot_classes[pot][cls]:
            shift = idx.n_pots + 4 * r
            if ((new_sig >> shift) & 0xF) + 1 > idx.quota_max[r]:
                return False
            new_sig += 1 << shift
        self.sigs[group] = new_sig
        self.rem[pot][cls] -= 1
        if _completable_rec(idx, self.sigs, self.rem, self.cache):
            return True
        self.sigs[group] = sig
        self.rem[pot][cls] += 1
        return False

    def completable(self) -> bool:
        return _completable_rec(self.idx, self.sigs, self.rem, self.cache)


def _policy_attempts(policy: OrderPolicy, idx, gen) -> list[int]:
    if policy.kind == "lexicographic":
        return list(range(idx.n_groups))
    if policy.kind == "fixed":
        return [idx.group_id[g] for g in policy.order]
    return list(gen.permutation(idx.n_groups))


def sequential_draw(
    config: DrawConfig, policy: Optional[OrderPolicy] = None, rng=None
) -> PartialDraw:
    """Draw teams pot by pot and place each in the first acceptable group.

    Teams are drawn uniformly without replacement from each pot; a group is
    acceptable when the placement passes the immediate quota check and the
    rest of the draw can still be completed.  The lexicographic policy is
    the classic televised procedure.
    """
    policy = policy or OrderPolicy.lexicographic()
    idx = config.index
    gen = as_generator(rng)
    pd = PartialDraw.initial(config)
    st = _SeqState(pd)
    if not st.completable():
        raise ValueError("config admits no valid assignment")
    for p in range(idx.n_pots):
        free = [t for t in idx.pot_team_ids[p] if t not in pd.placed]
        if not free:
            continue
        bit = 1 << p
        for i in gen.permutation(len(free)):
            t = free[i]
            c = idx.class_of[t]
            placed = False
            for g in _policy_attempts(policy, idx, gen):
                if st.sigs[g] & bit:
                    continue
                if st.try_place(p, g, c):
                    pd.place(t, p, g)
                    placed = True
                    break
            if not placed:  # unreachable: completability held before this team
                raise AssertionError("no acceptable group found")
    return pd


def uefa_variant_draw(config: DrawConfig, rng=None) -> PartialDraw:
    """Club-first variant: draw a team, then pick uniformly among the open
    groups where placing it leaves the draw completable."""
    idx = config.index
    gen = as_generator(rng)
    pd = PartialDraw.initial(config)
    st = _SeqState(pd)
    if not st.completable():
        raise ValueError("config admits no valid assignment")
    for p in range(idx.n_pots):
        free = [t for t in idx.pot_team_ids[p] if t not in pd.placed]
        if not free:
            continue
        bit = 1 << p
        for i in gen.permutation(len(free)):
            t = free[i]
            c = idx.class_of[t]
            candidates = []
            for g in range(idx.n_groups):
                if st.sigs[g] & bit:
                    continue
                if st.try_place(p, g, c):
                    candidates.append(g)
                    # undo: candidate collection must not commit
                    sig = st.sigs[g]
                    st.sigs[g] = _strip_class(idx, sig, p, c)
                    st.rem[p][c] += 1
            if not candidates:
                raise AssertionError("no acceptable group found")
            g = candidates[int(gen.integers(len(candidates)))]
            ok = st.try_place(p, g, c)
            assert ok
            pd.place(t, p, g)
    return pd


def _strip_class(idx, sig: int, pot: int, cls: int) -> int:
    sig &= ~(1 << pot)
    for r in idx.pot_classes[pot][cls]:
        sig -= 1 << (idx.n_pots + 4 * r)
    return sig


# ---------------------------------------------------------------------------
# Metropolis swaps
# ---------------------------------------------------------------------------

def propose_swap(
    assignment: PartialDraw, pot_index: int, team_a: str, team_b: str
) -> SwapProposal:
    """Test swapping two same-pot teams; mutate the assignment iff valid.

    Validity needs only the per-group quota windows of the two affected
    groups (the assignment stays complete, so nothing downstream can break).
    """
    config = assignment.config
    idx = config.index
    ta, tb = idx.team_id[team_a], idx.team_id[team_b]
    if ta == tb:
        raise ValueError("cannot swap a team with itself")
    if idx.pot_of[ta] != pot_index or idx.pot_of[tb] != pot_index:
        raise ValueError("both teams must belong to the given pot")
    if ta in idx.pinned_slot_of_team or tb in idx.pinned_slot_of_team:
        raise ValueError("pinned teams cannot be swapped")
    ga = assignment.group_of(ta)
    gb = assignment.group_of(tb)
    proposal = SwapProposal(
        pot_index=pot_index,
        team_a=team_a,
        team_b=team_b,
        accepted=False,
        group_a=config.groups[ga],
        group_b=config.groups[gb],
    )
    regs_a, regs_b = idx.team_regions[ta], idx.team_regions[tb]
    ok = True
    for g, out_regs, in_regs in ((ga, regs_a, regs_b), (gb, regs_b, regs_a)):
        counts = assignment.group_counts[g][:]
        for r in out_regs:
            counts[r] -= 1
        for r in in_regs:
            counts[r] += 1
        for r in range(idx.n_regions):
            if not (idx.quota_min[r] <= counts[r] <= idx.quota_max[r]):
                ok = False
                break
        if not ok:
            break
    if ok:
        assignment.unplace(pot_index, ga)
        assignment.unplace(pot_index, gb)
        assignment.place(ta, pot_index, gb)
        assignment.place(tb, pot_index, ga)
        proposal.accepted = True
    return proposal


def _swappable_teams(idx, pot: int) -> list[int]:
    return [
        t for t in idx.pot_team_ids[pot] if t not in idx.pinned_slot_of_team
    ]


def metropolis_chain(
    config: DrawConfig,
    start: PartialDraw,
    k: int,
    rng=None,
    pot_schedule: str = "cycle",
) -> tuple[PartialDraw, list[SwapProposal]]:
    """Run ``k`` swap moves from a valid complete assignment.

    Pots are visited cyclically by default ("random" picks a pot uniformly
    each move); pots without two swappable teams are skipped.  Started from
    a uniform assignment, the output stays uniform for every k.
    """
    if not start.is_valid_complete():
        raise ValueError("start must be a valid complete assignment")
    if pot_schedule not in ("cycle", "random"):
        raise ValueError(f"unknown pot schedule {pot_schedule!r}")
    idx = config.index
    gen = as_generator(rng)
    current = start.copy()
    pots = [p for p in range(idx.n_pots) if len(_swappable_teams(idx, p)) >= 2]
    if not pots:
        return current, []
    trace: list[SwapProposal] = []
    for step in range(k):
        if pot_schedule == "cycle":
            p = pots[step % len(pots)]
        else:
            p = pots[int(gen.integers(len(pots)))]
        eligible = _swappable_teams(idx, p)
        i, j = gen.choice(len(eligible), size=2, replace=False)
        a = idx.teams[eligible[int(i)]].name
        b = idx.teams[eligible[int(j)]].name
        trace.append(propose_swap(current, p, a, b))
    return current, trace


# ---------------------------------------------------------------------------
# multiple rejections (geometric race)
# ---------------------------------------------------------------------------

def sample_geometric_lives(counts: dict[str, int], rng=None) -> dict[str, int]:
    """Lives G ~ Geometric(n / n_max) per team, trials-until-success.

    Sampled by inversion (ceil(log(1-u) / log(1-q))) so sequences are
    reproducible across platforms.  G = 1 deterministically at n = n_max.
    """
    if not counts:
        raise ValueError("counts must be non-empty")
    if any(n <= 0 for n in counts.values()):
        raise ValueError("all counts must be positive")
    gen = as_generator(rng)
    n_max = max(counts.values())
    lives = {}
    for team, n in counts.items():
        if n == n_max:
            lives[team] = 1
        else:
            q = n / n_max
            u = float(gen.random())
            lives[team] = max(1, math.ceil(math.log1p(-u) / math.log1p(-q)))
    return lives


def multiple_rejection_select(
    config: DrawConfig, partial: PartialDraw, slot: tuple[int, int], rng=None
) -> tuple[str, GeometricRace]:
    """Pick the next slot's team by racing uniform picks against lives.

    Teams are picked uniformly (with replacement) from the eligible set
    until one reaches its sampled life count; that team wins with
    probability proportional to its completion count.
    """
    gen = as_generator(rng)
    counts = next_position_counts(config, partial, slot)
    if not counts:
        raise ValueError("slot has no feasible team")
    eligible = sorted(counts)
    lives = sample_geometric_lives({t: counts[t] for t in eligible}, gen)
    race = GeometricRace(
        eligible=eligible,
        counts=dict(counts),
        n_max=max(counts.values()),
        lives=lives,
    )
    if len(eligible) == 1:
        race.winner = eligible[0]
        race.picks.append(eligible[0])
        return eligible[0], race
    tally = {t: 0 for t in eligible}
    while race.winner is None:
        t = eligible[int(gen.integers(len(eligible)))]
        race.picks.append(t)
        tally[t] += 1
        if tally[t] == lives[t]:
            race.winner = t
    return race.winner, race


def multiple_rejection_draw(
    config: DrawConfig, rng=None
) -> tuple[PartialDraw, list[GeometricRace]]:
    """Fill every slot with the geometric-race selector; exactly uniform."""
    idx = config.index
    gen = as_generator(rng)
    pd = PartialDraw.initial(config)
    races = []
    while not pd.is_complete():
        slot = pd.next_slot()
        name, race = multiple_rejection_select(config, pd, slot, gen)
        pd.place(idx.team_id[name], *slot)
        races.append(race)
    return pd, races
