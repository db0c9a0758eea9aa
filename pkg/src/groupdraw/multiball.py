"""Exactly uniform draws by allocating multiple balls per team.

For each slot, estimate every candidate's conditional placement
probability from uniformly sampled completions, convert the estimates to
an integer number of balls via stratified rounding, and select one ball
uniformly.  Conditioning on the estimates cancels exactly, so the final
assignment is uniform over valid draws for any estimation sample size.

All ratios (r_j, u_j, v_j) are exact rationals; floating point would
misplace residual balls at stratum boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .feasibility import is_completable
from .model import DrawConfig, PartialDraw
from .rng import as_generator
from .samplers import complete_uniform_batch

__all__ = [
    "DEFAULT_M_MAX",
    "EstimatedWeights",
    "BallAllocation",
    "MDistribution",
    "SlotRecord",
    "estimate_weights",
    "allocate_balls",
    "select_ball",
    "multiball_full_draw",
    "m_distribution",
    "m_tail",
]

# In practice the uncapped ball total per slot is rarely above 16, but a
# hard cap keeps a televised bowl manageable even on unlucky estimates.
DEFAULT_M_MAX = 20

# below this, building per-pot permutation tables costs more than it saves
TABLED_MIN_N = 4096


@dataclass(frozen=True)
class EstimatedWeights:
    """Per-team placement weight estimates for one slot.

    ``counts[j]`` completions out of ``n`` placed ``teams[j]`` at the
    slot; ``weights[j]`` is the (possibly region-averaged) estimate as an
    exact fraction.  Weights always sum to exactly 1.
    """

    teams: tuple[str, ...]
    counts: tuple[int, ...]
    n: int
    weights: tuple[Fraction, ...]
    averaged_by_region: bool

    def __post_init__(self):
        assert sum(self.weights) == 1, "weights must sum to 1"


@dataclass(frozen=True)
class BallAllocation:
    """Integer ball counts realizing estimated weights exactly.

    ``m[j]`` balls for ``teams[j]``, ``m_total`` in all.  The
    intermediates (r, a, u, v, k, b, residual_draws) record the
    stratified rounding before any gcd reduction, so a transcript can be
    audited step by step.
    """

    teams: tuple[str, ...]
    weights: tuple[Fraction, ...]
    m_total: int
    r: tuple[Fraction, ...]
    a: tuple[int, ...]
    u: tuple[Fraction, ...]
    v: tuple[Fraction, ...]  # cumulative residuals, v[0] = 0, v[-1] = k
    k: int
    b: tuple[int, ...]
    m: tuple[int, ...]
    residual_draws: tuple[float, ...]
    m_max: Optional[int]
    gcd_reduced: bool

    @property
    def ball_teams(self) -> tuple[str, ...]:
        """Ball index (0-based) -> owning team.

        Convention: one entry per floor ball, team by team in pot order,
        then the residual balls in team order.  After gcd reduction the
        floor/residual split is gone, so balls are listed team by team.
        """
        if self.gcd_reduced:
            out = []
            for t, mj in zip(self.teams, self.m):
                out.extend([t] * mj)
            return tuple(out)
        floors = []
        for t, aj in zip(self.teams, self.a):
            floors.extend([t] * aj)
        residuals = []
        for t, bj in zip(self.teams, self.b):
            residuals.extend([t] * bj)
        return tuple(floors + residuals)

    def owner(self, index: int) -> str:
        """Team owning ball ``index`` (1-based)."""
        if not 1 <= index <= self.m_total:
            raise IndexError(f"ball index {index} not in 1..{self.m_total}")
        return self.ball_teams[index - 1]

    def ball_counts(self) -> dict[str, int]:
        return {t: mj for t, mj in zip(self.teams, self.m)}


def estimate_weights(
    config: DrawConfig,
    partial: PartialDraw,
    slot: tuple[int, int],
    n: int,
    rng=None,
    average_by_region: bool = True,
) -> EstimatedWeights:
    """Estimate each candidate's placement probability at ``slot``.

    Samples ``n`` uniform completions of ``partial`` by rejection and
    tallies who lands at the slot; the tally fractions are unbiased for
    the true conditional probabilities.  With ``average_by_region`` the
    estimate is pooled across candidates of the same region class, which
    reduces variance without introducing bias.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if partial.next_slot() != slot:
        raise ValueError(f"slot {slot} is not next in fill order")
    if not is_completable(config, partial):
        raise ValueError("partial draw has no valid completion")
    idx = config.index
    p, g = slot
    candidates = [t for t in idx.pot_team_ids[p] if t not in partial.placed]
    # table-driven proposals pay off once n amortizes the table build
    assign, _ = complete_uniform_batch(
        config, partial, n, rng, tabled=n >= TABLED_MIN_N
    )
    counts = [int(np.count_nonzero(assign[:, t] == g)) for t in candidates]
    if average_by_region:
        by_class: dict[int, list[int]] = {}
        for i, t in enumerate(candidates):
            by_class.setdefault(idx.class_of[t], []).append(i)
        weights = [Fraction(0)] * len(candidates)
        for members in by_class.values():
            w = Fraction(sum(counts[i] for i in members), n * len(members))
            for i in members:
                weights[i] = w
    else:
        weights = [Fraction(c, n) for c in counts]
    return EstimatedWeights(
        teams=tuple(idx.teams[t].name for t in candidates),
        counts=tuple(counts),
        n=n,
        weights=tuple(weights),
        averaged_by_region=average_by_region,
    )


def allocate_balls(
    weights: EstimatedWeights,
    m_max: Optional[int] = DEFAULT_M_MAX,
    gcd_reduce: bool = True,
    rng=None,
) -> BallAllocation:
    """Turn weight estimates into ball counts with exact proportions.

    The total M is the ceiling of the largest reciprocal nonzero weight
    (capped at ``m_max`` when given, so a team with a very small weight
    may end up with zero balls).  Each team gets floor(M * w_j) balls;
    the fractional leftovers are awarded by stratified sampling, one
    uniform point per unit of total leftover, so conditional on the
    weights each team's selection probability is exactly w_j.
    """
    w = weights.weights
    nonzero = [x for x in w if x > 0]
    if not nonzero:
        raise ValueError("all weights are zero")
    if m_max is not None and m_max < 1:
        raise ValueError("m_max must be at least 1")
    m_total = max(math.ceil(1 / x) for x in nonzero)
    if m_max is not None:
        m_total = min(m_max, m_total)
    r = [m_total * x for x in w]
    a = [math.floor(x) for x in r]
    u = [x - f for x, f in zip(r, a)]
    v = [Fraction(0)]
    for x in u:
        v.append(v[-1] + x)
    k = m_total - sum(a)
    assert v[-1] == k, "residual mass must be integral"
    gen = as_generator(rng) if k > 0 else None
    b = [0] * len(w)
    draws = []
    for i in range(k):
        # one uniform point per unit stratum [i, i+1)
        point = i + gen.random()
        draws.append(point)
        frac = Fraction(point)
        j = 0
        while not (v[j] <= frac < v[j + 1]):
            j += 1
        b[j] += 1
    m = [aj + bj for aj, bj in zip(a, b)]
    reduced = False
    if gcd_reduce:
        g = math.gcd(*m)
        if g > 1:
            m = [mj // g for mj in m]
            m_total //= g
            reduced = True
    return BallAllocation(
        teams=weights.teams,
        weights=w,
        m_total=m_total,
        r=tuple(r),
        a=tuple(a),
        u=tuple(u),
        v=tuple(v),
        k=k,
        b=tuple(b),
        m=tuple(m),
        residual_draws=tuple(draws),
        m_max=m_max,
        gcd_reduced=reduced,
    )


def select_ball(
    allocation: BallAllocation, choice: Union[int, object, None] = None
) -> str:
    """Pick a ball and return the owning team's name.

    ``choice`` is either an explicit 1-based ball index (a human pick)
    or anything ``as_generator`` accepts, in which case the ball is
    chosen uniformly at random.
    """
    if isinstance(choice, int) and not isinstance(choice, bool):
        return allocation.owner(choice)
    gen = as_generator(choice) if choice is not None else as_generator(
        np.random.default_rng()
    )
    index = int(gen.integers(1, allocation.m_total + 1))
    return allocation.owner(index)


@dataclass(frozen=True)
class SlotRecord:
    """Audit record of one slot's estimation, allocation, and pick."""

    pot: int  # 1-based, matching config files
    group: str
    weights: EstimatedWeights
    allocation: BallAllocation
    picked_index: int
    selected: str

    def to_json(self) -> dict:
        w = self.weights
        return {
            "slot": {"pot": self.pot, "group": self.group},
            "N": w.n,
            "counts": dict(zip(w.teams, w.counts)),
            "weights": {
                t: f"{f.numerator}/{f.denominator}"
                for t, f in zip(w.teams, w.weights)
            },
            "M": self.allocation.m_total,
            "balls": self.allocation.ball_counts(),
            "residual_draws": list(self.allocation.residual_draws),
            "selected": self.selected,
            "picked_index": self.picked_index,
        }


def multiball_full_draw(
    config: DrawConfig,
    n_est: int = 10_000,
    m_max: Optional[int] = DEFAULT_M_MAX,
    rng=None,
    average_by_region: bool = True,
    gcd_reduce: bool = True,
) -> tuple[PartialDraw, list[SlotRecord]]:
    """Run a complete draw, one ball selection per slot.

    Returns the assignment and a per-slot transcript.  The assignment is
    exactly uniform over valid draws regardless of ``n_est``; larger
    values only make the per-slot ball counts more predictable.
    """
    gen = as_generator(rng) if rng is not None else as_generator(
        np.random.default_rng()
    )
    idx = config.index
    partial = PartialDraw.initial(config)
    transcript: list[SlotRecord] = []
    while (slot := partial.next_slot()) is not None:
        weights = estimate_weights(
            config, partial, slot, n_est, gen, average_by_region
        )
        allocation = allocate_balls(weights, m_max, gcd_reduce, gen)
        picked = int(gen.integers(1, allocation.m_total + 1))
        team_name = allocation.owner(picked)
        p, g = slot
        partial.place(idx.team_id[team_name], p, g)
        transcript.append(
            SlotRecord(
                pot=p + 1,
                group=config.groups[g],
                weights=weights,
                allocation=allocation,
                picked_index=picked,
                selected=team_name,
            )
        )
    return partial, transcript


@dataclass(frozen=True)
class MDistribution:
    """Distribution of the per-slot ball total M for given true weights.

    Exact probabilities are Fractions; Monte Carlo estimates are floats
    with ``standard_error`` giving the per-mass standard error.
    """

    pmf: dict[int, Union[Fraction, float]]
    n: int
    m_max: Optional[int]
    exact: bool
    samples: Optional[int] = None

    def prob_at_most(self, m: int):
        return sum(p for mm, p in self.pmf.items() if mm <= m)

    def prob_greater(self, m: int):
        return sum(p for mm, p in self.pmf.items() if mm > m)

    def standard_error(self, m: int) -> float:
        assert not self.exact, "exact distributions have no sampling error"
        p = float(self.pmf.get(m, 0.0))
        return math.sqrt(p * (1 - p) / self.samples)


def _restricted_sum(n: int, qs: list[int], q_rest: int, lo: int, hi: int) -> int:
    """Sum of multinomial weight numerators with each listed category's
    count in [lo, hi] and the remainder aggregated into one category.

    Categories have integer weight numerators ``qs`` (listed) and
    ``q_rest`` (aggregate); the returned integer, divided by the common
    denominator to the n-th power, is the probability of the event.
    """
    # f[s] = weighted ways the listed categories so far total s draws
    f = {0: 1}
    for q in qs:
        qm = {m: q**m for m in range(lo, hi + 1)}
        nxt: dict[int, int] = {}
        for s, ways in f.items():
            for m in range(lo, min(hi, n - s) + 1):
                add = ways * math.comb(n - s, m) * qm[m]
                key = s + m
                nxt[key] = nxt.get(key, 0) + add
        f = nxt
        if not f:
            return 0
    return sum(ways * q_rest ** (n - s) for s, ways in f.items())


def _min_nonzero_at_least(n: int, qs: list[int], c: int) -> Fraction:
    """P(every category count is 0 or >= c) for multinomial(n, qs/sum).

    Inclusion-exclusion over the set of categories with count in
    [1, c-1]; categories outside the set collapse into one aggregate, so
    each term costs O(|set| * c * n) integer operations instead of a
    full multivariate convolution.
    """
    if c <= 1:
        return Fraction(1)
    total_q = sum(qs)
    j = len(qs)
    acc = 0
    for mask in range(1 << j):
        listed = [qs[i] for i in range(j) if mask >> i & 1]
        q_rest = total_q - sum(listed)
        term = _restricted_sum(n, listed, q_rest, 1, c - 1)
        acc += -term if len(listed) % 2 else term
    return Fraction(acc, total_q**n)


# Exact mode bails out beyond these sizes; the subset enumeration in
# _min_nonzero_at_least is exponential in the category count.
_EXACT_MAX_CATEGORIES = 10
_EXACT_MAX_N = 2000


def m_tail(
    weights: Sequence[Union[Fraction, float, int]], n: int, m: int
) -> tuple[Fraction, Fraction]:
    """Exact (P(M <= m), P(M > m)) without building the full pmf.

    Needs a single threshold evaluation, so it stays fast where
    m_distribution's exact path would grind through every threshold.
    """
    fracs = [Fraction(w) for w in weights]
    if sum(fracs) != 1:
        raise ValueError("weights must sum to 1")
    fracs = [f for f in fracs if f > 0]
    den = math.lcm(*(f.denominator for f in fracs))
    qs = [int(f * den) for f in fracs]
    if len(qs) == 1:
        at_most = Fraction(1) if m >= 1 else Fraction(0)
    else:
        at_most = _min_nonzero_at_least(n, qs, -(-n // m))
    return at_most, 1 - at_most


def m_distribution(
    weights: Sequence[Union[Fraction, float, int]],
    n: int,
    m_max: Optional[int] = None,
    rng=None,
    mc_samples: int = 100_000,
) -> MDistribution:
    """Distribution of the ball total M over estimation outcomes.

    M depends on the multinomial tallies only through the smallest
    nonzero count c, as M = ceil(n/c), so P(M <= m) is the probability
    that every nonzero count reaches ceil(n/m).  Computed exactly for
    rational weights on modest instances, else by Monte Carlo.
    """
    fracs = [Fraction(w) for w in weights]
    if sum(fracs) != 1:
        raise ValueError("weights must sum to 1")
    fracs = [f for f in fracs if f > 0]
    den = math.lcm(*(f.denominator for f in fracs))
    qs = [int(f * den) for f in fracs]
    exact = (
        len(qs) <= _EXACT_MAX_CATEGORIES
        and n <= _EXACT_MAX_N
        and den <= 1_000_000
    )
    pmf: dict[int, Union[Fraction, float]] = {}
    if exact:
        if len(qs) == 1:
            pmf = {1: Fraction(1)}
        else:
            # P(M <= m) = P(min nonzero count >= ceil(n/m)); evaluate at
            # each distinct threshold and difference the cdf
            tail_cache: dict[int, Fraction] = {}

            def cdf(m: int) -> Fraction:
                c = -(-n // m)
                if c not in tail_cache:
                    tail_cache[c] = _min_nonzero_at_least(n, qs, c)
                return tail_cache[c]

            prev = Fraction(0)
            for m in range(1, n + 1):
                cur = cdf(m)
                if cur > prev:
                    pmf[m] = cur - prev
                    prev = cur
                if cur == 1:
                    break
        samples = None
    else:
        gen = as_generator(rng) if rng is not None else as_generator(
            np.random.default_rng()
        )
        p = np.array([float(f) for f in fracs])
        p /= p.sum()
        counts = gen.multinomial(n, p, size=mc_samples)
        counts = np.where(counts == 0, n + 1, counts)
        ms = -(-n // counts.min(axis=1))
        vals, freq = np.unique(ms, return_counts=True)
        pmf = {int(m): c / mc_samples for m, c in zip(vals, freq)}
        samples = mc_samples
    if m_max is not None:
        capped: dict[int, Union[Fraction, float]] = {}
        for m, p_ in pmf.items():
            key = min(m, m_max)
            capped[key] = capped.get(key, 0) + p_
        pmf = capped
    return MDistribution(
        pmf=dict(sorted(pmf.items())), n=n, m_max=m_max, exact=exact,
        samples=samples,
    )
