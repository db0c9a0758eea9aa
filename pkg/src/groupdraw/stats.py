"""Monte Carlo experiment harness.

Event probability estimates with confidence intervals, method-vs-method
comparison reports, pairwise co-group matrices, and goodness-of-fit
tests against the exact enumeration oracle.  All entry points take a
seed and chunk the work across numbered substreams, so results are
deterministic and independent of chunking.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import chi2

from .feasibility import enumerate_valid
from .model import DrawConfig, EventQuery, PartialDraw
from .multiball import multiball_full_draw
from .rng import RngStream, as_generator
from .samplers import (
    OrderPolicy,
    complete_uniform_batch,
    metropolis_chain,
    multiple_rejection_draw,
    rejection_draw,
    sequential_draw,
    uefa_variant_draw,
)

__all__ = [
    "METHOD_NAMES",
    "ProbabilityEstimate",
    "ComparisonReport",
    "GofResult",
    "make_sampler",
    "estimate_event",
    "pairwise_matrix",
    "matrix_to_csv",
    "gof_against_oracle",
    "compare_methods",
]

_CHUNK = 1 << 15


def _row_of(partial: PartialDraw) -> np.ndarray:
    """Assignment as a team-id -> group-index vector."""
    idx = partial.config.index
    row = np.full(idx.n_teams, -1, dtype=np.int8)
    for p in range(idx.n_pots):
        for g, t in enumerate(partial.board[p]):
            if t != -1:
                row[t] = g
    return row


def _canonical_method(name: str) -> str:
    key = name.lower().replace("_", "-")
    aliases = {
        "rejection": "rejection",
        "uniform": "rejection",
        "fifa": "fifa",
        "sequential": "fifa",
        "fifa-sequential": "fifa",
        "uefa": "uefa",
        "metropolis": "metropolis",
        "multiball": "multiball",
        "multirej": "multirej",
        "multiple-rejections": "multirej",
    }
    if key not in aliases:
        raise ValueError(f"unknown method {name!r}")
    return aliases[key]


METHOD_NAMES = ("rejection", "fifa", "uefa", "metropolis", "multiball", "multirej")


def make_sampler(
    config: DrawConfig, method: str, **options
) -> Callable[[int, object], np.ndarray]:
    """Batch sampler for a named draw method.

    The returned callable maps (n, rng) to an (n, teams) matrix of group
    indices, one completed assignment per row.  Options: ``policy`` (an
    OrderPolicy or its name) for fifa; ``k`` and ``pot_schedule`` for
    metropolis; ``n_est`` and ``m_max`` for multiball.
    """
    canon = _canonical_method(method)
    idx = config.index

    if canon == "rejection":
        if options:
            raise ValueError(f"rejection takes no options, got {options}")

        def sample(n, rng):
            assign, _ = complete_uniform_batch(config, None, n, rng)
            return assign

        return sample

    def _loop(draw_one):
        def sample(n, rng):
            gen = as_generator(rng)  # stateful: one stream for the chunk
            out = np.empty((n, idx.n_teams), dtype=np.int8)
            for i in range(n):
                out[i] = _row_of(draw_one(gen))
            return out

        return sample

    if canon == "fifa":
        policy = options.pop("policy", None)
        if options:
            raise ValueError(f"unknown fifa options {options}")
        if isinstance(policy, str):
            policy = (
                OrderPolicy.uniform_random()
                if policy in ("uniform_random", "uniform-random", "random")
                else OrderPolicy.lexicographic()
            )
        return _loop(lambda rng: sequential_draw(config, policy, rng))

    if canon == "uefa":
        if options:
            raise ValueError(f"unknown uefa options {options}")
        return _loop(lambda rng: uefa_variant_draw(config, rng))

    if canon == "metropolis":
        k = options.pop("k", 20)
        pot_schedule = options.pop("pot_schedule", "cycle")
        if options:
            raise ValueError(f"unknown metropolis options {options}")

        def draw(rng):
            start, _ = rejection_draw(config, rng)
            end, _ = metropolis_chain(config, start, k, rng, pot_schedule=pot_schedule)
            return end

        return _loop(draw)

    if canon == "multiball":
        n_est = options.pop("n_est", 100)
        m_max = options.pop("m_max", None)
        if options:
            raise ValueError(f"unknown multiball options {options}")
        return _loop(
            lambda rng: multiball_full_draw(config, n_est, m_max, rng)[0]
        )

    # multirej
    if options:
        raise ValueError(f"unknown multirej options {options}")
    return _loop(lambda rng: multiple_rejection_draw(config, rng)[0])


def _chunked_rows(config, method, options, samples, seed, threads=1):
    """Yield sample chunks, one per numbered substream.

    Chunk boundaries and substream ids are fixed, so results do not
    depend on ``threads``; the pool only evaluates chunks concurrently.
    """
    sampler = make_sampler(config, method, **options)
    base = RngStream(seed)
    jobs = []
    done = 0
    while done < samples:
        n = min(_CHUNK, samples - done)
        jobs.append((n, base.substream(len(jobs))))
        done += n
    if threads <= 1 or len(jobs) == 1:
        for n, stream in jobs:
            yield sampler(n, stream)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(lambda j: sampler(*j), jobs)


@dataclass(frozen=True)
class ProbabilityEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    samples: int
    method: str
    event: EventQuery
    hits: int = 0

    def __post_init__(self):
        assert self.ci_low <= self.estimate <= self.ci_high

    def to_json(self) -> dict:
        return {
            "event": self.event.describe(),
            "method": self.method,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "samples": self.samples,
            "hits": self.hits,
        }


def _interval(hits: int, n: int, wilson: bool) -> tuple[float, float, float]:
    p = hits / n
    z = 1.959963984540054  # two-sided 95%
    if wilson:
        denom = 1 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        # rounding can push the bounds a few ulps past the point estimate
        return p, min(p, max(0.0, center - half)), max(p, min(1.0, center + half))
    half = z * math.sqrt(p * (1 - p) / n)
    return p, max(0.0, p - half), min(1.0, p + half)


def _event_hits(config: DrawConfig, rows: np.ndarray, event: EventQuery) -> int:
    idx = config.index
    if event.team_a not in idx.team_id:
        raise ValueError(f"unknown team {event.team_a!r}")
    ta = idx.team_id[event.team_a]
    if event.kind == "same_group":
        if event.team_b not in idx.team_id:
            raise ValueError(f"unknown team {event.team_b!r}")
        tb = idx.team_id[event.team_b]
        return int(np.count_nonzero(rows[:, ta] == rows[:, tb]))
    if event.group not in idx.group_id:
        raise ValueError(f"unknown group {event.group!r}")
    g = idx.group_id[event.group]
    return int(np.count_nonzero(rows[:, ta] == g))


def estimate_event(
    config: DrawConfig,
    method: str,
    event: EventQuery,
    samples: int,
    seed: int,
    wilson: bool = False,
    threads: int = 1,
    **options,
) -> ProbabilityEstimate:
    """Estimate an event's probability under a named draw method."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    hits = 0
    for rows in _chunked_rows(config, method, options, samples, seed, threads):
        hits += _event_hits(config, rows, event)
    p, lo, hi = _interval(hits, samples, wilson)
    return ProbabilityEstimate(
        estimate=p, ci_low=lo, ci_high=hi, samples=samples,
        method=_canonical_method(method), event=event, hits=hits,
    )


def pairwise_matrix(
    config: DrawConfig,
    method: str,
    samples: int,
    seed: int,
    average_exchangeable: bool = False,
    threads: int = 1,
    **options,
) -> tuple[list[str], np.ndarray]:
    """Co-group probability for every team pair.

    Diagonal entries are 1 by convention; same-pot pairs are exactly 0.
    With ``average_exchangeable`` the estimates are pooled across pairs
    that are interchangeable by region class, a variance reduction that
    leaves the expectation unchanged.
    """
    idx = config.index
    t = idx.n_teams
    counts = np.zeros((t, t), dtype=np.int64)
    for rows in _chunked_rows(config, method, options, samples, seed, threads):
        eq = rows[:, :, None] == rows[:, None, :]
        counts += eq.sum(axis=0)
    mat = counts / samples
    if average_exchangeable:
        cls = [(idx.pot_of[i], idx.class_of[i]) for i in range(t)]
        done = set()
        for a in range(t):
            for b in range(a + 1, t):
                key = tuple(sorted((cls[a], cls[b])))
                if key in done or cls[a] == cls[b]:
                    continue
                pairs = [
                    (i, j)
                    for i in range(t)
                    for j in range(t)
                    if i != j and {cls[i], cls[j]} == {cls[a], cls[b]}
                ]
                avg = float(np.mean([mat[i, j] for i, j in pairs]))
                for i, j in pairs:
                    mat[i, j] = avg
                done.add(key)
    for a in range(t):
        mat[a, a] = 1.0
        for b in range(t):
            if a != b and idx.pot_of[a] == idx.pot_of[b]:
                mat[a, b] = 0.0
    names = [team.name for team in idx.teams]
    return names, mat


def matrix_to_csv(names: Sequence[str], matrix: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("team," + ",".join(names) + "\n")
    for name, row in zip(names, matrix):
        buf.write(name + "," + ",".join(f"{x:.6f}" for x in row) + "\n")
    return buf.getvalue()


@dataclass(frozen=True)
class GofResult:
    chi_square: float
    p_value: float
    tv_distance: float
    dof: int
    samples: int
    method: str

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "chi_square": self.chi_square,
            "p_value": self.p_value,
            "tv_distance": self.tv_distance,
            "dof": self.dof,
            "samples": self.samples,
        }


def gof_against_oracle(
    config: DrawConfig, method: str, samples: int, seed: int,
    threads: int = 1, **options,
) -> GofResult:
    """Chi-square test of the method's output against the uniform law.

    Bins samples by their index in the exhaustive enumeration of valid
    assignments; only usable on configs small enough to enumerate.
    """
    valid = enumerate_valid(config)
    index_of = {_row_of(a).tobytes(): i for i, a in enumerate(valid)}
    v = len(valid)
    observed = np.zeros(v, dtype=np.int64)
    for rows in _chunked_rows(config, method, options, samples, seed, threads):
        for row in rows:
            observed[index_of[row.tobytes()]] += 1
    expected = samples / v
    stat = float(((observed - expected) ** 2 / expected).sum())
    p_value = float(chi2.sf(stat, v - 1))
    tv = float(np.abs(observed / samples - 1 / v).sum() / 2)
    return GofResult(
        chi_square=stat, p_value=p_value, tv_distance=tv, dof=v - 1,
        samples=samples, method=_canonical_method(method),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Per-event estimates under several methods, with differences.

    Differences are taken against the first method in ``methods``
    (conventionally the uniform baseline).
    """

    methods: tuple[str, ...]
    rows: tuple[tuple[EventQuery, tuple[ProbabilityEstimate, ...]], ...]

    def to_json(self) -> dict:
        out = []
        for event, ests in self.rows:
            base = ests[0].estimate
            entry = {
                "event": event.describe(),
                "estimates": [e.to_json() for e in ests],
                "abs_diff": [e.estimate - base for e in ests],
                "rel_diff": [
                    (e.estimate - base) / base if base else None for e in ests
                ],
            }
            out.append(entry)
        return {"methods": list(self.methods), "rows": out}

    def to_text(self) -> str:
        width = max(len(e.describe()) for e, _ in self.rows)
        head = "event".ljust(width) + "".join(
            f"  {m:>12}" for m in self.methods
        ) + "    abs diff"
        lines = [head]
        for event, ests in self.rows:
            base = ests[0].estimate
            cells = "".join(f"  {e.estimate:>11.4%}" for e in ests)
            diff = max(e.estimate - base for e in ests[1:]) if len(ests) > 1 else 0.0
            lines.append(event.describe().ljust(width) + cells + f"  {diff:>+9.4%}")
        return "\n".join(lines)


def compare_methods(
    config: DrawConfig,
    methods: Sequence[str],
    events: Sequence[EventQuery],
    samples: int,
    seed: int,
    method_options: Optional[dict] = None,
) -> ComparisonReport:
    """Estimate each event under each method on equal sample counts.

    Methods get distinct substream blocks derived from the one seed, so
    the report is deterministic; repeated methods repeat exactly.
    """
    if not methods or not events:
        raise ValueError("methods and events must be nonempty")
    method_options = method_options or {}
    rows = []
    for event in events:
        ests = []
        for method in methods:
            opts = dict(method_options.get(method, {}))
            # distinct seeds per method; identical methods stay identical
            mseed = seed + 1_000_003 * METHOD_NAMES.index(_canonical_method(method))
            ests.append(
                estimate_event(config, method, event, samples, mseed, **opts)
            )
        rows.append((event, tuple(ests)))
    return ComparisonReport(methods=tuple(methods), rows=tuple(rows))
