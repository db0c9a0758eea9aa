import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chi2

sys.path.insert(0, str(Path(__file__).resolve().parent))

from groupdraw.model import DrawConfig, Team, motivating_preset, wc2022_preset


@pytest.fixture(scope="session")
def wc2022():
    return wc2022_preset()


@pytest.fixture(scope="session")
def motivating():
    return motivating_preset()


@pytest.fixture(scope="session")
def modified():
    return motivating_preset(modified=True)


def make_toy_config(seed: int) -> DrawConfig:
    """Small random config with at least one valid assignment.

    Two pots of three over three groups, random region tags from a
    three-letter alphabet (occasionally dual), random quota maxima, and
    sometimes a pin.  Deterministic in ``seed``.
    """
    from oracle_laws import brute_force_valid

    gen = np.random.default_rng(seed)
    regions = ["X", "Y", "Z"]
    for _ in range(200):
        pots = []
        for p in range(2):
            pot = []
            for t in range(3):
                n_regs = 2 if gen.random() < 0.2 else 1
                regs = list(gen.choice(regions, size=n_regs, replace=False))
                pot.append(Team(f"P{p + 1}T{t + 1}", frozenset(regs)))
            pots.append(pot)
        quotas = {
            r: (0, int(gen.integers(1, 3))) for r in regions
        }
        pinned = []
        if gen.random() < 0.4:
            pinned.append((pots[0][0].name, 0, "A"))
        try:
            config = DrawConfig.create(
                pots=pots, groups=["A", "B", "C"], quotas=quotas,
                pinned=pinned,
            )
        except Exception:
            continue
        n_valid = len(brute_force_valid(config))
        # want real constraints: some but not all assignments valid
        if 2 <= n_valid < 36:
            return config
    raise AssertionError("could not fuzz a constrained toy config")


@pytest.fixture
def toy_configs():
    return [make_toy_config(s) for s in (101, 202)]


def chi_square_pvalue(observed, expected) -> float:
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    stat = ((observed - expected) ** 2 / expected).sum()
    return float(chi2.sf(stat, len(observed) - 1))


def assignment_key(partial):
    """Board as nested team-name tuples, comparable with oracle output."""
    idx = partial.config.index
    return tuple(
        tuple(
            idx.teams[t].name if t != -1 else None for t in row
        )
        for row in partial.board
    )
