import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import assignment_key, make_toy_config
from oracle_laws import brute_force_valid
from groupdraw.feasibility import (
    InstanceTooLargeError,
    check_immediate,
    count_completions,
    enumerate_valid,
    is_completable,
    next_position_counts,
)
from groupdraw.model import DrawConfig, PartialDraw, Team, motivating_preset

WC2022_VALID_DRAWS = 620_806_975_488_000  # frozen from the exact DP


class TestCheckImmediate:
    def test_second_same_region_team_blocked(self, motivating):
        pd = PartialDraw.initial(motivating)
        # Brazil (SA) is pinned in group C; Uruguay (SA) cannot join it
        uruguay = motivating.index.team_id["Uruguay"]
        assert not check_immediate(motivating, pd, uruguay, (1, 2))
        assert check_immediate(motivating, pd, uruguay, (1, 0))

    def test_empty_group_always_ok(self, wc2022):
        pd = PartialDraw.initial(wc2022)
        for t in wc2022.index.pot_team_ids[1]:
            assert check_immediate(wc2022, pd, t, (1, 1))

    def test_third_european_team_blocked(self, wc2022):
        idx = wc2022.index
        pd = PartialDraw.initial(wc2022)
        eu = [
            [t for t in ids if "Eu" == sorted(
                idx.regions[r] for r in idx.team_regions[t]
            )[0] and len(idx.team_regions[t]) == 1][0]
            for ids in idx.pot_team_ids[:3]
        ]
        pd.place(eu[0], 0, 1)
        pd.place(eu[1], 1, 1)
        assert not check_immediate(wc2022, pd, eu[2], (2, 1))


class TestExtremeSubsequentConflict:
    """A placement can be immediately fine yet doom the draw much later."""

    @staticmethod
    def _config():
        # Pot 1: one Af team and seven NA-region teams; pot 2: one As team
        # and seven Af teams. Quotas cap every region at 1 per group, so
        # the As team must share a group with the Af pot-1 team.
        pots = [
            [Team("Af1", frozenset(["Af"]))]
            + [Team(f"NA{i}", frozenset(["NA" + str(i)])) for i in range(7)],
            [Team("As1", frozenset(["As"]))]
            + [Team(f"Af{i + 2}", frozenset(["Af"])) for i in range(7)],
        ]
        quotas = {"Af": (0, 1), "As": (0, 1)}
        quotas.update({f"NA{i}": (0, 1) for i in range(7)})
        return DrawConfig.create(
            pots=pots, groups=list("ABCDEFGH"), quotas=quotas
        )

    def test_wrong_group_is_completable_nowhere_else(self):
        config = self._config()
        idx = config.index
        pd = PartialDraw(config)
        pd.place(idx.team_id["Af1"], 0, 0)
        for i in range(7):
            pd.place(idx.team_id[f"NA{i}"], 0, i + 1)
        as1 = idx.team_id["As1"]
        # no immediate conflict in group B, but the seven Af pot-2 teams
        # then cannot avoid doubling up with Af1's group
        assert check_immediate(config, pd, as1, (1, 1))
        pd.place(as1, 1, 1)
        assert not is_completable(config, pd)
        pd.unplace(1, 1)
        pd.place(as1, 1, 0)
        assert is_completable(config, pd)


class TestCounting:
    def test_motivating_counts(self, motivating, modified):
        assert count_completions(
            motivating, PartialDraw.initial(motivating)
        ) == 4
        assert count_completions(modified, PartialDraw.initial(modified)) == 3

    def test_wc2022_exact_count(self, wc2022):
        assert count_completions(
            wc2022, PartialDraw.initial(wc2022)
        ) == WC2022_VALID_DRAWS

    def test_empty_wc2022_completable(self, wc2022):
        assert is_completable(wc2022, PartialDraw.initial(wc2022))

    def test_complete_assignment_counts_one(self, motivating):
        for assignment in enumerate_valid(motivating):
            assert count_completions(motivating, assignment) == 1
            assert is_completable(motivating, assignment)

    def test_next_position_counts_motivating(self, motivating, modified):
        pd = PartialDraw.initial(motivating)
        assert next_position_counts(motivating, pd, (1, 0)) == {
            "Uruguay": 2, "Mexico": 1, "Switzerland": 1,
        }
        pd = PartialDraw.initial(modified)
        assert next_position_counts(modified, pd, (1, 0)) == {
            "Uruguay": 1, "Mexico": 1, "Switzerland": 1,
        }

    def test_symmetric_pot_counts_equal(self):
        pots = [
            [Team(f"A{i}", frozenset(["X"])) for i in range(3)],
            [Team(f"B{i}", frozenset(["Y"])) for i in range(3)],
        ]
        config = DrawConfig.create(
            pots=pots, groups=["A", "B", "C"],
            quotas={"X": (0, 1), "Y": (0, 1)},
        )
        counts = next_position_counts(config, PartialDraw(config), (0, 0))
        assert len(set(counts.values())) == 1


class TestEnumerateValid:
    def test_motivating_draws(self, motivating):
        keys = {assignment_key(a) for a in enumerate_valid(motivating)}
        pot1 = ("Qatar", "France", "Brazil")
        expected = {
            (pot1, ("Mexico", "Uruguay", "Switzerland")),
            (pot1, ("Switzerland", "Uruguay", "Mexico")),
            (pot1, ("Uruguay", "Mexico", "Switzerland")),
            (pot1, ("Uruguay", "Switzerland", "Mexico")),
        }
        assert keys == expected

    def test_modified_excludes_double_european(self, modified):
        keys = {assignment_key(a) for a in enumerate_valid(modified)}
        assert len(keys) == 3
        for key in keys:
            # France (Eu) may not pair with Switzerland (Eu)
            assert key[1][1] != "Switzerland"

    def test_wc2022_guarded(self, wc2022):
        with pytest.raises(InstanceTooLargeError):
            enumerate_valid(wc2022)

    def test_matches_brute_force_on_toys(self, toy_configs):
        for config in toy_configs:
            ours = {assignment_key(a) for a in enumerate_valid(config)}
            oracle = set(brute_force_valid(config))
            assert ours == oracle


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_fuzzed_partials_consistency(seed):
    """count>0 iff completable; sum rule over the next slot."""
    config = make_toy_config(seed)
    idx = config.index
    gen = np.random.default_rng(seed)
    oracle_total = len(brute_force_valid(config))
    assert count_completions(config, PartialDraw.initial(config)) == oracle_total
    for _ in range(25):
        pd = PartialDraw.initial(config)
        # random partial along the fill order
        steps = int(gen.integers(0, idx.n_teams))
        for p, g in idx.fill_order:
            if steps == 0 or pd.board[p][g] != -1:
                continue
            free = [t for t in idx.pot_team_ids[p] if t not in pd.placed]
            pd.place(int(gen.choice(free)), p, g)
            steps -= 1
        total = count_completions(config, pd)
        assert (total > 0) == is_completable(config, pd)
        slot = pd.next_slot()
        if slot is not None and total > 0:
            by_team = next_position_counts(config, pd, slot)
            assert sum(by_team.values()) == total


def _count_naive(config, partial):
    """Reference exponential counter sharing no code with the package."""
    from oracle_laws import brute_force_valid as bf

    rows = [
        tuple(
            config.index.teams[t].name if t != -1 else None for t in row
        )
        for row in partial.board
    ]
    total = 0
    for key in bf(config):
        if all(
            rows[p][g] in (None, key[p][g])
            for p in range(len(rows))
            for g in range(len(rows[p]))
        ):
            total += 1
    return total


@pytest.mark.parametrize("seed", [21, 22])
def test_memoized_equals_naive(seed):
    config = make_toy_config(seed)
    idx = config.index
    gen = np.random.default_rng(seed)
    for _ in range(10):
        pd = PartialDraw.initial(config)
        for p, g in idx.fill_order:
            if gen.random() < 0.5 or pd.board[p][g] != -1:
                continue
            free = [t for t in idx.pot_team_ids[p] if t not in pd.placed]
            if free:
                pd.place(int(gen.choice(free)), p, g)
        assert count_completions(config, pd) == _count_naive(config, pd)


def test_pin_conflict_not_completable(motivating):
    pd = PartialDraw(motivating)
    idx = motivating.index
    # Qatar somewhere other than its pinned slot can never complete
    pd.place(idx.team_id["Qatar"], 0, 1)
    assert not is_completable(motivating, pd)
    assert count_completions(motivating, pd) == 0
