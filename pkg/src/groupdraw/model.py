"""Domain types for teams, pots, regions, constraints, and draw state.

A draw configuration consists of seeded pots of teams, a list of group
labels, per-group region quotas, and optional pinned placements (e.g. a
host team fixed to a specific group).  A ``PartialDraw`` tracks which team
occupies which (pot, group) slot; a complete partial draw is called an
assignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "Team",
    "DrawConfig",
    "PartialDraw",
    "EventQuery",
    "ConfigError",
    "load_config",
    "config_to_json",
    "wc2022_preset",
    "motivating_preset",
    "get_preset",
    "PRESET_NAMES",
]


class ConfigError(ValueError):
    """Raised when a draw configuration fails validation."""


@dataclass(frozen=True)
class Team:
    """A team (or placeholder) with one or more region affiliations.

    Placeholder entries that could resolve to teams from different
    regions carry every candidate region and must satisfy the quota
    constraints for all of them simultaneously.
    """

    name: str
    regions: frozenset[str]

    def __post_init__(self):
        if not self.name:
            raise ConfigError("team name must be non-empty")
        if not self.regions:
            raise ConfigError(f"team {self.name!r} must have at least one region")


@dataclass(frozen=True)
class EventQuery:
    """A question about a finished draw.

    kind "same_group" asks whether ``team_a`` and ``team_b`` share a group;
    kind "in_group" asks whether ``team_a`` landed in group ``group``.
    """

    kind: str
    team_a: str
    team_b: Optional[str] = None
    group: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("same_group", "in_group"):
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.kind == "same_group" and self.team_b is None:
            raise ConfigError("same_group event needs two teams")
        if self.kind == "in_group" and self.group is None:
            raise ConfigError("in_group event needs a group label")

    @classmethod
    def same_group(cls, team_a: str, team_b: str) -> "EventQuery":
        return cls(kind="same_group", team_a=team_a, team_b=team_b)

    @classmethod
    def in_group(cls, team: str, group: str) -> "EventQuery":
        return cls(kind="in_group", team_a=team, group=group)

    def describe(self) -> str:
        if self.kind == "same_group":
            return f"same-group:{self.team_a},{self.team_b}"
        return f"in-group:{self.team_a},{self.group}"


class _ConfigIndex:
    """Derived integer indexing and shared caches for one config.

    Teams get global ids in pot order; regions get column indices.  The
    per-team region incidence matrix and quota arrays drive the vectorized
    samplers.  Feasibility caches live here so that every sampler working
    with the same config instance shares them.
    """

    def __init__(self, config: "DrawConfig"):
        self.config = config
        self.regions: tuple[str, ...] = tuple(sorted(r for r, _ in config.quotas))
        self.region_id = {r: i for i, r in enumerate(self.regions)}
        self.n_regions = len(self.regions)
        self.n_groups = len(config.groups)
        self.n_pots = len(config.pots)
        self.group_id = {g: i for i, g in enumerate(config.groups)}

        teams: list[Team] = []
        self.pot_team_ids: list[list[int]] = []
        self.pot_of: list[int] = []
        for p, pot in enumerate(config.pots):
            ids = []
            for team in pot:
                ids.append(len(teams))
                teams.append(team)
                self.pot_of.append(p)
            self.pot_team_ids.append(ids)
        self.teams: tuple[Team, ...] = tuple(teams)
        self.n_teams = len(teams)
        self.team_id = {t.name: i for i, t in enumerate(teams)}

        self.team_regions: list[tuple[int, ...]] = [
            tuple(sorted(self.region_id[r] for r in t.regions)) for t in teams
        ]
        mat = np.zeros((self.n_teams, self.n_regions), dtype=np.int16)
        for i, regs in enumerate(self.team_regions):
            mat[i, list(regs)] = 1
        self.region_matrix = mat
        quota_map = dict(config.quotas)
        self.quota_min = np.array(
            [quota_map[r][0] for r in self.regions], dtype=np.int16
        )
        self.quota_max = np.array(
            [quota_map[r][1] for r in self.regions], dtype=np.int16
        )

        # Exchangeability classes: teams of one pot with identical region
        # tags are interchangeable for counting purposes.
        self.class_of: list[int] = [0] * self.n_teams
        self.pot_classes: list[list[tuple[int, ...]]] = []
        for p, ids in enumerate(self.pot_team_ids):
            seen: dict[tuple[int, ...], int] = {}
            classes: list[tuple[int, ...]] = []
            for t in ids:
                regs = self.team_regions[t]
                if regs not in seen:
                    seen[regs] = len(classes)
                    classes.append(regs)
                self.class_of[t] = seen[regs]
            self.pot_classes.append(classes)

        # pin lookups, 0-based pot index
        self.pinned_slot_of_team: dict[int, tuple[int, int]] = {}
        self.pin_at_slot: dict[tuple[int, int], int] = {}
        for name, p, g in config.pinned:
            t = self.team_id[name]
            gi = self.group_id[g]
            self.pinned_slot_of_team[t] = (p, gi)
            self.pin_at_slot[(p, gi)] = t

        # Fill order: pots in order, groups in label order, pins excluded.
        self.fill_order: tuple[tuple[int, int], ...] = tuple(
            (p, g)
            for p in range(self.n_pots)
            for g in range(self.n_groups)
            if (p, g) not in self.pin_at_slot
        )

        # Shared feasibility caches (see groupdraw.feasibility).
        self.completable_cache: dict = {}
        self.count_cache: dict = {}
        self.decision_cache: dict = {}


@dataclass(frozen=True)
class DrawConfig:
    """Immutable draw configuration.

    ``quotas`` maps a region code to (min_per_group, max_per_group);
    ``pinned`` holds (team_name, pot_index, group_label) with 0-based pot
    indices.  The config validates itself on construction and is safe to
    share across threads.
    """

    pots: tuple[tuple[Team, ...], ...]
    groups: tuple[str, ...]
    quotas: tuple[tuple[str, tuple[int, int]], ...]
    pinned: tuple[tuple[str, int, str], ...] = ()
    _index: _ConfigIndex = field(
        init=False, repr=False, compare=False, hash=False, default=None
    )

    def __post_init__(self):
        self._validate()
        object.__setattr__(self, "_index", _ConfigIndex(self))

    @staticmethod
    def create(
        pots: Sequence[Sequence[Team]],
        groups: Sequence[str],
        quotas: dict[str, tuple[int, int]],
        pinned: Iterable[tuple[str, int, str]] = (),
    ) -> "DrawConfig":
        return DrawConfig(
            pots=tuple(tuple(p) for p in pots),
            groups=tuple(groups),
            quotas=tuple(sorted((r, (int(a), int(b))) for r, (a, b) in quotas.items())),
            pinned=tuple(pinned),
        )

    # quotas as a dict view (the tuple form keeps the dataclass hashable)
    @property
    def quota_map(self) -> dict[str, tuple[int, int]]:
        return dict(self.quotas)

    def _validate(self):
        quotas = dict(self.quotas)
        if not self.groups:
            raise ConfigError("config needs at least one group")
        if len(set(self.groups)) != len(self.groups):
            raise ConfigError("duplicate group labels")
        if not self.pots:
            raise ConfigError("config needs at least one pot")
        names: set[str] = set()
        for p, pot in enumerate(self.pots):
            if len(pot) != len(self.groups):
                raise ConfigError(
                    f"pot {p + 1} has {len(pot)} teams but there are "
                    f"{len(self.groups)} groups"
                )
            for team in pot:
                if team.name in names:
                    raise ConfigError(f"duplicate team name {team.name!r}")
                names.add(team.name)
                for r in team.regions:
                    if r not in quotas:
                        raise ConfigError(
                            f"team {team.name!r} tagged with region {r!r} "
                            "which has no quota"
                        )
        for r, (lo, hi) in quotas.items():
            if lo < 0 or hi < lo:
                raise ConfigError(f"invalid quota for region {r!r}: ({lo}, {hi})")
        slots_seen: set[tuple[int, int]] = set()
        for name, p, g in self.pinned:
            if name not in names:
                raise ConfigError(f"pinned team {name!r} does not exist")
            if not (0 <= p < len(self.pots)):
                raise ConfigError(f"pin for {name!r} references pot {p + 1}")
            if g not in self.groups:
                raise ConfigError(f"pin for {name!r} references group {g!r}")
            if not any(t.name == name for t in self.pots[p]):
                raise ConfigError(f"pinned team {name!r} is not in pot {p + 1}")
            gi = self.groups.index(g)
            if (p, gi) in slots_seen:
                raise ConfigError(f"two pins for slot (pot {p + 1}, group {g})")
            slots_seen.add((p, gi))

    @property
    def index(self) -> _ConfigIndex:
        return self._index

    def team(self, name: str) -> Team:
        return self._index.teams[self._index.team_id[name]]

    def team_names(self) -> list[str]:
        return [t.name for t in self._index.teams]


class PartialDraw:
    """Mutable mapping of (pot, group) slots to teams.

    Enforces that every team appears at most once and only in a slot of
    its own pot.  A partial draw with every slot filled is an assignment.
    """

    __slots__ = ("config", "board", "placed", "group_counts", "filled_mask", "fill_history")

    def __init__(self, config: DrawConfig):
        idx = config.index
        self.config = config
        # board[p][g] = global team id or -1
        self.board: list[list[int]] = [
            [-1] * idx.n_groups for _ in range(idx.n_pots)
        ]
        self.placed: set[int] = set()
        # group_counts[g][r] = teams in group g tagged with region r
        self.group_counts: list[list[int]] = [
            [0] * idx.n_regions for _ in range(idx.n_groups)
        ]
        # filled_mask[g] = bitmask of pots already filled in group g
        self.filled_mask: list[int] = [0] * idx.n_groups
        self.fill_history: list[tuple[int, int]] = []

    @classmethod
    def initial(cls, config: DrawConfig) -> "PartialDraw":
        """Empty draw with all pinned teams pre-placed."""
        pd = cls(config)
        for (p, g), t in config.index.pin_at_slot.items():
            pd.place(t, p, g)
        return pd

    def copy(self) -> "PartialDraw":
        other = PartialDraw.__new__(PartialDraw)
        other.config = self.config
        other.board = [row[:] for row in self.board]
        other.placed = set(self.placed)
        other.group_counts = [row[:] for row in self.group_counts]
        other.filled_mask = self.filled_mask[:]
        other.fill_history = self.fill_history[:]
        return other

    def place(self, team: int, pot: int, group: int):
        idx = self.config.index
        if idx.pot_of[team] != pot:
            raise ValueError(
                f"team {idx.teams[team].name!r} is not in pot {pot + 1}"
            )
        if team in self.placed:
            raise ValueError(f"team {idx.teams[team].name!r} already placed")
        if self.board[pot][group] != -1:
            raise ValueError(
                f"slot (pot {pot + 1}, group {self.config.groups[group]}) occupied"
            )
        self.board[pot][group] = team
        self.placed.add(team)
        gc = self.group_counts[group]
        for r in idx.team_regions[team]:
            gc[r] += 1
        self.filled_mask[group] |= 1 << pot
        self.fill_history.append((pot, group))

    def unplace(self, pot: int, group: int):
        team = self.board[pot][group]
        if team == -1:
            raise ValueError("slot is empty")
        idx = self.config.index
        self.board[pot][group] = -1
        self.placed.discard(team)
        gc = self.group_counts[group]
        for r in idx.team_regions[team]:
            gc[r] -= 1
        self.filled_mask[group] &= ~(1 << pot)
        self.fill_history.remove((pot, group))

    def team_at(self, pot: int, group: int) -> Optional[int]:
        t = self.board[pot][group]
        return None if t == -1 else t

    def group_of(self, team: int) -> Optional[int]:
        pot = self.config.index.pot_of[team]
        row = self.board[pot]
        for g, t in enumerate(row):
            if t == team:
                return g
        return None

    def is_complete(self) -> bool:
        return len(self.placed) == self.config.index.n_teams

    def next_slot(self) -> Optional[tuple[int, int]]:
        """Next unfilled slot in the global fill order, or None."""
        for p, g in self.config.index.fill_order:
            if self.board[p][g] == -1:
                return (p, g)
        return None

    def is_valid_complete(self) -> bool:
        """Full validity: complete, quotas (min and max) and pins hold."""
        if not self.is_complete():
            return False
        idx = self.config.index
        for g in range(idx.n_groups):
            for r in range(idx.n_regions):
                c = self.group_counts[g][r]
                if not (idx.quota_min[r] <= c <= idx.quota_max[r]):
                    return False
        for (p, g), t in idx.pin_at_slot.items():
            if self.board[p][g] != t:
                return False
        return True

    def key(self) -> tuple[tuple[int, ...], ...]:
        """Hashable snapshot of the board (team ids by pot and group)."""
        return tuple(tuple(row) for row in self.board)

    def groups_view(self) -> dict[str, list[Optional[str]]]:
        """Group label -> team names by pot (None for empty slots)."""
        idx = self.config.index
        return {
            label: [
                idx.teams[self.board[p][g]].name if self.board[p][g] != -1 else None
                for p in range(idx.n_pots)
            ]
            for g, label in enumerate(self.config.groups)
        }

    def event_holds(self, event: EventQuery) -> bool:
        idx = self.config.index
        ta = idx.team_id[event.team_a]
        if event.kind == "same_group":
            tb = idx.team_id[event.team_b]
            ga, gb = self.group_of(ta), self.group_of(tb)
            return ga is not None and ga == gb
        return self.group_of(ta) == idx.group_id[event.group]

    def __repr__(self):
        filled = len(self.placed)
        return f"<PartialDraw {filled}/{self.config.index.n_teams} placed>"


# Assignments are simply complete PartialDraws.
Assignment = PartialDraw


def load_config(text: str) -> DrawConfig:
    """Parse and validate a JSON draw configuration.

    Schema: {"groups": [..], "quotas": {region: {"min": int, "max": int}},
    "pots": [[{"name": str, "regions": [..]}]],
    "pinned": [{"team": str, "pot": int, "group": str}]}.
    Pot indices are 1-based in files.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        groups = [str(g) for g in doc["groups"]]
        quotas = {
            str(r): (int(q["min"]), int(q["max"])) for r, q in doc["quotas"].items()
        }
        pots = [
            [Team(str(t["name"]), frozenset(str(r) for r in t["regions"])) for t in pot]
            for pot in doc["pots"]
        ]
        pinned = [
            (str(p["team"]), int(p["pot"]) - 1, str(p["group"]))
            for p in doc.get("pinned", [])
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    return DrawConfig.create(pots, groups, quotas, pinned)


def config_to_json(config: DrawConfig) -> str:
    """Serialize a config back to the document schema (round-trips)."""
    doc = {
        "groups": list(config.groups),
        "quotas": {r: {"min": lo, "max": hi} for r, (lo, hi) in config.quotas},
        "pots": [
            [{"name": t.name, "regions": sorted(t.regions)} for t in pot]
            for pot in config.pots
        ],
        "pinned": [
            {"team": name, "pot": p + 1, "group": g} for name, p, g in config.pinned
        ],
    }
    return json.dumps(doc, indent=2)


def wc2022_preset() -> DrawConfig:
    """The 32-team 2022 World Cup configuration.

    Four pots of eight, groups A..H, host pinned to Group A.  Each group
    must contain 1 or 2 Eu teams and at most one team from every other
    region.  Two of the Pot 4 placeholders carry two candidate regions and
    must respect the quotas of both.
    """
    def pot(*entries):
        return [Team(name, frozenset(regs)) for name, regs in entries]

    pots = [
        pot(("Qatar", ["As"]), ("Belgium", ["Eu"]), ("Brazil", ["SA"]),
            ("France", ["Eu"]), ("Argentina", ["SA"]), ("England", ["Eu"]),
            ("Portugal", ["Eu"]), ("Spain", ["Eu"])),
        pot(("Denmark", ["Eu"]), ("Netherlands", ["Eu"]), ("Germany", ["Eu"]),
            ("Switzerland", ["Eu"]), ("Croatia", ["Eu"]), ("Mexico", ["NA"]),
            ("USA", ["NA"]), ("Uruguay", ["SA"])),
        pot(("Iran", ["As"]), ("Serbia", ["Eu"]), ("Japan", ["As"]),
            ("Senegal", ["Af"]), ("Tunisia", ["Af"]), ("Poland", ["Eu"]),
            ("KoreaRep", ["As"]), ("Morocco", ["Af"])),
        pot(("Wales/Scot/Ukr", ["Eu"]), ("Peru/UAE/Au", ["SA", "As"]),
            ("CostaRica/NZ", ["NA", "Oc"]), ("SaudiArabia", ["As"]),
            ("Cameroon", ["Af"]), ("Ecuador", ["SA"]), ("Canada", ["NA"]),
            ("Ghana", ["Af"])),
    ]
    quotas = {
        "Eu": (1, 2),
        "SA": (0, 1),
        "NA": (0, 1),
        "As": (0, 1),
        "Af": (0, 1),
        "Oc": (0, 1),
    }
    return DrawConfig.create(
        pots, list("ABCDEFGH"), quotas, [("Qatar", 0, "A")]
    )


def motivating_preset(modified: bool = False) -> DrawConfig:
    """Six-team toy: two pots of three, groups A..C, Pot 1 fully pinned.

    Unmodified, the only binding constraint keeps the two SA teams apart,
    leaving four valid assignments.  With ``modified=True`` pairings of two
    Eu teams are also forbidden, dropping one of those assignments.
    """
    pots = [
        [Team("Qatar", frozenset(["Af"])),
         Team("France", frozenset(["Eu"])),
         Team("Brazil", frozenset(["SA"]))],
        [Team("Mexico", frozenset(["NA"])),
         Team("Switzerland", frozenset(["Eu"])),
         Team("Uruguay", frozenset(["SA"]))],
    ]
    quotas = {
        "Af": (0, 1),
        "Eu": (0, 1 if modified else 2),
        "SA": (0, 1),
        "NA": (0, 1),
    }
    pinned = [("Qatar", 0, "A"), ("France", 0, "B"), ("Brazil", 0, "C")]
    return DrawConfig.create(pots, ["A", "B", "C"], quotas, pinned)


PRESET_NAMES = ("wc2022", "motivating", "motivating-modified")


def get_preset(name: str) -> DrawConfig:
    if name == "wc2022":
        return wc2022_preset()
    if name == "motivating":
        return motivating_preset(modified=False)
    if name == "motivating-modified":
        return motivating_preset(modified=True)
    raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESET_NAMES)})")
