"""HTTP session API for running a draw interactively.

A session walks one draw forward step by step so a human operator can
make the visible picks (which ball, which swap pair) while all hidden
randomness (weight estimation, ball allocation, hidden swaps) comes from
the session seed.  Hidden randomness uses one stream and auto-picks
another, so a transcript of explicit picks replays to the identical
assignment without disturbing the hidden stream.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .feasibility import check_immediate, is_completable
from .model import (
    ConfigError,
    DrawConfig,
    PRESET_NAMES,
    PartialDraw,
    get_preset,
    load_config,
)
from .multiball import BallAllocation, allocate_balls, estimate_weights
from .rng import RngStream, fresh_seed
from .samplers import metropolis_chain, propose_swap, rejection_draw

__all__ = ["DrawSession", "create_app", "replay_session"]

DEFAULT_HIDDEN_SWAPS = 50
DEFAULT_INTERACTIVE_SWAPS = 20
DEFAULT_N_EST = 1000

_METHODS = ("multiball", "metropolis", "fifa-sequential")


def _bowl_view(teams: list[str], counts: list[int]) -> list[dict]:
    """Per-team ball counts with explicit 1-based ball indices."""
    out = []
    index = 1
    for team, count in zip(teams, counts):
        if count == 0:
            continue
        out.append(
            {"team": team, "count": count,
             "indices": list(range(index, index + count))}
        )
        index += count
    return out


def _allocation_view(allocation: BallAllocation) -> dict:
    balls = allocation.ball_teams
    by_team: dict[str, list[int]] = {}
    for i, team in enumerate(balls, start=1):
        by_team.setdefault(team, []).append(i)
    return {
        "M": allocation.m_total,
        "bowl": [
            {"team": t, "count": len(ix), "indices": ix}
            for t, ix in by_team.items()
        ],
        "gcd_reduced": allocation.gcd_reduced,
    }


class DrawSession:
    """State machine for one interactive draw."""

    def __init__(
        self,
        config: DrawConfig,
        method: str,
        seed: int,
        options: Optional[dict] = None,
    ):
        if method not in _METHODS:
            raise ValueError(f"unknown method {method!r}; use one of {_METHODS}")
        options = dict(options or {})
        self.id = uuid.uuid4().hex
        self.config = config
        self.method = method
        self.seed = seed
        self.lock = threading.Lock()
        self.events: list[dict] = []
        self.hidden = RngStream(seed, 0).generator()
        self.auto_gen = RngStream(seed, 1).generator()
        self.n_est = int(options.pop("n_est", DEFAULT_N_EST))
        self.m_max = options.pop("m_max", None)
        self.hidden_swaps = int(options.pop("hidden_swaps", DEFAULT_HIDDEN_SWAPS))
        self.interactive_swaps = int(
            options.pop("interactive_swaps", DEFAULT_INTERACTIVE_SWAPS)
        )
        self.swaps_remaining = self.interactive_swaps
        if options:
            raise ValueError(f"unknown options {sorted(options)}")
        self.allocation: Optional[BallAllocation] = None
        if method == "metropolis":
            start, _ = rejection_draw(config, self.hidden)
            self.assignment, _ = metropolis_chain(
                config, start, self.hidden_swaps, self.hidden
            )
        else:
            self.assignment = PartialDraw.initial(config)
            if not is_completable(config, self.assignment):
                raise ValueError("configuration admits no valid draw")
            if method == "multiball":
                self._allocate_next()

    # -- pending-state helpers -------------------------------------------

    def _allocate_next(self):
        slot = self.assignment.next_slot()
        if slot is None:
            self.allocation = None
            return
        weights = estimate_weights(
            self.config, self.assignment, slot, self.n_est, self.hidden
        )
        self.allocation = allocate_balls(weights, self.m_max, rng=self.hidden)

    def _fifa_bowl(self) -> list[str]:
        slot = self.assignment.next_slot()
        if slot is None:
            return []
        idx = self.config.index
        return [
            idx.teams[t].name
            for t in idx.pot_team_ids[slot[0]]
            if t not in self.assignment.placed
        ]

    def is_complete(self) -> bool:
        if self.method == "metropolis":
            return self.swaps_remaining <= 0
        return self.assignment.next_slot() is None

    # -- stepping ---------------------------------------------------------

    def step(self, action: str, index: Optional[int] = None,
             team_a: Optional[str] = None, team_b: Optional[str] = None) -> dict:
        if self.is_complete():
            raise ValueError("session is complete")
        if self.method == "metropolis":
            event = self._step_metropolis(action, team_a, team_b)
        elif self.method == "multiball":
            event = self._step_multiball(action, index)
        else:
            event = self._step_fifa(action, index)
        self.events.append(event)
        return event

    def _step_multiball(self, action: str, index: Optional[int]) -> dict:
        if action == "auto":
            index = int(self.auto_gen.integers(1, self.allocation.m_total + 1))
        elif action != "pick_ball":
            raise ValueError(f"action {action!r} not valid for multiball")
        elif index is None:
            raise ValueError("pick_ball needs a ball index")
        team = self.allocation.owner(index)  # IndexError when out of range
        slot = self.assignment.next_slot()
        idx = self.config.index
        self.assignment.place(idx.team_id[team], slot[0], slot[1])
        event = {
            "action": action,
            "picked_index": index,
            "team": team,
            "slot": {"pot": slot[0] + 1, "group": self.config.groups[slot[1]]},
            "M": self.allocation.m_total,
        }
        self._allocate_next()
        return event

    def _step_fifa(self, action: str, index: Optional[int]) -> dict:
        bowl = self._fifa_bowl()
        if action == "auto":
            index = int(self.auto_gen.integers(1, len(bowl) + 1))
        elif action != "pick_ball":
            raise ValueError(f"action {action!r} not valid for fifa-sequential")
        elif index is None:
            raise ValueError("pick_ball needs a ball index")
        if not 1 <= index <= len(bowl):
            raise IndexError(f"ball index {index} not in 1..{len(bowl)}")
        team = bowl[index - 1]
        idx = self.config.index
        t = idx.team_id[team]
        pot = idx.pot_of[t]
        # first group in label order that keeps the draw completable
        placed_group = None
        for g in range(idx.n_groups):
            if self.assignment.board[pot][g] != -1:
                continue
            if (pot, g) in idx.pin_at_slot:
                continue
            if not check_immediate(self.config, self.assignment, t, (pot, g)):
                continue
            self.assignment.place(t, pot, g)
            if is_completable(self.config, self.assignment):
                placed_group = g
                break
            self.assignment.unplace(pot, g)
        assert placed_group is not None, "picked team must be placeable"
        return {
            "action": action,
            "picked_index": index,
            "team": team,
            "slot": {"pot": pot + 1, "group": self.config.groups[placed_group]},
        }

    def _step_metropolis(self, action, team_a, team_b) -> dict:
        idx = self.config.index
        if action == "auto":
            # a uniform pair of unpinned balls from a uniform pot choice
            pots = [
                p for p in range(idx.n_pots)
                if len([t for t in idx.pot_team_ids[p]
                        if t not in idx.pinned_slot_of_team]) >= 2
            ]
            p = pots[int(self.auto_gen.integers(len(pots)))]
            eligible = [
                t for t in idx.pot_team_ids[p]
                if t not in idx.pinned_slot_of_team
            ]
            i, j = self.auto_gen.choice(len(eligible), size=2, replace=False)
            team_a = idx.teams[eligible[int(i)]].name
            team_b = idx.teams[eligible[int(j)]].name
        elif action != "propose_pair":
            raise ValueError(f"action {action!r} not valid for metropolis")
        elif not team_a or not team_b:
            raise ValueError("propose_pair needs team_a and team_b")
        if team_a not in idx.team_id or team_b not in idx.team_id:
            raise ValueError("unknown team name")
        pot = idx.pot_of[idx.team_id[team_a]]
        if idx.pot_of[idx.team_id[team_b]] != pot:
            raise ValueError("teams must be in the same pot")
        proposal = propose_swap(self.assignment, pot, team_a, team_b)
        self.swaps_remaining -= 1
        return {
            "action": action,
            "team_a": team_a,
            "team_b": team_b,
            "accepted": proposal.accepted,
            "group_a": proposal.group_a,
            "group_b": proposal.group_b,
            "swaps_remaining": self.swaps_remaining,
        }

    # -- snapshots ---------------------------------------------------------

    def summary(self) -> dict:
        return {
            "id": self.id,
            "method": self.method,
            "seed": self.seed,
            "complete": self.is_complete(),
        }

    def state(self) -> dict:
        pending = None
        if not self.is_complete():
            if self.method == "multiball":
                slot = self.assignment.next_slot()
                pending = {
                    "slot": {
                        "pot": slot[0] + 1,
                        "group": self.config.groups[slot[1]],
                    },
                    **_allocation_view(self.allocation),
                }
            elif self.method == "fifa-sequential":
                slot = self.assignment.next_slot()
                bowl = self._fifa_bowl()
                pending = {
                    "slot": {
                        "pot": slot[0] + 1,
                        "group": None,  # group is decided by the rules
                    },
                    "M": len(bowl),
                    "bowl": _bowl_view(bowl, [1] * len(bowl)),
                }
            else:
                pending = {"swaps_remaining": self.swaps_remaining}
        return {
            **self.summary(),
            "groups": self.assignment.groups_view(),
            "valid": self.assignment.is_valid_complete(),
            "pending": pending,
            "history": list(self.events),
        }


def replay_session(
    config: DrawConfig, method: str, seed: int, options: Optional[dict],
    events: list[dict],
) -> dict:
    """Re-execute a transcript; returns the final groups view.

    Recorded picks are applied as explicit actions, so the auto-pick
    stream is never consumed and the hidden stream replays identically.
    """
    session = DrawSession(config, method, seed, options)
    for event in events:
        if method == "metropolis":
            session.step("propose_pair", team_a=event["team_a"],
                         team_b=event["team_b"])
        else:
            session.step("pick_ball", index=event["picked_index"])
    return session.assignment.groups_view()


class CreateRequest(BaseModel):
    method: str
    preset: Optional[str] = None
    config: Optional[dict] = None
    seed: Optional[int] = None
    options: dict = {}


class StepRequest(BaseModel):
    action: str
    index: Optional[int] = None
    team_a: Optional[str] = None
    team_b: Optional[str] = None


def create_app(static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="groupdraw service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, DrawSession] = {}
    app.state.sessions = sessions

    def _get(session_id: str) -> DrawSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.get("/api/presets")
    def presets():
        return {"presets": sorted(PRESET_NAMES), "methods": list(_METHODS)}

    @app.post("/api/sessions", status_code=201)
    def create_session(req: CreateRequest):
        try:
            if req.config is not None:
                import json as _json

                config = load_config(_json.dumps(req.config))
            else:
                config = get_preset(req.preset or "wc2022")
            seed = req.seed if req.seed is not None else fresh_seed()
            session = DrawSession(config, req.method, seed, req.options)
        except (ConfigError, ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        sessions[session.id] = session
        return session.state()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return _get(session_id).state()

    @app.post("/api/sessions/{session_id}/step")
    def step_session(session_id: str, req: StepRequest):
        session = _get(session_id)
        with session.lock:
            try:
                event = session.step(
                    req.action, req.index, req.team_a, req.team_b
                )
            except (ValueError, IndexError, KeyError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        return {"event": event, "state": session.state()}

    @app.post("/api/sessions/{session_id}/verify")
    def verify_session(session_id: str):
        session = _get(session_id)
        replayed = replay_session(
            session.config, session.method, session.seed,
            {
                "n_est": session.n_est,
                "m_max": session.m_max,
                "hidden_swaps": session.hidden_swaps,
                "interactive_swaps": session.interactive_swaps,
            },
            session.events,
        )
        return {"match": replayed == session.assignment.groups_view()}

    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            static_dir = str(bundled)
    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
