"""PlaygroundRGB: a three-room 2D playground rendered as small RGB images.

The Start room sits between the Object room (west door) and the TV room
(east door). The Object room holds a movable object; the TV room holds a TV
that the gripper can switch on, after which its screen, position and the
room's background color keep changing at random. Everything except the TV
is deterministic.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class Room(enum.IntEnum):
    START = 0
    OBJECT = 1
    TV = 2


@dataclass(frozen=True)
class EnvConfig:
    size: int = 24
    delta: float = 0.1
    r_grab: float = 0.15
    r_tv: float = 0.15
    door_width: float = 0.2
    tv_resample_prob: float = 0.1
    n_backgrounds: int = 5
    start_pos: tuple = (0.5, 0.5)
    object_start: tuple = (0.5, 0.5)
    tv_pos: tuple = (0.5, 0.5)
    gripper_px: int = 4
    object_px: int = 4
    tv_px: tuple = (6, 8)  # rows, cols


@dataclass(frozen=True)
class EnvState:
    room: Room
    gripper_pos: tuple
    gripper_closed: bool
    object_pos: tuple
    holding: bool
    tv_on: bool
    tv_pattern_seed: int
    background_variant: int


class Action(NamedTuple):
    dx: float
    dy: float
    grip: float


@dataclass(frozen=True)
class GoalSpec:
    gripper_target: tuple
    object_target: tuple
    image: np.ndarray = field(repr=False, compare=False)
    state: EnvState = field(repr=False, compare=False)


CANONICAL_LOCATIONS = {
    "center": (0.5, 0.5),
    "NW": (0.25, 0.75),
    "NE": (0.75, 0.75),
    "SW": (0.25, 0.25),
    "SE": (0.75, 0.25),
}

ROOM_COLORS = {
    Room.START: (0.55, 0.55, 0.55),
    Room.OBJECT: (0.2, 0.5, 0.2),
}
TV_ROOM_COLORS = (
    (0.45, 0.30, 0.15),
    (0.52, 0.30, 0.15),
    (0.45, 0.37, 0.15),
    (0.45, 0.30, 0.22),
    (0.38, 0.28, 0.13),
)
MARKER_COLOR = (0.9, 0.8, 0.1)
TV_NOISE = 0.25

ENTITY_TAGS = frozenset({"gripper", "object", "tv_off", "tv_on", "start_markers"})


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def _cell(v: float, n: int) -> int:
    return min(int(v * n), n - 1)


class PlaygroundRGB:
    """Stateless simulator: states are immutable values passed in and out."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        c = self.config
        if c.size % 6:
            raise ValueError("image size must be divisible by 6")
        if c.n_backgrounds > len(TV_ROOM_COLORS):
            raise ValueError(f"at most {len(TV_ROOM_COLORS)} TV room backgrounds")
        self._door_lo = 0.5 - c.door_width / 2
        self._door_hi = 0.5 + c.door_width / 2

    @property
    def image_shape(self):
        return (self.config.size, self.config.size, 3)

    def reset(self, seed: int = 0) -> EnvState:
        c = self.config
        # the seed only parks an (unused while off) distractor pattern id
        return EnvState(
            room=Room.START,
            gripper_pos=tuple(map(float, c.start_pos)),
            gripper_closed=False,
            object_pos=tuple(map(float, c.object_start)),
            holding=False,
            tv_on=False,
            tv_pattern_seed=int(seed),
            background_variant=0,
        )

    def step(self, state: EnvState, action: Sequence[float], rng: np.random.Generator) -> EnvState:
        c = self.config
        d = c.delta
        dx = _clamp(float(action[0]), -d, d)
        dy = _clamp(float(action[1]), -d, d)
        closed = _clamp(float(action[2]), -1.0, 1.0) > 0.0

        room = state.room
        gx, gy = state.gripper_pos
        ox, oy = state.object_pos
        holding = state.holding
        gx += dx
        gy += dy

        in_door = self._door_lo <= gy <= self._door_hi
        if room == Room.START:
            if gx < 0.0 and in_door:
                room, gx = Room.OBJECT, gx + 1.0
            elif gx > 1.0 and in_door:
                room, gx = Room.TV, gx - 1.0
        elif room == Room.OBJECT:
            if gx > 1.0 and in_door:
                room, gx = Room.START, gx - 1.0
                if holding:
                    # the object cannot leave its room
                    holding = False
                    ox, oy = 1.0, _clamp(gy, 0.0, 1.0)
        elif gx < 0.0 and in_door:
            room, gx = Room.START, gx + 1.0
        gx = _clamp(gx, 0.0, 1.0)
        gy = _clamp(gy, 0.0, 1.0)

        if room == Room.OBJECT:
            if holding and not closed:
                holding = False
            elif not holding and closed and math.hypot(gx - ox, gy - oy) <= c.r_grab:
                holding = True
            if holding:
                ox, oy = gx, gy

        tv_on = state.tv_on
        seed = state.tv_pattern_seed
        variant = state.background_variant
        if tv_on:
            if rng.random() < c.tv_resample_prob:
                seed = int(rng.integers(2**31))
                variant = int(rng.integers(c.n_backgrounds))
        elif room == Room.TV and closed:
            tx, ty = c.tv_pos
            if math.hypot(gx - tx, gy - ty) <= c.r_tv:
                tv_on = True
                seed = int(rng.integers(2**31))
                variant = int(rng.integers(c.n_backgrounds))

        return EnvState(room, (gx, gy), closed, (ox, oy), holding, tv_on, seed, variant)

    def image_key(self, state: EnvState) -> tuple:
        """Everything the rendered image depends on; equal keys give equal images."""
        n = self.config.size
        g = (_cell(state.gripper_pos[0], n), _cell(state.gripper_pos[1], n), state.gripper_closed)
        if state.room == Room.OBJECT:
            return (1, *g, _cell(state.object_pos[0], n), _cell(state.object_pos[1], n))
        if state.room == Room.TV:
            seed = state.tv_pattern_seed if state.tv_on else -1
            return (2, *g, state.tv_on, seed, state.background_variant)
        return (0, *g)

    def render(self, state: EnvState) -> np.ndarray:
        return self.render_key(self.image_key(state))

    def render_key(self, key: tuple) -> np.ndarray:
        c = self.config
        n = c.size
        room = Room(key[0])
        img = np.empty((n, n, 3))
        if room == Room.TV:
            img[:] = TV_ROOM_COLORS[key[6]]
            th, tw = c.tv_px
            r = n - 1 - _cell(c.tv_pos[1], n) - th // 2
            col = _cell(c.tv_pos[0], n) - tw // 2
            img[r:r + th, col:col + tw] = _tv_pattern(key[5], th, tw) if key[4] else 0.0
        else:
            img[:] = ROOM_COLORS[room]
        if room == Room.START:
            m = max(n // 8, 1)
            for r, col in ((1, 1), (1, n - 1 - m), (n - 1 - m, 1), (n - 1 - m, n - 1 - m)):
                img[r:r + m, col:col + m] = MARKER_COLOR
        if room == Room.OBJECT:
            r = n - 1 - key[5]
            s = c.object_px
            img[r:r + s, key[4]:key[4] + s, 0] = 1.0
        r = n - 1 - key[2]
        s = c.gripper_px
        img[r:r + s, key[1]:key[1] + s, 2] = 1.0
        img[r:r + s, key[1]:key[1] + s, 1] = 1.0 if key[3] else 0.0
        return img

    def build_test_set(self) -> list[GoalSpec]:
        """The 5x5 grid of (gripper, object) target pairs in the Object room."""
        base = self.reset(0)
        specs = []
        for g in CANONICAL_LOCATIONS.values():
            for o in CANONICAL_LOCATIONS.values():
                s = EnvState(Room.OBJECT, g, False, o, False, False, base.tv_pattern_seed, 0)
                specs.append(GoalSpec(g, o, self.render(s), s))
        return specs


@functools.lru_cache(maxsize=4096)
def _tv_pattern(seed: int, th: int, tw: int) -> np.ndarray:
    """Screen content for one pattern seed: a random hue plus per-pixel noise."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.05, 0.45, size=3)
    pattern = np.clip(base + rng.uniform(-TV_NOISE, TV_NOISE, size=(th, tw, 3)), 0.0, 1.0)
    pattern.flags.writeable = False
    return pattern


def evaluate_success(goal: GoalSpec, final: EnvState, threshold: float = 0.2) -> bool:
    if final.room != Room.OBJECT:
        return False
    g_err = max(abs(a - b) for a, b in zip(final.gripper_pos, goal.gripper_target))
    o_err = max(abs(a - b) for a, b in zip(final.object_pos, goal.object_target))
    return g_err < threshold and o_err < threshold


def visible_entities(state: EnvState) -> frozenset:
    if state.room == Room.OBJECT:
        return frozenset({"gripper", "object"})
    if state.room == Room.TV:
        return frozenset({"gripper", "tv_on" if state.tv_on else "tv_off"})
    return frozenset({"gripper", "start_markers"})


def f1_score(truth: frozenset, predicted: frozenset) -> float:
    hits = len(truth & predicted)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(truth) if truth else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_visible(goal_state: EnvState, final_state: EnvState) -> float:
    """F1 of the entities visible at the end against those visible in the goal."""
    return f1_score(visible_entities(goal_state), visible_entities(final_state))
