"""Replay buffer and a trajectory-replay goal reacher.

The reacher stands in for a learned goal-conditioned policy: it looks up the
stored state whose latent is closest to the goal, replays the recorded
actions that led there from reset, and fills the rest of the episode with
random actions. Its competence grows with the coverage of the buffer.

Images are deduplicated through :class:`ImageStore`: states that render to
the same picture share features, count keys and latents.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvState, PlaygroundRGB, Room
from .novelty import CountTable, count_key, key_code
from .representation import DensityModel, PcaModel, embed_features, image_features, log_density


class _Growable:
    """Append-only numpy array with amortized doubling."""

    def __init__(self, shape_tail=(), dtype=float, capacity=1024):
        self._a = np.empty((capacity, *shape_tail), dtype=dtype)
        self.n = 0

    def extend(self, rows):
        rows = np.asarray(rows, dtype=self._a.dtype)
        need = self.n + len(rows)
        if need > len(self._a):
            cap = max(need, 2 * len(self._a))
            new = np.empty((cap, *self._a.shape[1:]), dtype=self._a.dtype)
            new[:self.n] = self._a[:self.n]
            self._a = new
        self._a[self.n:need] = rows
        self.n = need

    def drop_front(self, k):
        keep = self._a[k:self.n].copy()
        self._a[:len(keep)] = keep
        self.n = len(keep)

    @property
    def view(self):
        return self._a[:self.n]


class ImageStore:
    """Unique rendered images with their PCA features and quantized count keys."""

    def __init__(self, env: PlaygroundRGB, factor: int = 2):
        self.env = env
        self.factor = factor
        self._ids: dict = {}
        self.keys: list = []
        n = env.config.size // factor
        self._features = _Growable((n * n * 3,), np.float32)
        self._codes = _Growable((), np.int64)

    def __len__(self):
        return len(self.keys)

    def add(self, key: tuple) -> int:
        i = self._ids.get(key)
        if i is None:
            img = self.env.render_key(key)
            i = len(self.keys)
            self._ids[key] = i
            self.keys.append(key)
            self._features.extend(image_features(img, self.factor)[None])
            self._codes.extend([key_code(count_key(img))])
        return i

    def render(self, i: int) -> np.ndarray:
        return self.env.render_key(self.keys[i])

    @property
    def features(self) -> np.ndarray:
        return self._features.view

    @property
    def codes(self) -> np.ndarray:
        return self._codes.view


@dataclass
class Trajectory:
    actions: np.ndarray  # (L, 3)
    states: list  # L + 1 EnvStates
    goal_index: int | None = None
    seed: int = 0
    visited: np.ndarray | None = None  # buffer indices, set once recorded

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a trajectory visits one more state than it has actions")

    @property
    def last_state(self) -> EnvState:
        return self.states[-1]


_STATE_COLS = 10


def _state_row(s: EnvState):
    return (int(s.room), s.gripper_pos[0], s.gripper_pos[1], s.gripper_closed, s.object_pos[0],
            s.object_pos[1], s.holding, s.tv_on, s.tv_pattern_seed, s.background_variant)


def _row_state(r) -> EnvState:
    return EnvState(Room(int(r[0])), (float(r[1]), float(r[2])), bool(r[3]),
                    (float(r[4]), float(r[5])), bool(r[6]), bool(r[7]), int(r[8]), int(r[9]))


class ReplayBuffer:
    """Append-only store of visited states with FIFO eviction past ``capacity``.

    Buffer indices always run over the retained states, oldest first.
    """

    def __init__(self, env: PlaygroundRGB, capacity: int = 200_000, factor: int = 2):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.env = env
        self.capacity = capacity
        self.store = ImageStore(env, factor)
        self.counts = CountTable()
        self._code_index: dict = {}
        self._code_counts = _Growable((), np.int64)
        self._img_code = _Growable((), np.int64)  # image id -> code index
        self._states = _Growable((_STATE_COLS,), float)
        self._image_ids = _Growable((), np.int64)
        self._traj_ids = _Growable((), np.int64)
        self._steps = _Growable((), np.int64)
        self._traj_actions: list = []
        self._traj_seeds: list = []
        self._traj_first: list = []  # global id of each trajectory's first state
        self.n_evicted = 0
        self._best = _Growable((), np.int64)  # per image: global id of its latest-step state
        self._best_step = _Growable((), np.int64)
        self._latent_cache = (None, None)
        self._density_cache = (None, None)
        self._cluster_cache = (None, None)

    def __len__(self):
        return self._states.n

    @property
    def image_ids(self) -> np.ndarray:
        return self._image_ids.view

    @property
    def steps(self) -> np.ndarray:
        return self._steps.view

    @property
    def n_trajectories(self) -> int:
        return len(self._traj_actions)

    def state(self, i: int) -> EnvState:
        return _row_state(self._states.view[i])

    def image(self, i: int) -> np.ndarray:
        return self.store.render(int(self.image_ids[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self.image(i)

    def __getitem__(self, i):
        return self.image(i)

    def trajectory_actions(self, traj_id: int) -> np.ndarray:
        return self._traj_actions[traj_id]

    def record_rollout(self, traj: Trajectory) -> np.ndarray:
        """Append every visited state; returns their buffer indices."""
        tid = len(self._traj_actions)
        first = self.n_evicted + len(self)
        self._traj_actions.append(np.array(traj.actions, dtype=float))
        self._traj_seeds.append(int(traj.seed))
        self._traj_first.append(first)

        ids = np.empty(len(traj.states), dtype=np.int64)
        for t, s in enumerate(traj.states):
            img = self.store.add(self.env.image_key(s))
            ids[t] = img
            if img == self._img_code.n:
                code = int(self.store.codes[img])
                ci = self._code_index.get(code)
                if ci is None:
                    ci = len(self._code_index)
                    self._code_index[code] = ci
                    self._code_counts.extend([0])
                self._img_code.extend([ci])
                self._best.extend([-1])
                self._best_step.extend([-1])
            self._code_counts.view[self._img_code.view[img]] += 1
            self.counts.add_code(int(self.store.codes[img]))
            if t > self._best_step.view[img]:
                self._best_step.view[img] = t
                self._best.view[img] = first + t

        self._states.extend([_state_row(s) for s in traj.states])
        self._image_ids.extend(ids)
        self._traj_ids.extend(np.full(len(ids), tid))
        self._steps.extend(np.arange(len(ids)))
        overflow = len(self) - self.capacity
        if overflow > 0:
            self._evict(overflow)
        traj.visited = np.arange(first, first + len(ids)) - self.n_evicted
        return traj.visited

    def _evict(self, k: int):
        for g in (self._states, self._image_ids, self._traj_ids, self._steps):
            g.drop_front(k)
        self.n_evicted += k
        # rebuild the latest-step anchor of every image from the retained states
        self._best.view[:] = -1
        self._best_step.view[:] = -1
        ids, steps = self.image_ids, self.steps
        order = np.lexsort((-np.arange(len(ids)), steps))  # by step, then earliest index last
        self._best_step.view[ids[order]] = steps[order]
        self._best.view[ids[order]] = order + self.n_evicted

    def state_counts(self, counts: CountTable | None = None) -> np.ndarray:
        """Count of every buffer state's quantized image."""
        if counts is None or counts is self.counts:
            per_image = self._code_counts.view[self._img_code.view]
        else:
            per_image = np.array([counts.count_code(int(c)) for c in self.store.codes])
        return per_image[self.image_ids].astype(float)

    def latents(self, model: PcaModel) -> np.ndarray:
        """Latents of every stored image (not only retained ones) under ``model``."""
        cached_model, Z = self._latent_cache
        if cached_model is not model or len(Z) != len(self.store):
            Z = embed_features(model, self.store.features)
            self._latent_cache = (model, Z)
        return Z

    def image_log_density(self, density: DensityModel, model: PcaModel, chunk: int = 16384) -> np.ndarray:
        key, out = self._density_cache
        if key != (id(density), id(model)) or len(out) != len(self.store):
            Z = self.latents(model)
            out = np.concatenate([log_density(density, Z[s:s + chunk]) for s in range(0, len(Z), chunk)])
            self._density_cache = ((id(density), id(model)), out)
        return out

    def image_clusters(self, cl) -> np.ndarray:
        cached, out = self._cluster_cache
        if cached is not cl or len(out) != len(self.store):
            out = cl.assign_latents(self.latents(cl.pca))
            self._cluster_cache = (cl, out)
        return out

    def find_anchors(self, goal_latents: np.ndarray, model: PcaModel) -> np.ndarray:
        """Buffer index of the best anchor for each goal latent.

        The anchor image maximizes the latent reward; among states showing that
        image the one reached latest in its episode wins (earliest index on ties),
        so that the fewest random steps follow the replayed prefix.
        """
        if len(self) == 0:
            raise ValueError("empty replay buffer")
        G = np.atleast_2d(np.asarray(goal_latents, dtype=float))
        Z = self.latents(model)
        present = np.flatnonzero(self._best.view >= self.n_evicted)
        Zp = Z[present]
        approx = (Zp * Zp).sum(1)[None, :] - 2.0 * G @ Zp.T
        out = np.empty(len(G), dtype=np.int64)
        for j, row in enumerate(approx):
            # exact recheck of near-minimal candidates
            scale = 1e-9 * (1.0 + np.abs(row).max() + (G[j] @ G[j]))
            cand = np.flatnonzero(row <= row.min() + scale)
            exact = ((Zp[cand] - G[j]) ** 2).sum(1)
            img = present[cand[np.argmin(exact)]]
            out[j] = self._best.view[img] - self.n_evicted
        return out

    def replay_prefix(self, index: int, rng: np.random.Generator):
        """Re-run the recorded actions up to buffer state ``index``."""
        tid = int(self._traj_ids.view[index])
        t = int(self._steps.view[index])
        actions = self._traj_actions[tid][:t]
        s = self.env.reset(self._traj_seeds[tid])
        states = [s]
        for a in actions:
            s = self.env.step(s, a, rng)
            states.append(s)
        return actions, states, self._traj_seeds[tid]


def random_actions(env: PlaygroundRGB, n: int, rng: np.random.Generator) -> np.ndarray:
    d = env.config.delta
    return rng.uniform([-d, -d, -1.0], [d, d, 1.0], size=(n, 3))


def _continue(env, states, actions, n, rng, env_rng):
    tail = random_actions(env, n, rng)
    s = states[-1]
    for a in tail:
        s = env.step(s, a, env_rng)
        states.append(s)
    return np.concatenate([np.asarray(actions, dtype=float).reshape(-1, 3), tail])


def random_rollout(env: PlaygroundRGB, episode_length: int, rng: np.random.Generator,
                   env_rng: np.random.Generator | None = None, seed: int = 0) -> Trajectory:
    env_rng = rng if env_rng is None else env_rng
    states = [env.reset(seed)]
    actions = _continue(env, states, [], episode_length, rng, env_rng)
    return Trajectory(actions, states, None, seed)


def reach_from_anchor(buffer: ReplayBuffer, anchor: int, env: PlaygroundRGB, episode_length: int,
                      rng: np.random.Generator, env_rng: np.random.Generator | None = None,
                      goal_index: int | None = None) -> Trajectory:
    env_rng = rng if env_rng is None else env_rng
    prefix, states, seed = buffer.replay_prefix(anchor, env_rng)
    prefix, states = prefix[:episode_length], states[:episode_length + 1]
    actions = _continue(env, states, prefix, episode_length - len(prefix), rng, env_rng)
    return Trajectory(actions, states, goal_index, seed)


def reach(buffer: ReplayBuffer, goal_latent, reward_model: PcaModel, env: PlaygroundRGB,
          episode_length: int, rng: np.random.Generator, env_rng: np.random.Generator | None = None,
          goal_index: int | None = None) -> Trajectory:
    """Return to the most goal-like known state, then act randomly until the episode ends."""
    anchor = int(buffer.find_anchors(goal_latent, reward_model)[0])
    return reach_from_anchor(buffer, anchor, env, episode_length, rng, env_rng, goal_index)
