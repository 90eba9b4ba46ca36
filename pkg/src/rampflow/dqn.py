"""A small deep Q-network written directly on numpy, plus its training loop.

All math runs in float64.  The same loop drives a lookup-table Q-function,
which lets it be checked against value iteration on small MDPs.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .mdp_env import N_FEATURES, ActionSet, DaccPolicy, Transition

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HIDDEN = (8, 12, 20, 16)


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.95
    eps0: float = 1.0
    eps_min: float = 0.001
    eps_decay: float = 0.9995
    batch: int = 32
    learning_rate: float = 0.001
    target_sync_every: int = 1000   # episodes
    buffer_capacity: int = 20_000

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 <= self.eps_min <= self.eps0 <= 1:
            raise ValueError("need 0 <= eps_min <= eps0 <= 1")
        if not 0 < self.eps_decay < 1:
            raise ValueError("eps_decay must be in (0, 1)")
        if self.batch < 1 or self.target_sync_every < 1 or self.buffer_capacity < 0:
            raise ValueError("batch and target_sync_every must be >= 1, buffer_capacity >= 0")


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------

class QNetwork:
    """ReLU MLP with a linear output layer; ``weights[l]`` has shape (fan_in, fan_out)."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError("need at least input and output layers of positive width")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = [rng.standard_normal((a, b)) * math.sqrt(2.0 / a)
                        for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.biases = [np.zeros(b) for b in self.sizes[1:]]

    @classmethod
    def default(cls, n_actions: int, rng: np.random.Generator | None = None) -> "QNetwork":
        return cls((N_FEATURES, *HIDDEN, n_actions), rng)

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.sizes = self.sizes
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def forward(self, x) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if l < last:
                h = np.maximum(h, 0.0)
        return h

    __call__ = forward

    def backward(self, states, actions, targets) -> tuple[float, list[np.ndarray]]:
        """MSE on the taken actions only; returns (loss, grads ordered like :meth:`params`)."""
        x = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=float)
        n = x.shape[0]
        acts = [x]
        pre = []
        h = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if l < last else z
            acts.append(h)
        err = h[np.arange(n), actions] - targets
        loss = float(np.mean(err ** 2))
        delta = np.zeros_like(h)
        delta[np.arange(n), actions] = 2.0 * err / n
        grads: list[np.ndarray] = []
        for l in range(last, -1, -1):
            gw = acts[l].T @ delta
            gb = delta.sum(axis=0)
            grads = [gw, gb] + grads
            if l > 0:
                delta = (delta @ self.weights[l].T) * (pre[l - 1] > 0)
        return loss, grads

    def sgd(self, grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(self.params(), grads):
            p -= lr * g
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise FloatingPointError("non-finite weights after update: "
                                     + ", ".join(f"|g|max={np.abs(g).max():.3g}" for g in grads))

    # QFunction interface used by the trainer
    def predict(self, states) -> np.ndarray:
        return self.forward(states)

    def fit(self, states, actions, targets, lr: float) -> float:
        loss, grads = self.backward(states, actions, targets)
        self.sgd(grads, lr)
        return loss


class TabularQ:
    """Lookup-table Q-function over one-hot-free integer states (state = index in ``states[:, 0]``)."""

    def __init__(self, n_states: int, n_actions: int):
        self.table = np.zeros((n_states, n_actions))

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def copy(self) -> "TabularQ":
        other = TabularQ(*self.table.shape)
        other.table = self.table.copy()
        return other

    def predict(self, states) -> np.ndarray:
        idx = np.asarray(states, dtype=float).reshape(-1, 1)[:, 0].astype(np.int64)
        q = self.table[idx]
        return q[0] if np.ndim(states) <= 1 and np.size(states) == 1 else q

    def fit(self, states, actions, targets, lr: float) -> float:
        idx = np.asarray(states, dtype=float).reshape(len(actions), -1)[:, 0].astype(np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        err = self.table[idx, actions] - np.asarray(targets)
        np.add.at(self.table, (idx, actions), -lr * err)
        return float(np.mean(err ** 2))


# --------------------------------------------------------------------------
# learning pieces
# --------------------------------------------------------------------------

def td_target(r, s_next, done, target_net, gamma: float):
    """r if done, else r + gamma * max_a' Q(s_next, a'; target); vectorised over a batch."""
    r = np.asarray(r, dtype=float)
    done = np.asarray(done, dtype=bool)
    q_next = np.asarray(target_net.predict(s_next), dtype=float)
    best = q_next.max(axis=-1)
    y = np.where(done, r, r + gamma * best)
    return float(y) if y.ndim == 0 else y


def select_action(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index.

    Always draws one uniform from ``rng`` so the stream advances identically.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    q = np.asarray(q_values, dtype=float)
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def epsilon_schedule(step: int, hp: Hyperparams) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    return max(hp.eps0 * hp.eps_decay ** step, hp.eps_min)


class ReplayBuffer:
    """FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int = 20_000):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity) if capacity else deque(maxlen=0)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, tr: Transition) -> None:
        if self.capacity:
            self._items.append(tr)

    def items(self) -> list:
        return list(self._items)

    def sample(self, n: int, rng: np.random.Generator):
        """Uniform draw with replacement; returns stacked (s, a, r, s_next, done)."""
        if len(self._items) == 0:
            raise ValueError("cannot sample from an empty buffer")
        pick = rng.integers(len(self._items), size=n)
        batch = [self._items[i] for i in pick]
        s = np.array([tr.s for tr in batch], dtype=float)
        a = np.array([tr.a for tr in batch], dtype=np.int64)
        r = np.array([tr.r for tr in batch], dtype=float)
        s2 = np.array([tr.s_next for tr in batch], dtype=float)
        d = np.array([tr.done for tr in batch], dtype=bool)
        return s, a, r, s2, d


class DqnAgent:
    """Epsilon-greedy actor plus learner: replay, one SGD step per decision, periodic target sync.

    Works with any Q-function exposing ``predict``, ``fit``, ``copy`` and ``n_actions``.
    """

    def __init__(self, q, hp: Hyperparams = Hyperparams(), rng: np.random.Generator | None = None):
        self.q = q
        self.target = q.copy()
        self.hp = hp
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.buffer = ReplayBuffer(hp.buffer_capacity)
        self.decisions = 0
        self.episodes = 0
        self.updates = 0
        self.losses: list[float] = []

    @property
    def epsilon(self) -> float:
        return epsilon_schedule(self.decisions, self.hp)

    def act(self, state, explore: bool = True) -> int:
        q = self.q.predict(state)
        if not explore:
            return int(np.argmax(q))
        a = select_action(q, self.epsilon, self.rng)
        self.decisions += 1
        return a

    def observe(self, tr: Transition) -> None:
        self.buffer.push(tr)
        if len(self.buffer) >= self.hp.batch and self.hp.buffer_capacity > 0:
            s, a, r, s2, d = self.buffer.sample(self.hp.batch, self.rng)
            y = td_target(r, s2, d, self.target, self.hp.gamma)
            self.losses.append(self.q.fit(s, a, y, self.hp.learning_rate))
            self.updates += 1

    def end_episode(self) -> None:
        self.episodes += 1
        if self.episodes % self.hp.target_sync_every == 0:
            self.target = self.q.copy()


class GreedyAgent:
    """Frozen network used for evaluation: argmax, no exploration, no learning."""

    def __init__(self, net):
        self.q = net

    def act(self, state, explore: bool = False) -> int:
        return int(np.argmax(self.q.predict(state)))

    def observe(self, tr: Transition) -> None:
        pass


@dataclass
class TrainResult:
    net: object
    curve: list = field(default_factory=list)   # (episode, mean_reward, epsilon)
    agent: DqnAgent | None = None

    def curve_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("episode,mean_reward,epsilon\n")
            for ep, r, eps in self.curve:
                fh.write(f"{ep},{r!r},{eps!r}\n")


def train(run_one: Callable[[DqnAgent, int], float], agent: DqnAgent, episodes: int,
          progress: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Generic loop: ``run_one(agent, episode)`` plays one episode and returns its mean reward."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    result = TrainResult(agent.q, agent=agent)
    for ep in range(episodes):
        mean_r = run_one(agent, ep)
        agent.end_episode()
        result.curve.append((ep + 1, float(mean_r), agent.epsilon))
        if progress is not None:
            progress(ep + 1, float(mean_r), agent.epsilon)
    return result


def train_dacc(scenario, episodes: int, hp: Hyperparams = Hyperparams(), seed: int = 0,
               action_set: ActionSet | None = None,
               progress: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Train the shared D-ACC network on ``scenario``; episode ``k`` uses world seed ``seed + k``."""
    from .mdp_env import run_episode
    from .road_world import make_streams

    action_set = action_set or ActionSet()
    rng = make_streams(seed)["exploration"]
    net = QNetwork.default(len(action_set), rng)
    agent = DqnAgent(net, hp, rng)
    policy = DaccPolicy(agent, action_set, learn=True)

    def run_one(agent, ep):
        world = scenario.make_world(seed + ep)
        return run_episode(world, policy, scenario.horizon, scenario).mean_reward

    return train(run_one, agent, episodes, progress)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def save_model(net: QNetwork, path, action_set: ActionSet | None = None) -> None:
    from .mdp_env import JAM_DENSITY, RAMP_LENGTH_NORM, SPEED_NORM

    action_set = action_set or ActionSet()
    if len(action_set) != net.n_actions:
        raise ValueError("action set size does not match the network output")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "layer_sizes": list(net.sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "action_set": list(action_set.headways),
        "normalization": {"jam_density": JAM_DENSITY, "speed": SPEED_NORM,
                          "ramp_length": RAMP_LENGTH_NORM},
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path, action_set: ActionSet | None = None) -> tuple[QNetwork, ActionSet]:
    """Load a saved network; refuses other schema versions, bad shapes or a different action count."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"model file {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"model schema {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    sizes = [int(s) for s in doc["layer_sizes"]]
    if sizes[0] != N_FEATURES:
        raise ValueError(f"model input width {sizes[0]}, expected {N_FEATURES}")
    saved = ActionSet(tuple(doc["action_set"]))
    if len(saved) != sizes[-1]:
        raise ValueError("model action set does not match its output width")
    if action_set is not None and len(action_set) != len(saved):
        raise ValueError(f"model has {len(saved)} actions, config has {len(action_set)}")
    net = QNetwork.__new__(QNetwork)
    net.sizes = tuple(sizes)
    net.weights = [np.array(w, dtype=float) for w in doc["weights"]]
    net.biases = [np.array(b, dtype=float) for b in doc["biases"]]
    for l, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        if net.weights[l].shape != (a, b) or net.biases[l].shape != (b,):
            raise ValueError(f"layer {l} has the wrong shape")
    return net, saved
