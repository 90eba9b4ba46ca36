"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from rampflow.dqn import DqnAgent, Hyperparams, QNetwork, TabularQ, train
from rampflow.mdp_env import Transition

# 4-state chain: action 0 steps left, action 1 steps right (walls clamp);
# +1 for landing on the right end, -1 otherwise
CHAIN_STATES = 4
CHAIN_ACTIONS = 2


def chain_step(s: int, a: int) -> tuple[int, int]:
    s2 = max(s - 1, 0) if a == 0 else min(s + 1, CHAIN_STATES - 1)
    return s2, (1 if s2 == CHAIN_STATES - 1 else -1)


def value_iteration(gamma: float, tol: float = 1e-13) -> np.ndarray:
    q = np.zeros((CHAIN_STATES, CHAIN_ACTIONS))
    while True:
        new = np.empty_like(q)
        for s in range(CHAIN_STATES):
            for a in range(CHAIN_ACTIONS):
                s2, r = chain_step(s, a)
                new[s, a] = r + gamma * q[s2].max()
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def train_chain(steps: int = 50_000, episode_len: int = 20, seed: int = 0, lr: float = 0.1):
    """Run the real training loop on the chain with a lookup-table Q; returns (table, steps used)."""
    hp = Hyperparams(gamma=0.95, eps0=1.0, eps_min=1.0, learning_rate=lr, target_sync_every=1)
    rng = np.random.default_rng(seed)
    agent = DqnAgent(TabularQ(CHAIN_STATES, CHAIN_ACTIONS), hp, rng)
    env_rng = np.random.default_rng(seed + 1)

    def run_one(agent, ep):
        s = int(env_rng.integers(CHAIN_STATES))
        total = 0
        for _ in range(episode_len):
            a = agent.act(np.array([float(s)]))
            s2, r = chain_step(s, a)
            agent.observe(Transition((float(s),), a, r, (float(s2),), False))
            total += r
            s = s2
        return total / episode_len

    train(run_one, agent, steps // episode_len)
    return agent.q.table, agent.decisions


def loss_of(net: QNetwork, x, a, y) -> float:
    q = net.forward(x)
    return float(np.mean((q[np.arange(len(a)), a] - y) ** 2))


def finite_difference_errors(net: QNetwork, x, a, y, eps: float = 1e-6) -> np.ndarray:
    """Relative error between backprop and central differences for every parameter."""
    _, grads = net.backward(x, a, y)
    errs = []
    for p, g in zip(net.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + eps
            up = loss_of(net, x, a, y)
            flat[k] = keep - eps
            down = loss_of(net, x, a, y)
            flat[k] = keep
            fd = (up - down) / (2 * eps)
            errs.append(abs(gflat[k] - fd) / max(abs(gflat[k]) + abs(fd), 1e-7))
    return np.array(errs)


def random_gradient_case(seed: int):
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    sizes = [int(rng.integers(2, 7)) for _ in range(depth + 2)]
    net = QNetwork(sizes, rng)
    for b in net.biases:
        b[:] = rng.normal(0, 0.3, b.shape)
    n = int(rng.integers(1, 9))
    x = rng.normal(size=(n, sizes[0]))
    a = rng.integers(sizes[-1], size=n)
    y = rng.normal(size=n)
    return net, x, a, y
