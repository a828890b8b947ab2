"""Environment constructors and demonstration sampling.

Environments are addressable by name in CLI configs: ``bandit:dense``,
``bandit:sparse``, ``bermuda:NXxNY``, and ``random:seed=...,s=...,a=...``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mdp import TabularMdp, TabularPolicy

# 8 movement angles, -pi to 3pi/4 in pi/4 steps
BERMUDA_ANGLES = -math.pi + math.pi / 4.0 * np.arange(8)
BERMUDA_TARGETS = np.array([(-5.0, 10.0), (0.0, 10.0), (5.0, 10.0)])
BERMUDA_EPS = 1e-4


@dataclass
class DemoSet:
    """Expert demonstration pairs, plus the generating policy when known.

    The stored expert policy is ground truth for evaluation only; training
    code must touch nothing but the (state, action) pairs.
    """

    states: np.ndarray
    actions: np.ndarray
    expert_policy: TabularPolicy | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=int)
        self.actions = np.asarray(self.actions, dtype=int)
        if self.states.shape != self.actions.shape or self.states.ndim != 1:
            raise ValidationError("demo states/actions must be matching 1-d arrays")

    def __len__(self) -> int:
        return self.states.size

    def check_ranges(self, n_states: int, n_actions: int) -> None:
        if len(self) == 0:
            return
        if self.states.min() < 0 or self.states.max() >= n_states:
            raise ValidationError("demo state index out of range")
        if self.actions.min() < 0 or self.actions.max() >= n_actions:
            raise ValidationError("demo action index out of range")


def bandit_env(kind: str):
    """Single-state 4-armed bandit with a self-loop, gamma=0.99, no reward.

    kind 'dense' pairs it with the (0.1, 0.2, 0.3, 0.4) expert, 'sparse'
    with (0, 0, 1/3, 2/3).
    """
    if kind not in ("dense", "sparse"):
        raise ValidationError(f"bandit kind must be 'dense' or 'sparse', got {kind!r}")
    transition = np.ones((1, 4, 1))
    mdp = TabularMdp(1, 4, np.array([1.0]), transition, gamma=0.99)
    if kind == "dense":
        expert = np.array([[0.1, 0.2, 0.3, 0.4]])
    else:
        expert = np.array([[0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0]])
    return mdp, TabularPolicy(expert)


def bermuda_expert_row(x: float, y: float) -> np.ndarray:
    """Stochastic expert over the 8 angles at a continuous position (x, y).

    Mixes the angle-to-target directions with inverse-quartic distance
    weights: pi(a) proportional to sum_t 1/(|target_t - s|^4 + eps) over
    targets whose projected angle is a.
    """
    row = np.zeros(len(BERMUDA_ANGLES))
    for tx, ty in BERMUDA_TARGETS:
        dist4 = ((tx - x) ** 2 + (ty - y) ** 2) ** 2 + BERMUDA_EPS
        theta = math.atan2(ty - y, tx - x)
        row[_project_angle(theta)] += 1.0 / dist4
    return row / row.sum()


def _project_angle(theta: float) -> int:
    """Index of the movement angle circularly closest to theta (smaller index on ties)."""
    diff = np.abs(np.angle(np.exp(1j * (BERMUDA_ANGLES - theta))))
    return int(diff.argmin())


def bermuda_grid(nx: int = 21, ny: int = 21, gamma: float = 0.8):
    """Discretized three-target navigation world on [-5, 5] x [0, 10].

    States are the nx*ny cell centers (index s = iy*nx + ix). Each action
    moves one unit along its angle, is clamped to the domain, and snaps to
    the nearest cell center (ties toward the smaller index). Top-row cells
    are absorbing; the initial distribution is uniform over the bottom row.
    Returns the MDP (no reward) and the expert policy at the cell centers.
    """
    if nx < 2 or ny < 2:
        raise ValidationError("bermuda grid needs nx, ny >= 2")
    xs = -5.0 + 10.0 * (np.arange(nx) + 0.5) / nx
    ys = 0.0 + 10.0 * (np.arange(ny) + 0.5) / ny
    n_states = nx * ny
    n_actions = len(BERMUDA_ANGLES)
    transition = np.zeros((n_states, n_actions, n_states))
    expert = np.zeros((n_states, n_actions))
    for iy in range(ny):
        for ix in range(nx):
            s = iy * nx + ix
            expert[s] = bermuda_expert_row(xs[ix], ys[iy])
            if iy == ny - 1:  # absorbing top row
                transition[s, :, s] = 1.0
                continue
            for a, ang in enumerate(BERMUDA_ANGLES):
                px = min(max(xs[ix] + math.cos(ang), -5.0), 5.0)
                py = min(max(ys[iy] + math.sin(ang), 0.0), 10.0)
                # nearest center; exact midpoints round down to the smaller index
                jx = int(np.argmin(np.abs(xs - px)))
                jy = int(np.argmin(np.abs(ys - py)))
                transition[s, a, jy * nx + jx] = 1.0
    p0 = np.zeros(n_states)
    p0[:nx] = 1.0 / nx
    mdp = TabularMdp(n_states, n_actions, p0, transition, gamma=gamma)
    return mdp, TabularPolicy(expert)


def random_mdp(
    seed: int,
    n_states: int,
    n_actions: int,
    gamma: float,
    transition_sparsity: float = 1.0,
) -> TabularMdp:
    """Seeded random MDP with an ergodicity floor (1% uniform mass per row).

    Each transition row draws a random support of the requested sparsity
    with positive Dirichlet-like weights; the uniform floor keeps every
    state reachable, which the log-based rewards downstream rely on.
    """
    if n_states < 1 or n_actions < 1:
        raise ValidationError("n_states and n_actions must be >= 1")
    if not 0.0 < transition_sparsity <= 1.0:
        raise ValidationError("transition_sparsity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    support = max(1, round(transition_sparsity * n_states))
    transition = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            idx = rng.choice(n_states, size=support, replace=False)
            w = rng.random(support) + 1e-3
            transition[s, a, idx] = w / w.sum()
    transition = 0.99 * transition + 0.01 / n_states
    p0 = rng.random(n_states) + 1e-3
    p0 /= p0.sum()
    return TabularMdp(n_states, n_actions, p0, transition, gamma=gamma)


def sample_transitions(mdp: TabularMdp, probs: np.ndarray, n_pairs: int, rng):
    """n_pairs steps of the (1-gamma)-reset chain: arrays (states, actions, next_states).

    At each step the action is drawn from ``probs`` and the successor from
    the transition kernel; with probability 1-gamma the chain restarts at
    p0. The visited (s, a) pairs are therefore distributed as the
    discounted visitation d_pi in the long run.
    """
    states = np.empty(n_pairs, dtype=int)
    actions = np.empty(n_pairs, dtype=int)
    next_states = np.empty(n_pairs, dtype=int)
    cum_p0 = getattr(mdp, "_cum_p0", None)
    if cum_p0 is None:
        cum_p0 = np.cumsum(mdp.p0)
        mdp._cum_p0 = cum_p0
    cum_pi = np.cumsum(probs, axis=1)
    next_idx = mdp._next_state
    cum_t = None
    if next_idx is None:
        cum_t = getattr(mdp, "_cum_transition", None)
        if cum_t is None:
            cum_t = np.cumsum(mdp.transition, axis=2)
            mdp._cum_transition = cum_t
    s = int(np.searchsorted(cum_p0, rng.random() * cum_p0[-1]))
    u = rng.random((n_pairs, 3))
    if next_idx is not None:
        # deterministic dynamics: plain-python loop over list rows is much
        # faster than per-step numpy scalar calls
        import bisect

        pi_rows = [row.tolist() for row in cum_pi]
        next_rows = next_idx.tolist()
        out_s, out_a, out_n = states.tolist(), actions.tolist(), next_states.tolist()
        u0, u2 = u[:, 0].tolist(), u[:, 2].tolist()
        gamma = mdp.gamma
        for i in range(n_pairs):
            row = pi_rows[s]
            a = bisect.bisect_left(row, u0[i] * row[-1])
            s2 = next_rows[s][a]
            out_s[i] = s
            out_a[i] = a
            out_n[i] = s2
            if u2[i] > gamma:
                s = int(np.searchsorted(cum_p0, rng.random() * cum_p0[-1]))
            else:
                s = s2
        return np.array(out_s), np.array(out_a), np.array(out_n)
    for i in range(n_pairs):
        a = int(np.searchsorted(cum_pi[s], u[i, 0] * cum_pi[s, -1]))
        s2 = int(np.searchsorted(cum_t[s, a], u[i, 1] * cum_t[s, a, -1]))
        states[i] = s
        actions[i] = a
        next_states[i] = s2
        if u[i, 2] > mdp.gamma:
            s = int(np.searchsorted(cum_p0, rng.random() * cum_p0[-1]))
        else:
            s = s2
    return states, actions, next_states


def sample_demos(mdp: TabularMdp, policy: TabularPolicy, n_pairs: int, seed: int) -> DemoSet:
    """Roll (state, action) pairs from the policy under the MDP dynamics.

    Deterministic per seed; the generating policy is kept on the DemoSet
    for evaluation.
    """
    if n_pairs < 1:
        raise ValidationError("n_pairs must be positive")
    rng = np.random.default_rng(seed)
    states, actions, _ = sample_transitions(mdp, policy.probs, n_pairs, rng)
    return DemoSet(states, actions, expert_policy=policy)


_RANDOM_ENV_RE = re.compile(r"^random:(.*)$")


def make_env(name: str):
    """Resolve an environment name to (mdp, expert_policy_or_None)."""
    if name == "bandit:dense":
        return bandit_env("dense")
    if name == "bandit:sparse":
        return bandit_env("sparse")
    if name.startswith("bermuda:"):
        m = re.match(r"^bermuda:(\d+)x(\d+)$", name)
        if not m:
            raise ValidationError(f"bad bermuda spec {name!r}, expected bermuda:NXxNY")
        return bermuda_grid(int(m.group(1)), int(m.group(2)))
    m = _RANDOM_ENV_RE.match(name)
    if m:
        params = {"gamma": 0.95, "sparsity": 1.0}
        for part in m.group(1).split(","):
            if not part:
                continue
            key, _, value = part.partition("=")
            if key not in ("seed", "s", "a", "gamma", "sparsity"):
                raise ValidationError(f"unknown random-MDP parameter {key!r}")
            params[key] = float(value)
        for req in ("seed", "s", "a"):
            if req not in params:
                raise ValidationError(f"random MDP spec needs {req}= (got {name!r})")
        mdp = random_mdp(
            int(params["seed"]),
            int(params["s"]),
            int(params["a"]),
            params["gamma"],
            params["sparsity"],
        )
        return mdp, None
    raise ValidationError(f"unknown environment {name!r}")
