"""Adversarial reward learning on tabular MDPs, plus a behavioral-cloning baseline.

The loop alternates three steps: sample rollout pairs with the learner's
policy, ascend the structured-discriminator objective

    max_r  E_demo[log sigma(r - t(.; pi))] + E_rollout[log(1 - sigma(r - t(.; pi)))],

and improve the policy against the current learned reward (either the
exact regularized solve or sampled actor-critic updates). At the balance
point the learned reward matches the closed-form solution t(.; pi_E) up to
potential-based shaping, which is why evaluation mean-centers rewards per
state before comparing.

Two reward models are supported: a raw table (NSM) and the structured
density-based model (DBM) r(s,a) = -lam * f'(softmax(logits[s])[a]) + B(s),
whose softmax keeps the implied policy row-stochastic by construction and
therefore pins rewards even on actions the data stops visiting.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .divergence import bregman_discrete
from .envs import DemoSet, sample_transitions
from .errors import ValidationError
from .irl import exact_irl_reward
from .mdp import TabularMdp, TabularPolicy, regularized_value_iteration, return_value
from .regularizers import (
    RegularizerSpec,
    _f_prime_raw,
    _f_second_raw,
    omega_rows,
)
from .validation import as_float_array

NSM = "nsm"
DBM = "dbm"
EXACT_VI = "exact_vi"
SAMPLED_RAC = "sampled_rac"


@dataclass
class RewardModel:
    """Learned reward: either a raw table (NSM) or logits+baseline (DBM)."""

    kind: str
    nsm_table: np.ndarray | None = None
    dbm_logits: np.ndarray | None = None
    dbm_baseline: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == NSM:
            if self.nsm_table is None or self.dbm_logits is not None or self.dbm_baseline is not None:
                raise ValidationError("NSM model must carry exactly the nsm_table field")
            self.nsm_table = as_float_array(self.nsm_table, "nsm_table")
        elif self.kind == DBM:
            if self.dbm_logits is None or self.dbm_baseline is None or self.nsm_table is not None:
                raise ValidationError("DBM model must carry exactly dbm_logits and dbm_baseline")
            self.dbm_logits = as_float_array(self.dbm_logits, "dbm_logits")
            self.dbm_baseline = as_float_array(self.dbm_baseline, "dbm_baseline")
            if self.dbm_logits.shape[0] != self.dbm_baseline.shape[0]:
                raise ValidationError("dbm_logits and dbm_baseline disagree on state count")
        else:
            raise ValidationError(f"unknown reward model kind {self.kind!r}")

    @classmethod
    def zeros(cls, kind: str, n_states: int, n_actions: int) -> "RewardModel":
        if kind == NSM:
            return cls(NSM, nsm_table=np.zeros((n_states, n_actions)))
        return cls(
            DBM,
            dbm_logits=np.zeros((n_states, n_actions)),
            dbm_baseline=np.zeros(n_states),
        )

    def implied_policy(self) -> np.ndarray:
        """Row softmax of the DBM logits; strictly positive by construction."""
        if self.kind != DBM:
            raise ValidationError("only DBM models imply a policy")
        return _softmax_rows(self.dbm_logits)

    def to_json(self) -> dict:
        if self.kind == NSM:
            return {"kind": NSM, "nsm_table": self.nsm_table.tolist()}
        return {
            "kind": DBM,
            "dbm_logits": self.dbm_logits.tolist(),
            "dbm_baseline": self.dbm_baseline.tolist(),
        }


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class TrainConfig:
    """Knobs for the adversarial loop; desk-scale defaults, all overridable."""

    reg: RegularizerSpec
    iterations: int = 500
    batch_size: int = 256
    rollout_steps_per_iter: int = 100
    disc_lr: float = 0.1
    policy_lr: float = 0.1
    seed: int = 0
    policy_mode: str = EXACT_VI
    eval_interval: int = 50
    reward_model: str = DBM
    disc_steps_per_iter: int = 1
    policy_steps_per_iter: int = 1
    replay_capacity: int = 50_000
    vi_tol: float = 1e-8

    def __post_init__(self):
        for name in ("iterations", "batch_size", "rollout_steps_per_iter", "eval_interval",
                     "disc_steps_per_iter", "policy_steps_per_iter", "replay_capacity"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if self.disc_lr <= 0 or self.policy_lr <= 0:
            raise ValidationError("learning rates must be positive")
        if self.policy_mode not in (EXACT_VI, SAMPLED_RAC):
            raise ValidationError(f"unknown policy_mode {self.policy_mode!r}")
        if self.reward_model not in (NSM, DBM):
            raise ValidationError(f"unknown reward_model {self.reward_model!r}")
        if not isinstance(self.reg, RegularizerSpec):
            raise ValidationError("config.reg must be a RegularizerSpec")


@dataclass
class TrainMetrics:
    """Per-evaluation metric rows, ordered by iteration."""

    probe_names: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def columns(self) -> list:
        return ["iter", "disc_loss", *self.probe_names, "episodic_return", "policy_tv"]

    def append(self, row: dict) -> None:
        if self.rows and row["iter"] <= self.rows[-1]["iter"]:
            raise ValidationError("metric rows must be appended in iteration order")
        self.rows.append(row)

    def last(self, column: str):
        return self.rows[-1][column] if self.rows else None

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def to_csv_lines(self) -> list:
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                val = row.get(col)
                if val is None:
                    cells.append("")
                elif col == "iter":
                    cells.append(str(val))
                else:
                    cells.append(repr(float(val)))
            lines.append(",".join(cells))
        return lines


def model_reward_table(model: RewardModel, spec: RegularizerSpec) -> np.ndarray:
    """Dense (S, A) reward table of a model under the given regularizer."""
    if model.kind == NSM:
        return model.nsm_table.copy()
    p = model.implied_policy()
    return -spec.lam * _f_prime_raw(spec, p) + model.dbm_baseline[:, None]


def reward_of_model(model: RewardModel, spec: RegularizerSpec, s: int, a: int) -> float:
    """Single-entry model reward; NSM is a raw lookup, DBM goes through -lam*f'."""
    table = model.nsm_table if model.kind == NSM else None
    if table is not None:
        if not (0 <= s < table.shape[0] and 0 <= a < table.shape[1]):
            raise ValidationError("state/action index out of range")
        return float(table[s, a])
    p = model.implied_policy()
    if not (0 <= s < p.shape[0] and 0 <= a < p.shape[1]):
        raise ValidationError("state/action index out of range")
    return float(-spec.lam * _f_prime_raw(spec, p[s, a]) + model.dbm_baseline[s])


def discriminator_logit(
    model: RewardModel, policy: TabularPolicy, spec: RegularizerSpec, s: int, a: int
) -> float:
    """r_model(s, a) - t(s, a; policy); the discriminator is the logistic of this."""
    t = exact_irl_reward(policy, spec)
    return reward_of_model(model, spec, s, a) - float(t[s, a])


def _logit_table(model, policy, spec, t_table=None):
    t = exact_irl_reward(policy, spec) if t_table is None else t_table
    return model_reward_table(model, spec) - t


def discriminator_objective(
    model: RewardModel,
    demo_batch,
    rollout_batch,
    policy: TabularPolicy,
    spec: RegularizerSpec,
    t_table=None,
) -> float:
    """Minibatch value of E_demo[log D] + E_rollout[log(1-D)]."""
    z = _logit_table(model, policy, spec, t_table)
    ds, da = demo_batch
    rs, ra = rollout_batch
    if len(ds) == 0 or len(rs) == 0:
        raise ValidationError("discriminator batches must be nonempty")
    # log sigma(z) = -log(1+e^-z), log(1-sigma(z)) = -log(1+e^z)
    demo_term = -np.logaddexp(0.0, -z[ds, da]).mean()
    roll_term = -np.logaddexp(0.0, z[rs, ra]).mean()
    return float(demo_term + roll_term)


def discriminator_gradients(
    model: RewardModel,
    demo_batch,
    rollout_batch,
    policy: TabularPolicy,
    spec: RegularizerSpec,
    t_table=None,
) -> dict:
    """Analytic ascent gradients of the minibatch objective w.r.t. model parameters."""
    z = _logit_table(model, policy, spec, t_table)
    ds, da = demo_batch
    rs, ra = rollout_batch
    if len(ds) == 0 or len(rs) == 0:
        raise ValidationError("discriminator batches must be nonempty")
    s_all = np.concatenate([ds, rs])
    a_all = np.concatenate([da, ra])
    # d objective / d z per sample: sigma(-z)/n_demo on demos, -sigma(z)/n_roll on rollouts
    w_demo = _sigmoid(-z[ds, da]) / len(ds)
    w_roll = -_sigmoid(z[rs, ra]) / len(rs)
    w = np.concatenate([w_demo, w_roll])
    n_states, n_actions = z.shape
    flat = s_all * n_actions + a_all
    if model.kind == NSM:
        grad = np.bincount(flat, weights=w, minlength=n_states * n_actions)
        return {"nsm_table": grad.reshape(n_states, n_actions)}
    p = model.implied_policy()
    grad_b = np.bincount(s_all, weights=w, minlength=n_states)
    # dz/dlogits[s, j] = -lam * f''(p_sa) * p_sa * (delta_aj - p_sj)
    coef = w * (-spec.lam) * _f_second_raw(spec, p[s_all, a_all]) * p[s_all, a_all]
    per_state_coef = np.bincount(s_all, weights=coef, minlength=n_states)
    grad_l = -per_state_coef[:, None] * p
    grad_l += np.bincount(flat, weights=coef, minlength=n_states * n_actions).reshape(
        n_states, n_actions
    )
    return {"dbm_logits": grad_l, "dbm_baseline": grad_b}


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def discriminator_step(
    model: RewardModel,
    demo_batch,
    rollout_batch,
    policy: TabularPolicy,
    spec: RegularizerSpec,
    lr: float,
    t_table=None,
) -> RewardModel:
    """One in-place gradient-ascent step on the minibatch objective.

    ``t_table`` may carry a precomputed exact_irl_reward(policy) table; the
    policy does not change within a round of discriminator updates.
    """
    grads = discriminator_gradients(model, demo_batch, rollout_batch, policy, spec, t_table)
    if model.kind == NSM:
        model.nsm_table += lr * grads["nsm_table"]
    else:
        model.dbm_logits += lr * grads["dbm_logits"]
        model.dbm_baseline += lr * grads["dbm_baseline"]
    return model


@dataclass
class RacState:
    """Persistent critic table and actor logits for the sampled mode."""

    q: np.ndarray
    logits: np.ndarray


@dataclass
class ViState:
    """Warm-start values for the exact policy-improvement solve."""

    v: np.ndarray | None = None


def actor_objective(logits_row, q_row, spec: RegularizerSpec) -> float:
    """Per-state actor objective E_pi[Q] - Omega(pi) through the softmax."""
    p = _softmax_rows(np.asarray(logits_row, float)[None, :])[0]
    return float((p * q_row).sum() - omega_rows(spec, p[None, :])[0])


def actor_gradient(logits_row, q_row, spec: RegularizerSpec) -> np.ndarray:
    """Analytic gradient of the per-state actor objective w.r.t. the logits."""
    p = _softmax_rows(np.asarray(logits_row, float)[None, :])[0]
    score = q_row + spec.lam * _f_prime_raw(spec, p)
    return p * (score - (p * score).sum())


def policy_improvement(
    policy: TabularPolicy,
    reward: np.ndarray,
    mdp: TabularMdp,
    spec: RegularizerSpec,
    config: TrainConfig,
    state=None,
    transitions=None,
) -> TabularPolicy:
    """One policy-improvement round against the given reward table.

    exact_vi solves the regularized MDP outright (the idealized inner
    step); sampled_rac performs TD critic updates with the regularized
    evaluation target followed by gradient ascent on per-state softmax
    logits, using the supplied transition minibatch.
    """
    reward = as_float_array(reward, "reward", (mdp.n_states, mdp.n_actions))
    if config.policy_mode == EXACT_VI:
        v0 = state.v if isinstance(state, ViState) else None
        sol = regularized_value_iteration(
            mdp, spec, tol=config.vi_tol, reward=reward, v_init=v0
        )
        if isinstance(state, ViState):
            state.v = sol.v_values
        return sol.policy
    if not isinstance(state, RacState):
        raise ValidationError("sampled_rac needs a RacState")
    if transitions is None:
        raise ValidationError("sampled_rac needs a transition minibatch")
    s, a, s2 = transitions
    probs = _softmax_rows(state.logits)
    # regularized evaluation target: V(s') = E_{a'~pi} Q(s', a') - Omega(pi(.|s'))
    v_next = (probs * state.q).sum(axis=1) - omega_rows(spec, probs)
    delta = reward[s, a] + mdp.gamma * v_next[s2] - state.q[s, a]
    np.add.at(state.q, (s, a), config.policy_lr * delta)
    for st in np.unique(s):
        state.logits[st] += config.policy_lr * actor_gradient(
            state.logits[st], state.q[st], spec
        )
    return TabularPolicy(_softmax_rows(state.logits))


@dataclass
class _Replay:
    """Fixed-capacity ring buffer of (s, a, s') triples with uniform resampling."""

    capacity: int
    states: np.ndarray = field(init=False)
    actions: np.ndarray = field(init=False)
    next_states: np.ndarray = field(init=False)
    size: int = 0
    _pos: int = 0

    def __post_init__(self):
        self.states = np.zeros(self.capacity, dtype=int)
        self.actions = np.zeros(self.capacity, dtype=int)
        self.next_states = np.zeros(self.capacity, dtype=int)

    def extend(self, s, a, s2) -> None:
        n = len(s)
        if n >= self.capacity:  # keep only the newest capacity-sized tail
            s, a, s2 = s[-self.capacity:], a[-self.capacity:], s2[-self.capacity:]
            n = self.capacity
        idx = (self._pos + np.arange(n)) % self.capacity
        self.states[idx] = s
        self.actions[idx] = a
        self.next_states[idx] = s2
        self._pos = (self._pos + n) % self.capacity
        self.size = min(self.size + n, self.capacity)

    def sample(self, n: int, rng):
        idx = rng.integers(0, self.size, size=n)
        return self.states[idx], self.actions[idx], self.next_states[idx]


def default_probes(lam: float = 1.0) -> list:
    """Evaluation regularizers: q'=1 (shannon) and Tsallis q'=1.5, 2."""
    return [
        ("mean_bregman_q1", RegularizerSpec("shannon", lam=lam)),
        ("mean_bregman_q1.5", RegularizerSpec("tsallis", lam=lam, k=1.0, q=1.5)),
        ("mean_bregman_q2", RegularizerSpec("tsallis", lam=lam, k=1.0, q=2.0)),
    ]


def _probe_mean_bregman(policy, expert, eval_states, probe_spec):
    """Mean divergence over eval states; inf when the probe is undefined (support mismatch)."""
    try:
        vals = [
            bregman_discrete(policy.probs[s], expert.probs[s], probe_spec)
            for s in eval_states
        ]
        return float(np.mean(vals))
    except ValidationError:
        return float("inf")


def rairl_train(
    mdp: TabularMdp,
    demos: DemoSet,
    config: TrainConfig,
    probes=None,
    eval_states=None,
    metrics_sink=None,
    init_model: RewardModel | None = None,
):
    """Run the adversarial loop; returns (policy, reward model, metrics).

    Deterministic per config.seed. Metrics are recorded every
    ``eval_interval`` iterations and always at the final one; each row is
    also pushed to ``metrics_sink`` as produced so partial results survive
    an interrupted run.
    """
    demos.check_ranges(mdp.n_states, mdp.n_actions)
    if len(demos) < config.batch_size:
        raise ValidationError(
            f"batch_size {config.batch_size} exceeds the demo set size {len(demos)}"
        )
    spec = config.reg
    rng = np.random.default_rng(config.seed)
    model = copy.deepcopy(init_model) if init_model is not None else RewardModel.zeros(
        config.reward_model, mdp.n_states, mdp.n_actions
    )
    policy = TabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    if config.policy_mode == EXACT_VI:
        state = ViState()
    else:
        state = RacState(
            q=np.zeros((mdp.n_states, mdp.n_actions)),
            logits=np.zeros((mdp.n_states, mdp.n_actions)),
        )
    probes = default_probes(spec.lam) if probes is None else probes
    if eval_states is None:
        eval_states = np.unique(demos.states)
    buffer = _Replay(config.replay_capacity)
    prefill = max(config.batch_size, config.rollout_steps_per_iter)
    buffer.extend(*sample_transitions(mdp, policy.probs, prefill, rng))
    metrics = TrainMetrics(probe_names=[name for name, _ in probes])

    def record(iteration):
        demo_batch = _sample_demo_batch(demos, config.batch_size, rng)
        roll_batch = buffer.sample(config.batch_size, rng)[:2]
        row = {
            "iter": iteration,
            "disc_loss": -discriminator_objective(model, demo_batch, roll_batch, policy, spec),
            "episodic_return": return_value(
                mdp, policy, spec, reward=model_reward_table(model, spec)
            ),
            "policy_tv": (
                policy.max_tv_distance(demos.expert_policy)
                if demos.expert_policy is not None
                else None
            ),
        }
        for name, probe_spec in probes:
            row[name] = (
                _probe_mean_bregman(policy, demos.expert_policy, eval_states, probe_spec)
                if demos.expert_policy is not None
                else None
            )
        metrics.append(row)
        if metrics_sink is not None:
            metrics_sink(row)

    for iteration in range(1, config.iterations + 1):
        rollout = sample_transitions(mdp, policy.probs, config.rollout_steps_per_iter, rng)
        buffer.extend(*rollout)
        t_table = exact_irl_reward(policy, spec)
        for _ in range(config.disc_steps_per_iter):
            demo_batch = _sample_demo_batch(demos, config.batch_size, rng)
            roll_batch = buffer.sample(config.batch_size, rng)[:2]
            discriminator_step(
                model, demo_batch, roll_batch, policy, spec, config.disc_lr, t_table=t_table
            )
        reward = model_reward_table(model, spec)
        for _ in range(config.policy_steps_per_iter):
            transitions = (
                buffer.sample(config.batch_size, rng)
                if config.policy_mode == SAMPLED_RAC
                else None
            )
            policy = policy_improvement(
                policy, reward, mdp, spec, config, state=state, transitions=transitions
            )
        if iteration % config.eval_interval == 0 or iteration == config.iterations:
            record(iteration)
    return policy, model, metrics


def _sample_demo_batch(demos: DemoSet, n: int, rng):
    idx = rng.integers(0, len(demos), size=n)
    return demos.states[idx], demos.actions[idx]


def behavioral_cloning(
    demos: DemoSet, n_states: int, n_actions: int, smoothing: float = 1.0
) -> TabularPolicy:
    """Per-state empirical action frequencies with additive smoothing.

    States never visited in the demos fall back to uniform rows.
    """
    if len(demos) == 0:
        raise ValidationError("behavioral cloning needs a nonempty demo set")
    if smoothing < 0:
        raise ValidationError("smoothing must be nonnegative")
    demos.check_ranges(n_states, n_actions)
    counts = np.zeros((n_states, n_actions))
    np.add.at(counts, (demos.states, demos.actions), 1.0)
    counts += smoothing
    totals = counts.sum(axis=1)
    probs = np.full((n_states, n_actions), 1.0 / n_actions)
    visited = totals > 0
    probs[visited] = counts[visited] / totals[visited, None]
    return TabularPolicy(probs)


class RairlImitator(BaseEstimator):
    """Estimator wrapper around :func:`rairl_train`.

    Scalar constructor parameters mirror TrainConfig so get_params/set_params
    round-trip into experiment configs; ``fit(mdp, demos)`` exposes
    ``policy_``, ``reward_model_``, and ``metrics_``.
    """

    def __init__(self, reg: RegularizerSpec | None = None, reward_model: str = DBM,
                 iterations: int = 500, batch_size: int = 256,
                 rollout_steps_per_iter: int = 100, disc_lr: float = 0.1,
                 policy_lr: float = 0.1, disc_steps_per_iter: int = 1,
                 policy_steps_per_iter: int = 1, replay_capacity: int = 50_000,
                 policy_mode: str = EXACT_VI, eval_interval: int = 50,
                 vi_tol: float = 1e-8, seed: int = 0):
        self.reg = reg
        self.reward_model = reward_model
        self.iterations = iterations
        self.batch_size = batch_size
        self.rollout_steps_per_iter = rollout_steps_per_iter
        self.disc_lr = disc_lr
        self.policy_lr = policy_lr
        self.disc_steps_per_iter = disc_steps_per_iter
        self.policy_steps_per_iter = policy_steps_per_iter
        self.replay_capacity = replay_capacity
        self.policy_mode = policy_mode
        self.eval_interval = eval_interval
        self.vi_tol = vi_tol
        self.seed = seed

    def _config(self) -> TrainConfig:
        reg = self.reg if self.reg is not None else RegularizerSpec("shannon")
        return TrainConfig(
            reg=reg,
            iterations=self.iterations,
            batch_size=self.batch_size,
            rollout_steps_per_iter=self.rollout_steps_per_iter,
            disc_lr=self.disc_lr,
            policy_lr=self.policy_lr,
            seed=self.seed,
            policy_mode=self.policy_mode,
            eval_interval=self.eval_interval,
            reward_model=self.reward_model,
            disc_steps_per_iter=self.disc_steps_per_iter,
            policy_steps_per_iter=self.policy_steps_per_iter,
            replay_capacity=self.replay_capacity,
            vi_tol=self.vi_tol,
        )

    def fit(self, mdp: TabularMdp, demos: DemoSet, probes=None, eval_states=None,
            metrics_sink=None):
        policy, model, metrics = rairl_train(
            mdp, demos, self._config(), probes=probes, eval_states=eval_states,
            metrics_sink=metrics_sink,
        )
        self.policy_ = policy
        self.reward_model_ = model
        self.metrics_ = metrics
        return self

    def predict_proba(self, states) -> np.ndarray:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "policy_")
        return self.policy_.probs[np.asarray(states, dtype=int)]

    def predict(self, states) -> np.ndarray:
        return self.predict_proba(states).argmax(axis=-1)


class BehavioralCloning(BaseEstimator):
    """Estimator wrapper around :func:`behavioral_cloning`."""

    def __init__(self, smoothing: float = 1.0):
        self.smoothing = smoothing

    def fit(self, demos: DemoSet, n_states: int, n_actions: int):
        self.policy_ = behavioral_cloning(demos, n_states, n_actions, self.smoothing)
        return self

    def predict_proba(self, states) -> np.ndarray:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "policy_")
        return self.policy_.probs[np.asarray(states, dtype=int)]

    def predict(self, states) -> np.ndarray:
        return self.predict_proba(states).argmax(axis=-1)
