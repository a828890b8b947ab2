"""Adversarial training loop: models, gradients, improvement steps, cloning."""

import math

import numpy as np
import pytest
from sklearn.base import clone

from regmdp import (
    BehavioralCloning,
    DemoSet,
    RairlImitator,
    RegularizerSpec,
    TabularPolicy,
    ValidationError,
    bandit_env,
    behavioral_cloning,
    discriminator_logit,
    discriminator_step,
    exact_irl_reward,
    policy_improvement,
    rairl_train,
    random_mdp,
    reward_baseline,
    reward_of_model,
    sample_demos,
)
from regmdp.training import (
    RacState,
    RewardModel,
    TrainConfig,
    ViState,
    actor_gradient,
    actor_objective,
    discriminator_gradients,
    discriminator_objective,
    model_reward_table,
)

SHANNON = RegularizerSpec("shannon")
TSALLIS2 = RegularizerSpec("tsallis", k=1.0, q=2.0)


def make_config(**overrides):
    base = dict(
        reg=SHANNON,
        iterations=5,
        batch_size=16,
        rollout_steps_per_iter=32,
        disc_lr=0.2,
        policy_lr=0.1,
        seed=0,
        policy_mode="exact_vi",
        eval_interval=2,
        reward_model="dbm",
        replay_capacity=500,
        vi_tol=1e-6,
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestRewardModel:
    def test_nsm_lookup(self):
        model = RewardModel("nsm", nsm_table=np.arange(6.0).reshape(2, 3))
        assert reward_of_model(model, SHANNON, 1, 2) == 5.0

    def test_dbm_uniform_logits(self):
        model = RewardModel.zeros("dbm", 1, 4)
        # -f'(1/4) = log(1/4) + 1 under shannon with lam=1
        assert reward_of_model(model, SHANNON, 0, 0) == pytest.approx(
            math.log(0.25) + 1.0, abs=1e-12
        )

    def test_dbm_contains_exact_solution(self):
        _, expert = bandit_env("dense")
        spec = RegularizerSpec("shannon", lam=2.0)
        model = RewardModel(
            "dbm",
            dbm_logits=np.log(expert.probs),
            dbm_baseline=np.array(
                [spec.lam * reward_baseline(expert.probs[0], spec)]
            ),
        )
        np.testing.assert_allclose(
            model_reward_table(model, spec), exact_irl_reward(expert, spec), atol=1e-12
        )

    def test_dbm_implied_policy_row_stochastic(self):
        rng = np.random.default_rng(0)
        model = RewardModel(
            "dbm", dbm_logits=rng.normal(size=(6, 4)), dbm_baseline=rng.normal(size=6)
        )
        np.testing.assert_allclose(model.implied_policy().sum(axis=1), 1.0, atol=1e-12)

    def test_kind_field_mismatch(self):
        with pytest.raises(ValidationError):
            RewardModel("nsm", dbm_logits=np.zeros((2, 2)), dbm_baseline=np.zeros(2))
        with pytest.raises(ValidationError):
            RewardModel("dbm", nsm_table=np.zeros((2, 2)))


class TestDiscriminatorLogit:
    def test_model_equal_to_t_gives_zero(self):
        rng = np.random.default_rng(1)
        policy = TabularPolicy(rng.dirichlet(np.ones(3), size=4))
        t = exact_irl_reward(policy, SHANNON)
        model = RewardModel("nsm", nsm_table=t.copy())
        for s in range(4):
            for a in range(3):
                assert discriminator_logit(model, policy, SHANNON, s, a) == pytest.approx(
                    0.0, abs=1e-12
                )

    def test_baseline_shift_is_additive(self):
        policy = TabularPolicy(np.full((2, 3), 1.0 / 3.0))
        model = RewardModel.zeros("dbm", 2, 3)
        before = discriminator_logit(model, policy, SHANNON, 1, 2)
        model.dbm_baseline += 0.7
        after = discriminator_logit(model, policy, SHANNON, 1, 2)
        assert after - before == pytest.approx(0.7, abs=1e-12)


class TestDiscriminatorStep:
    def test_stationary_at_matched_batches(self):
        # identical batches with the model at t(.;pi) sit exactly at sigma(0)
        rng = np.random.default_rng(2)
        policy = TabularPolicy(rng.dirichlet(np.ones(3), size=4))
        model = RewardModel("nsm", nsm_table=exact_irl_reward(policy, SHANNON))
        batch = (rng.integers(0, 4, 32), rng.integers(0, 3, 32))
        grads = discriminator_gradients(model, batch, batch, policy, SHANNON)
        np.testing.assert_allclose(grads["nsm_table"], 0.0, atol=1e-14)

    def test_single_demo_raises_its_reward(self):
        policy = TabularPolicy.uniform(3, 2)
        model = RewardModel.zeros("nsm", 3, 2)
        demo = (np.array([1]), np.array([0]))
        roll = (np.array([2]), np.array([1]))
        before = model.nsm_table[1, 0]
        discriminator_step(model, demo, roll, policy, SHANNON, lr=0.5)
        assert model.nsm_table[1, 0] > before

    @pytest.mark.parametrize("kind", ["nsm", "dbm"])
    @pytest.mark.parametrize("spec", [SHANNON, TSALLIS2, RegularizerSpec("cos", lam=2.0)],
                             ids=lambda s: s.family)
    def test_gradients_match_finite_differences(self, kind, spec):
        rng = np.random.default_rng(3)
        n_states, n_actions = 4, 3
        policy = TabularPolicy(rng.dirichlet(np.ones(n_actions), size=n_states))
        model = RewardModel.zeros(kind, n_states, n_actions)
        if kind == "nsm":
            model.nsm_table += rng.normal(size=(n_states, n_actions))
        else:
            model.dbm_logits += rng.normal(size=(n_states, n_actions))
            model.dbm_baseline += rng.normal(size=n_states)
        demo = (rng.integers(0, n_states, 24), rng.integers(0, n_actions, 24))
        roll = (rng.integers(0, n_states, 24), rng.integers(0, n_actions, 24))
        grads = discriminator_gradients(model, demo, roll, policy, spec)
        h = 1e-6
        for pname, grad in grads.items():
            arr = getattr(model, pname)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + h
                up = discriminator_objective(model, demo, roll, policy, spec)
                arr[ix] = orig - h
                down = discriminator_objective(model, demo, roll, policy, spec)
                arr[ix] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - grad[ix]) <= 1e-5 * max(1.0, abs(grad[ix]))

    def test_objective_at_balance_is_two_log_half(self):
        # matched visitations and the exact reward sit at D = 1/2 everywhere
        rng = np.random.default_rng(4)
        policy = TabularPolicy(rng.dirichlet(np.ones(4), size=3))
        model = RewardModel("nsm", nsm_table=exact_irl_reward(policy, TSALLIS2))
        batch = (rng.integers(0, 3, 64), rng.integers(0, 4, 64))
        value = discriminator_objective(model, batch, batch, policy, TSALLIS2)
        assert value == pytest.approx(2.0 * math.log(0.5), abs=1e-12)


class TestPolicyImprovement:
    def test_exact_vi_recovers_expert(self):
        mdp = random_mdp(80, 6, 3, 0.9)
        expert = TabularPolicy(np.random.default_rng(80).dirichlet(np.ones(3), size=6))
        reward = exact_irl_reward(expert, TSALLIS2)
        cfg = make_config(reg=TSALLIS2, vi_tol=1e-10)
        policy = policy_improvement(
            TabularPolicy.uniform(6, 3), reward, mdp, TSALLIS2, cfg, state=ViState()
        )
        assert policy.max_tv_distance(expert) <= 1e-4

    def test_sampled_rac_drifts_to_uniform_on_zero_reward(self):
        mdp = random_mdp(81, 4, 3, 0.9)
        cfg = make_config(policy_mode="sampled_rac", policy_lr=0.3)
        state = RacState(q=np.zeros((4, 3)), logits=np.zeros((4, 3)))
        state.logits += np.random.default_rng(81).normal(scale=1.0, size=(4, 3))
        start = TabularPolicy(np.exp(state.logits) / np.exp(state.logits).sum(1, keepdims=True))
        gap0 = start.max_tv_distance(TabularPolicy.uniform(4, 3))
        rng = np.random.default_rng(82)
        policy = start
        for _ in range(200):
            transitions = (
                rng.integers(0, 4, 32),
                rng.integers(0, 3, 32),
                rng.integers(0, 4, 32),
            )
            policy = policy_improvement(
                policy, np.zeros((4, 3)), mdp, SHANNON, cfg, state=state,
                transitions=transitions,
            )
        assert policy.max_tv_distance(TabularPolicy.uniform(4, 3)) < 0.25 * gap0

    @pytest.mark.parametrize("spec", [SHANNON, TSALLIS2, RegularizerSpec("sin")],
                             ids=lambda s: s.family)
    def test_actor_gradient_matches_fd(self, spec):
        rng = np.random.default_rng(83)
        for _ in range(20):
            logits = rng.normal(size=5)
            q_row = rng.normal(size=5)
            grad = actor_gradient(logits, q_row, spec)
            h = 1e-6
            for j in range(5):
                up = logits.copy()
                up[j] += h
                down = logits.copy()
                down[j] -= h
                fd = (
                    actor_objective(up, q_row, spec) - actor_objective(down, q_row, spec)
                ) / (2 * h)
                assert abs(fd - grad[j]) <= 1e-5 * max(1.0, abs(grad[j]))


class TestRairlTrain:
    def test_deterministic_per_seed(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 2000, seed=7)
        cfg = make_config(iterations=20, batch_size=64, vi_tol=1.0)
        runs = [rairl_train(mdp, demos, cfg) for _ in range(2)]
        for a, b in zip(runs[0][2].rows, runs[1][2].rows):
            assert a == b
        np.testing.assert_array_equal(runs[0][0].probs, runs[1][0].probs)

    def test_one_iteration_with_exact_model_recovers_expert(self):
        # model pinned at t(.;expert) and a negligible disc step: one exact
        # improvement returns the expert
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 2000, seed=8)
        init = RewardModel("nsm", nsm_table=exact_irl_reward(expert, SHANNON))
        cfg = make_config(iterations=1, batch_size=64, reward_model="nsm",
                          disc_lr=1e-12, vi_tol=1e-8)
        policy, _, metrics = rairl_train(mdp, demos, cfg, init_model=init)
        assert policy.max_tv_distance(expert) <= 1e-4
        assert metrics.rows[-1]["policy_tv"] <= 1e-4

    def test_metrics_ordered_and_sinked(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 1000, seed=9)
        cfg = make_config(iterations=7, batch_size=32, eval_interval=3, vi_tol=1.0)
        seen = []
        _, _, metrics = rairl_train(mdp, demos, cfg, metrics_sink=seen.append)
        iters = [row["iter"] for row in metrics.rows]
        assert iters == [3, 6, 7]
        assert seen == metrics.rows
        for row in metrics.rows:
            assert set(metrics.columns) <= set(row) | {"iter"}

    def test_dbm_rows_stay_stochastic(self):
        mdp, expert = bandit_env("sparse")
        demos = sample_demos(mdp, expert, 1000, seed=10)
        cfg = make_config(reg=TSALLIS2, iterations=15, batch_size=64, vi_tol=1.0)
        _, model, _ = rairl_train(mdp, demos, cfg)
        np.testing.assert_allclose(model.implied_policy().sum(axis=1), 1.0, atol=1e-12)

    def test_batch_larger_than_demos_rejected(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 10, seed=11)
        with pytest.raises(ValidationError):
            rairl_train(mdp, demos, make_config(batch_size=64))


class TestBehavioralCloning:
    def test_exact_enumeration(self):
        demos = DemoSet(np.array([0, 1, 2]), np.array([2, 0, 1]))
        policy = behavioral_cloning(demos, 3, 3, smoothing=0.0)
        expected = np.zeros((3, 3))
        expected[0, 2] = expected[1, 0] = expected[2, 1] = 1.0
        np.testing.assert_allclose(policy.probs, expected)

    def test_unvisited_state_uniform(self):
        demos = DemoSet(np.array([0]), np.array([1]))
        policy = behavioral_cloning(demos, 2, 4, smoothing=0.0)
        np.testing.assert_allclose(policy.probs[1], 0.25)

    def test_bandit_law_of_large_numbers(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 10**5, seed=12)
        policy = behavioral_cloning(demos, 1, 4, smoothing=0.0)
        assert policy.max_tv_distance(expert) <= 0.01

    def test_smoothing_pulls_to_uniform(self):
        demos = DemoSet(np.array([0, 0]), np.array([1, 1]))
        policy = behavioral_cloning(demos, 1, 2, smoothing=1e6)
        np.testing.assert_allclose(policy.probs[0], 0.5, atol=1e-5)


class TestEstimators:
    def test_rairl_imitator_fit_predict(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 2000, seed=13)
        est = RairlImitator(reg=SHANNON, iterations=10, batch_size=64,
                            rollout_steps_per_iter=32, vi_tol=1.0, eval_interval=5)
        est.fit(mdp, demos)
        assert est.policy_.probs.shape == (1, 4)
        assert est.reward_model_.kind == "dbm"
        assert est.metrics_.rows
        assert est.predict_proba([0]).shape == (1, 4)

    def test_params_round_trip_through_clone(self):
        est = RairlImitator(reg=TSALLIS2, iterations=3, disc_lr=0.5)
        cloned = clone(est)
        assert cloned.get_params()["disc_lr"] == 0.5
        assert cloned.get_params()["reg"] == TSALLIS2

    def test_bc_estimator(self):
        mdp, expert = bandit_env("dense")
        demos = sample_demos(mdp, expert, 5000, seed=14)
        est = BehavioralCloning(smoothing=0.0).fit(demos, 1, 4)
        assert est.predict([0])[0] == 3
