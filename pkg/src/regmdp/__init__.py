"""Regularized MDPs and their inverse problem on tabular environments.

Exact regularized value iteration for a family of strongly convex policy
regularizers, closed-form reward recovery from expert policies, Bregman
divergence evaluation (discrete and diagonal-Gaussian), and an adversarial
reward-learning loop, with estimator-style wrappers for the trainable
pieces and a CLI harness (``regmdp``).
"""

from .divergence import (
    DiagGaussian,
    bregman_discrete,
    gaussian_bregman_tsallis,
    gaussian_kl,
    gaussian_reward_baseline,
    gaussian_tsallis_entropy,
    heatmap_grid,
    mean_bregman,
    numeric_bregman_oracle,
    numeric_entropy_oracle,
)
from .envs import DemoSet, bandit_env, bermuda_grid, make_env, random_mdp, sample_demos
from .errors import NumericError, ValidationError
from .irl import (
    exact_irl_reward,
    geist_reward,
    reward_baseline,
    shape_reward,
    visitation_gradient_fd,
    visitation_regularizer,
)
from .mdp import (
    RegularizedValueIteration,
    TabularMdp,
    TabularPolicy,
    ValueSolution,
    VisitationDistribution,
    optimal_state_policy,
    regularized_policy_evaluation,
    regularized_value_iteration,
    return_value,
    visitation,
)
from .regularizers import (
    RegularizerSpec,
    f_phi,
    f_phi_prime,
    f_phi_prime_limit_at_zero,
    g_phi,
    grad_omega,
    omega,
    phi,
    phi_prime,
)
from .training import (
    BehavioralCloning,
    RairlImitator,
    RewardModel,
    TrainConfig,
    TrainMetrics,
    behavioral_cloning,
    discriminator_logit,
    discriminator_step,
    policy_improvement,
    rairl_train,
    reward_of_model,
)

__version__ = "0.1.0"

__all__ = [
    "BehavioralCloning",
    "DemoSet",
    "DiagGaussian",
    "NumericError",
    "RairlImitator",
    "RegularizedValueIteration",
    "RegularizerSpec",
    "RewardModel",
    "TabularMdp",
    "TabularPolicy",
    "TrainConfig",
    "TrainMetrics",
    "ValidationError",
    "ValueSolution",
    "VisitationDistribution",
    "bandit_env",
    "behavioral_cloning",
    "bermuda_grid",
    "bregman_discrete",
    "discriminator_logit",
    "discriminator_step",
    "exact_irl_reward",
    "f_phi",
    "f_phi_prime",
    "f_phi_prime_limit_at_zero",
    "g_phi",
    "gaussian_bregman_tsallis",
    "gaussian_kl",
    "gaussian_reward_baseline",
    "gaussian_tsallis_entropy",
    "geist_reward",
    "grad_omega",
    "heatmap_grid",
    "make_env",
    "mean_bregman",
    "numeric_bregman_oracle",
    "numeric_entropy_oracle",
    "omega",
    "optimal_state_policy",
    "phi",
    "phi_prime",
    "policy_improvement",
    "rairl_train",
    "random_mdp",
    "regularized_policy_evaluation",
    "regularized_value_iteration",
    "return_value",
    "reward_baseline",
    "reward_of_model",
    "sample_demos",
    "shape_reward",
    "visitation",
    "visitation_gradient_fd",
    "visitation_regularizer",
]
