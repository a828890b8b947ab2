"""Tabular MDPs, visitation distributions, and regularized dynamic programming.

The per-state inner problem max_p <p, Q> - Omega(p) is solved through the
normalizer mu: p(a) = max{g((mu - Q(a)) / lam), 0} with mu bracketed in
[max Q + lam*f'(1), max Q + lam*f'(1/|A|)] where the total mass is a
monotone decreasing function of mu. The bracket makes bisection valid;
Newton steps are taken inside it for speed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator

from .errors import NumericError, ValidationError
from .regularizers import (
    RegularizerSpec,
    _f_prime_raw,
    _f_second_raw,
    _g_batch,
    f_phi_prime_limit_at_zero,
    omega_rows,
    phi_prime,
)
from .validation import as_float_array, check_probability_vector, check_row_stochastic

_MU_MASS_TOL = 1e-13
_MU_MAX_ITER = 200


@dataclass
class TabularMdp:
    """Finite MDP: initial distribution p0, transition[s, a, s'], discount, optional reward."""

    n_states: int
    n_actions: int
    p0: np.ndarray
    transition: np.ndarray
    gamma: float
    reward: np.ndarray | None = None

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValidationError("n_states and n_actions must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")
        self.p0 = check_probability_vector(self.p0, "p0")
        if self.p0.shape != (self.n_states,):
            raise ValidationError("p0 length does not match n_states")
        t = as_float_array(self.transition, "transition")
        if t.shape != (self.n_states, self.n_actions, self.n_states):
            raise ValidationError(f"transition has shape {t.shape}, expected (S, A, S)")
        check_row_stochastic(t.reshape(-1, self.n_states), "transition")
        self.transition = np.clip(t, 0.0, None)
        if self.reward is not None:
            self.reward = as_float_array(
                self.reward, "reward", (self.n_states, self.n_actions)
            )
        # deterministic-transition fast path for the DP sweeps
        flat = self.transition.reshape(-1, self.n_states)
        argmax = flat.argmax(axis=1)
        if np.allclose(flat[np.arange(flat.shape[0]), argmax], 1.0, atol=1e-12):
            self._next_state = argmax.reshape(self.n_states, self.n_actions)
        else:
            self._next_state = None

    def expected_next_values(self, v: np.ndarray) -> np.ndarray:
        """E_{s'~P(.|s,a)}[v(s')] as an (S, A) table."""
        if self._next_state is not None:
            return v[self._next_state]
        return (self.transition.reshape(-1, self.n_states) @ v).reshape(
            self.n_states, self.n_actions
        )

    def to_json(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "p0": self.p0.tolist(),
            "transition": self.transition.tolist(),
            "gamma": self.gamma,
            "reward": None if self.reward is None else self.reward.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TabularMdp":
        try:
            return cls(
                n_states=int(obj["n_states"]),
                n_actions=int(obj["n_actions"]),
                p0=np.array(obj["p0"], dtype=float),
                transition=np.array(obj["transition"], dtype=float),
                gamma=float(obj["gamma"]),
                reward=None if obj.get("reward") is None else np.array(obj["reward"], float),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed MDP document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass
class TabularPolicy:
    """Row-stochastic state -> action probability table."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = check_row_stochastic(self.probs, "policy")

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    def max_tv_distance(self, other: "TabularPolicy") -> float:
        """Largest per-state total-variation distance to another policy."""
        return float(0.5 * np.abs(self.probs - other.probs).sum(axis=1).max())


@dataclass
class VisitationDistribution:
    """Normalized discounted state-action visitation d(s, a)."""

    d: np.ndarray

    def __post_init__(self):
        self.d = as_float_array(self.d, "visitation")
        if self.d.ndim != 2:
            raise ValidationError("visitation must be a 2-d table")
        if np.any(self.d < -1e-12):
            raise ValidationError("visitation has negative entries")
        if abs(self.d.sum() - 1.0) > 1e-8:
            raise ValidationError(f"visitation sums to {self.d.sum()!r}, not 1")
        self.d = np.clip(self.d, 0.0, None)

    def state_marginals(self) -> np.ndarray:
        return self.d.sum(axis=1)

    def conditional_policy(self) -> np.ndarray:
        """pi_d(a|s) = d(s,a) / sum_a d(s,a); uniform rows where the mass is 0."""
        mass = self.state_marginals()
        out = np.full_like(self.d, 1.0 / self.d.shape[1])
        pos = mass > 0.0
        out[pos] = self.d[pos] / mass[pos, None]
        return out


@dataclass
class ValueSolution:
    """Converged optimal values, policy, and per-state normalizer mu."""

    q_values: np.ndarray
    v_values: np.ndarray
    policy: TabularPolicy
    mu: np.ndarray
    n_iter: int = 0

    def to_json(self) -> dict:
        return {
            "q_values": self.q_values.tolist(),
            "v_values": self.v_values.tolist(),
            "policy": self.policy.probs.tolist(),
            "mu": self.mu.tolist(),
            "n_iter": self.n_iter,
        }


def visitation(mdp: TabularMdp, policy: TabularPolicy) -> VisitationDistribution:
    """Exact discounted visitation: solve x = (1-gamma) p0 + gamma P_pi^T x."""
    probs = policy.probs
    if probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError("policy shape does not match the MDP")
    # P_pi[s, s'] = sum_a pi(a|s) P(s'|s,a)
    p_pi = np.einsum("sa,san->sn", probs, mdp.transition)
    lhs = np.eye(mdp.n_states) - mdp.gamma * p_pi.T
    try:
        x = linalg.solve(lhs, (1.0 - mdp.gamma) * mdp.p0)
    except linalg.LinAlgError as exc:  # unreachable for gamma < 1 with valid inputs
        raise NumericError(f"visitation linear system is singular: {exc}") from exc
    x = np.clip(x, 0.0, None)
    d = probs * x[:, None]
    total = d.sum()
    if not math.isfinite(total) or total <= 0:
        raise NumericError("visitation solve produced an invalid distribution")
    return VisitationDistribution(d / total)


def regularized_policy_evaluation(
    mdp: TabularMdp,
    policy: TabularPolicy,
    spec: RegularizerSpec,
    tol: float = 1e-10,
    max_iter: int = 10_000_000,
    reward: np.ndarray | None = None,
):
    """Fixed point of the regularized evaluation operator; returns (V, Q).

    Iterates V <- <pi, r + gamma P V> - Omega(pi) until the sup-norm change
    drops below tol; a gamma-contraction, so convergence is guaranteed.
    """
    r = _reward_table(mdp, reward)
    probs = policy.probs
    om = omega_rows(spec, probs)
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = r + mdp.gamma * mdp.expected_next_values(v)
        v_new = (probs * q).sum(axis=1) - om
        if np.abs(v_new - v).max() <= tol:
            v = v_new
            break
        v = v_new
    else:
        raise NumericError("policy evaluation did not converge")
    q = r + mdp.gamma * mdp.expected_next_values(v)
    return v, q


def _reward_table(mdp: TabularMdp, reward) -> np.ndarray:
    if reward is not None:
        return as_float_array(reward, "reward", (mdp.n_states, mdp.n_actions))
    if mdp.reward is None:
        raise ValidationError("this operation needs a reward table on the MDP")
    return mdp.reward


def _solve_policies(Q, spec, mu0=None, pi0=None):
    """Optimal rows and normalizers for a batch of Q rows (the Eq-2 inner solve).

    Bisection on mu within the spec bracket, with Newton steps taken whenever
    they stay inside it. Returns (pi, mu) with each pi row renormalized after
    asserting its mass deviates from 1 by at most 1e-10.
    """
    Q = np.asarray(Q, dtype=float)
    n, a = Q.shape
    lam = spec.lam
    fp1 = float(_f_prime_raw(spec, np.float64(1.0)))
    if a == 1:
        mu = Q[:, 0] + lam * fp1
        return np.ones_like(Q), mu
    fpu = float(_f_prime_raw(spec, np.float64(1.0 / a)))
    if not fpu > fp1:
        raise NumericError(
            "mu bracket is degenerate (f_phi'(1/|A|) <= f_phi'(1)); non-monotone regularizer"
        )
    qmax = Q.max(axis=1)
    lo = qmax + lam * fp1
    hi = qmax + lam * fpu
    if mu0 is not None:
        mu = np.clip(mu0, lo, hi)
    else:
        mu = 0.5 * (lo + hi)
    pi = pi0 if pi0 is not None else np.full_like(Q, 1.0 / a)
    mass = np.empty(n)
    for _ in range(_MU_MAX_ITER):
        y = (mu[:, None] - Q) / lam
        pi = _g_batch(spec, y, warm=pi)
        mass = pi.sum(axis=1)
        resid = mass - 1.0
        done = np.abs(resid) <= _MU_MASS_TOL
        if done.all():
            break
        # total mass decreases in mu: positive residual means mu is too small
        lo = np.where((resid > 0) & ~done, mu, lo)
        hi = np.where((resid < 0) & ~done, mu, hi)
        support = pi > 0.0
        dpi = np.zeros_like(pi)
        dpi[support] = 1.0 / (lam * _f_second_raw(spec, pi[support]))
        dmass = dpi.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu_newton = mu - resid / dmass
        ok = np.isfinite(mu_newton) & (mu_newton > lo) & (mu_newton < hi)
        mu = np.where(done, mu, np.where(ok, mu_newton, 0.5 * (lo + hi)))
        if np.max(hi - lo) <= 1e-14 * (1.0 + np.abs(mu).max()):
            y = (mu[:, None] - Q) / lam
            pi = _g_batch(spec, y, warm=pi)
            mass = pi.sum(axis=1)
            break
    if np.abs(mass - 1.0).max() > 1e-10:
        raise NumericError(
            f"normalizer solve left total mass off by {np.abs(mass - 1.0).max():.3e}"
        )
    return pi / mass[:, None], mu


def optimal_state_policy(q_row, spec: RegularizerSpec):
    """Optimal action distribution and normalizer mu for one state's Q row."""
    q_row = as_float_array(q_row, "q_row")
    if q_row.ndim != 1 or q_row.size == 0:
        raise ValidationError("q_row must be a nonempty vector")
    pi, mu = _solve_policies(q_row[None, :], spec)
    return pi[0], float(mu[0])


def _value_from_mu(spec, pi, mu):
    """V(s) = mu(s) - lam * sum_a pi^2 phi'(pi); zero-probability terms vanish."""
    term = np.zeros_like(pi)
    mask = pi > 0.0
    if mask.any():
        term[mask] = pi[mask] ** 2 * phi_prime(spec, pi[mask])
    return mu - spec.lam * term.sum(axis=1)


def regularized_value_iteration(
    mdp: TabularMdp,
    spec: RegularizerSpec,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    reward: np.ndarray | None = None,
    v_init: np.ndarray | None = None,
) -> ValueSolution:
    """Iterate the regularized optimality operator to its fixed point.

    Each sweep forms Q = r + gamma P V, solves every state's inner problem,
    and writes V back through the mu-based fixed-point expression. At
    convergence that expression is cross-checked against the direct
    <pi, Q> - Omega(pi) form (they are conjugate views of the same value and
    must agree within 1e-8).
    """
    r = _reward_table(mdp, reward)
    v = np.zeros(mdp.n_states) if v_init is None else as_float_array(
        v_init, "v_init", (mdp.n_states,)
    ).copy()
    mu = None
    pi = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        q = r + mdp.gamma * mdp.expected_next_values(v)
        pi, mu = _solve_policies(q, spec, mu0=mu, pi0=pi)
        v_new = _value_from_mu(spec, pi, mu)
        delta = np.abs(v_new - v).max()
        v = v_new
        if delta <= tol:
            break
    else:
        raise NumericError(f"value iteration did not converge within {max_iter} sweeps")
    q = r + mdp.gamma * mdp.expected_next_values(v)
    pi, mu = _solve_policies(q, spec, mu0=mu, pi0=pi)
    v_direct = (pi * q).sum(axis=1) - omega_rows(spec, pi)
    v_mu = _value_from_mu(spec, pi, mu)
    gap = np.abs(v_mu - v_direct).max()
    if gap > 1e-8:
        raise NumericError(
            f"conjugacy cross-check failed: mu-form and direct value differ by {gap:.3e}"
        )
    return ValueSolution(q, v_mu, TabularPolicy(pi), mu, n_iter=n_iter)


def return_value(
    mdp: TabularMdp,
    policy: TabularPolicy,
    spec: RegularizerSpec,
    reward: np.ndarray | None = None,
) -> float:
    """Exact regularized return J = (1/(1-gamma)) E_{d_pi}[r - Omega(pi(.|s))]."""
    r = _reward_table(mdp, reward)
    d = visitation(mdp, policy).d
    om = omega_rows(spec, policy.probs)
    per_pair = r - om[:, None]
    return float((d * per_pair).sum() / (1.0 - mdp.gamma))


class RegularizedValueIteration(BaseEstimator):
    """Estimator wrapper: fit solves an MDP, predict reads out the optimal policy.

    Parameters mirror :func:`regularized_value_iteration`; fitted attributes
    are ``solution_``, ``policy_``, ``q_values_``, ``v_values_``, ``mu_``,
    and ``n_iter_``.
    """

    def __init__(self, reg: RegularizerSpec | None = None, tol: float = 1e-10,
                 max_iter: int = 1_000_000):
        self.reg = reg
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, mdp: TabularMdp, reward: np.ndarray | None = None):
        spec = self.reg if self.reg is not None else RegularizerSpec("shannon")
        sol = regularized_value_iteration(
            mdp, spec, tol=self.tol, max_iter=self.max_iter, reward=reward
        )
        self.solution_ = sol
        self.policy_ = sol.policy
        self.q_values_ = sol.q_values
        self.v_values_ = sol.v_values
        self.mu_ = sol.mu
        self.n_iter_ = sol.n_iter
        return self

    def predict_proba(self, states) -> np.ndarray:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "policy_")
        idx = np.asarray(states, dtype=int)
        return self.policy_.probs[idx]

    def predict(self, states) -> np.ndarray:
        return self.predict_proba(states).argmax(axis=-1)
