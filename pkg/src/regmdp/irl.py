"""Closed-form rewards that rationalize a given policy in a regularized MDP.

The central object is the reward table

    t(s, a; pi) = -lam * ( f'(pi(a|s)) - E_{a'~pi(.|s)}[f'(pi(a'|s)) - phi(pi(a'|s))] )

whose expectation term is the per-state reward baseline. Training any policy
against t(.; pi_E) turns the regularized return into the negative discounted
sum of Bregman divergences to pi_E, so pi_E is the unique optimum. The
module also provides potential-based shaping (which preserves the optimum),
an equivalent advantage-style construction derived from the conjugate, and
the gradient view of t over unnormalized visitation coordinates.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ValidationError
from .mdp import TabularMdp, TabularPolicy, VisitationDistribution
from .regularizers import (
    RegularizerSpec,
    f_phi_prime,
    f_phi_prime_limit_at_zero,
    grad_omega,
    omega,
    omega_rows,
    phi,
)
from .validation import as_float_array, check_probability_vector

NEXT_STATE_SAMPLE = "next_state_sample"
NEXT_STATE_EXPECTATION = "next_state_expectation"


def _f_prime_with_limit(spec: RegularizerSpec, p: np.ndarray) -> np.ndarray:
    """f_phi' extended to p=0 by its analytic limit; error when that limit is infinite."""
    out = np.empty_like(p)
    zero = p <= 0.0
    if zero.any():
        limit = f_phi_prime_limit_at_zero(spec)
        if math.isinf(limit):
            where = np.argwhere(zero)[0]
            raise ValidationError(
                f"zero-probability action at index {tuple(int(i) for i in where)} has an "
                f"infinite {spec.family} reward (f_phi'(0+) diverges)"
            )
        out[zero] = limit
    if (~zero).any():
        out[~zero] = f_phi_prime(spec, p[~zero])
    return out


def reward_baseline(policy_row, spec: RegularizerSpec) -> float:
    """E_{a~p}[f_phi'(p(a)) - phi(p(a))], the state-only part of the exact reward."""
    p = check_probability_vector(policy_row, "policy_row")
    mask = p > 0.0
    px = p[mask]
    return float(np.sum(px * (f_phi_prime(spec, px) - phi(spec, px))))


def _baseline_rows(spec: RegularizerSpec, probs: np.ndarray) -> np.ndarray:
    contrib = np.zeros_like(probs)
    mask = probs > 0.0
    if mask.any():
        px = probs[mask]
        contrib[mask] = px * (f_phi_prime(spec, px) - phi(spec, px))
    return contrib.sum(axis=1)


def exact_irl_reward(policy: TabularPolicy, spec: RegularizerSpec) -> np.ndarray:
    """The closed-form reward table t(s, a; policy).

    Zero-probability actions are handled through the finite limit of
    f_phi' at 0+ where one exists; under shannon they are refused (the
    reward would be -inf, the log-of-zero case).
    """
    probs = policy.probs
    fp = _f_prime_with_limit(spec, probs)
    baseline = _baseline_rows(spec, probs)
    return -spec.lam * (fp - baseline[:, None])


def shape_reward(
    reward: np.ndarray,
    potential: np.ndarray,
    mdp: TabularMdp,
    mode: str = NEXT_STATE_EXPECTATION,
) -> np.ndarray:
    """Potential-based shaping: r + gamma * E_{s'}[Phi(s')] - Phi(s).

    Both modes coincide in this tabular module: the sampled next-state form
    is defined for rollout-time shaping and equals the expectation form in
    expectation, which is all the tabular solvers ever see. The flag is kept
    for API symmetry with sample-based training.
    """
    if mode not in (NEXT_STATE_SAMPLE, NEXT_STATE_EXPECTATION):
        raise ValidationError(f"unknown shaping mode {mode!r}")
    r = as_float_array(reward, "reward", (mdp.n_states, mdp.n_actions))
    ph = as_float_array(potential, "potential", (mdp.n_states,))
    return r + mdp.gamma * mdp.expected_next_values(ph) - ph[:, None]


def geist_reward(policy: TabularPolicy, mdp: TabularMdp, spec: RegularizerSpec):
    """Advantage-style reward pair built from the conjugate of the regularizer.

    Sets Q_E(s, .) = grad Omega(pi(.|s)), for which pi is the conjugate
    maximizer, so Omega*(Q_E(s, .)) = <pi, Q_E> - Omega(pi). Returns

        rho(s, a)     = Q_E(s, a) - gamma * E_{s'}[Omega*(Q_E(s', .))]
        r_tilde(s, a) = Q_E(s, a) - Omega*(Q_E(s, .))

    rho depends on the dynamics; r_tilde is its shaping by
    Phi(s) = Omega*(Q_E(s, .)) and coincides entrywise with
    :func:`exact_irl_reward`.
    """
    probs = policy.probs
    if np.any(probs <= 0.0):
        raise ValidationError("geist_reward needs a strictly interior policy")
    q_e = np.stack([grad_omega(spec, row) for row in probs])
    omega_star = (probs * q_e).sum(axis=1) - omega_rows(spec, probs)
    rho = q_e - mdp.gamma * mdp.expected_next_values(omega_star)
    r_tilde = q_e - omega_star[:, None]
    return rho, r_tilde


def visitation_regularizer(d, spec: RegularizerSpec) -> float:
    """Omega-bar(d) = sum_{s,a} d(s,a) * Omega(pi_d(.|s)) over the induced policy.

    Accepts a VisitationDistribution or a raw nonnegative table (the raw
    form is what the finite-difference gradient perturbs, so no
    normalization is applied). States with zero mass contribute 0.
    """
    table = d.d if isinstance(d, VisitationDistribution) else np.asarray(d, dtype=float)
    if table.ndim != 2 or np.any(table < 0) or not np.isfinite(table).all():
        raise ValidationError("visitation table must be a nonnegative finite 2-d array")
    total = 0.0
    for row in table:
        mass = row.sum()
        if mass <= 0.0:
            continue
        total += mass * omega(spec, row / mass)
    return float(total)


def visitation_gradient_fd(d, spec: RegularizerSpec, h: float = 1e-6) -> np.ndarray:
    """Central finite difference of Omega-bar treating each d(s, a) as free.

    The perturbed tables are not renormalized, matching the gradient taken
    over unnormalized visitation coordinates. Requires h below the smallest
    probed entry so d - h*e stays nonnegative.
    """
    table = np.array(d.d if isinstance(d, VisitationDistribution) else d, dtype=float)
    if h <= 0:
        raise ValidationError("h must be positive")
    if h >= table.min():
        raise ValidationError(
            f"finite-difference step {h} is not below the smallest entry {table.min()!r}"
        )
    grad = np.empty_like(table)
    for s in range(table.shape[0]):
        for a in range(table.shape[1]):
            orig = table[s, a]
            table[s, a] = orig + h
            up = visitation_regularizer(table, spec)
            table[s, a] = orig - h
            down = visitation_regularizer(table, spec)
            table[s, a] = orig
            grad[s, a] = (up - down) / (2.0 * h)
    return grad


def reward_table_to_csv(reward: np.ndarray, path) -> None:
    """Write a reward table as (s, a, r) rows for bar-chart style plotting."""
    reward = np.asarray(reward, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "a", "r"])
        for s in range(reward.shape[0]):
            for a in range(reward.shape[1]):
                writer.writerow([s, a, repr(float(reward[s, a]))])
