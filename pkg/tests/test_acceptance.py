"""Acceptance gate: the ten numbered criteria at their pinned tolerances.

Each test runs one criterion end to end and prints its pass/fail line;
``regmdp validate`` runs the same functions. The full module plus a
suite-runtime budget of 600 s is the definition of done.
"""

import time

import pytest

from regmdp import acceptance

_ELAPSED = {}


def _run(fn):
    start = time.monotonic()
    result = fn()
    _ELAPSED[result.name] = time.monotonic() - start
    print(result.line())
    assert result.passed, result.detail
    return result


def test_criterion_1_irl_round_trip():
    _run(acceptance.criterion_1_irl_round_trip)


def test_criterion_2_bregman_sum_identity():
    _run(acceptance.criterion_2_bregman_sum_identity)


def test_criterion_3_shaping_invariance():
    _run(acceptance.criterion_3_shaping_invariance)


def test_criterion_4_visitation_gradient():
    _run(acceptance.criterion_4_visitation_gradient)


def test_criterion_5_conjugate_equivalence():
    _run(acceptance.criterion_5_conjugate_equivalence)


def test_criterion_6_gaussian_closed_forms():
    _run(acceptance.criterion_6_gaussian_closed_forms)


def test_criterion_7_divergence_valley():
    _run(acceptance.criterion_7_divergence_valley)


def test_criterion_8_bandit_reward_recovery():
    _run(acceptance.criterion_8_bandit_reward_recovery)


def test_criterion_9_grid_imitation():
    _run(acceptance.criterion_9_grid_imitation)


def test_criterion_10_gradient_hygiene():
    _run(acceptance.criterion_10_gradient_hygiene)


def test_suite_runtime_budget():
    # runs last: the ten criteria together must fit the ten-minute budget
    assert len(_ELAPSED) == 10, "criteria above must all have run"
    total = sum(_ELAPSED.values())
    print(f"acceptance suite total: {total:.1f}s (budget 600s)")
    assert total < 600.0
