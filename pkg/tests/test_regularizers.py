"""Scalar regularizer family: values, derivatives, inverses, and concavity."""

import math

import numpy as np
import pytest

from regmdp import (
    RegularizerSpec,
    ValidationError,
    f_phi,
    f_phi_prime,
    f_phi_prime_limit_at_zero,
    g_phi,
    grad_omega,
    omega,
    phi,
)
from regmdp.regularizers import SIN_MONOTONE_THETA_MAX

ALL_SPECS = [
    RegularizerSpec("shannon"),
    RegularizerSpec("tsallis", k=1.0, q=2.0),
    RegularizerSpec("tsallis", k=0.5, q=1.5),
    RegularizerSpec("exp"),
    RegularizerSpec("exp", exp_k=1.0, exp_q=2.0),
    RegularizerSpec("cos"),
    RegularizerSpec("cos", theta=0.6),
    RegularizerSpec("sin"),
    RegularizerSpec("sin", theta=0.4),
]


def spec_id(spec):
    return f"{spec.family}-lam{spec.lam}-k{spec.k}-q{spec.q}-th{spec.theta}"


class TestPhi:
    def test_shannon_at_one(self):
        assert phi(RegularizerSpec("shannon"), 1.0) == 0.0

    def test_tsallis_half(self):
        # (k/(q-1)) * (1 - x^(q-1)) at k=1, q=2, x=0.5
        assert phi(RegularizerSpec("tsallis", k=1.0, q=2.0), 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_exp_default_at_one(self):
        # defaults give e - e^x, zero at x=1
        assert phi(RegularizerSpec("exp"), 1.0) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_phi_of_one_is_zero(self, spec):
        assert phi(spec, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_domain_errors(self):
        spec = RegularizerSpec("shannon")
        with pytest.raises(ValidationError):
            phi(spec, 0.0)
        with pytest.raises(ValidationError):
            phi(spec, 1.0 + 1e-9)


class TestFPhiPrime:
    def test_shannon_at_one(self):
        assert f_phi_prime(RegularizerSpec("shannon"), 1.0) == pytest.approx(-1.0)

    def test_tsallis_quarter(self):
        # 1 - 2x at k=1, q=2
        assert f_phi_prime(RegularizerSpec("tsallis", k=1.0, q=2.0), 0.25) == pytest.approx(0.5)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_matches_finite_difference(self, spec):
        h = 1e-6
        rng = np.random.default_rng(5)
        xs = np.concatenate([[0.3], rng.uniform(0.01, 1.0 - h, size=1000)])
        fd = (f_phi(spec, xs + h) - f_phi(spec, xs - h)) / (2.0 * h)
        assert np.abs(fd - f_phi_prime(spec, xs)).max() <= 1e-6

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_strictly_decreasing(self, spec):
        rng = np.random.default_rng(6)
        xs = np.sort(rng.uniform(1e-4, 1.0, size=1000))
        vals = f_phi_prime(spec, xs)
        assert np.all(np.diff(vals) < 0)


class TestGPhi:
    def test_shannon_inverse_at_minus_one(self):
        assert g_phi(RegularizerSpec("shannon"), -1.0) == pytest.approx(1.0)

    def test_tsallis_sparse_clamp(self):
        # f'(0+) = k/(q-1) = 1; values at or above it map to 0
        assert g_phi(RegularizerSpec("tsallis", k=1.0, q=2.0), 1.0) == 0.0

    def test_cos_round_trip(self):
        spec = RegularizerSpec("cos", theta=math.pi / 2)
        y = f_phi_prime(spec, 0.4)
        assert g_phi(spec, float(y)) == pytest.approx(0.4, abs=1e-10)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_inverse_consistency(self, spec):
        xs = np.linspace(0.01, 1.0, 113)
        ys = f_phi_prime(spec, xs)
        back = np.array([g_phi(spec, float(y)) for y in ys])
        assert np.abs(back - xs).max() <= 1e-9

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_sparse_clamp_above_zero_limit(self, spec):
        limit = f_phi_prime_limit_at_zero(spec)
        if math.isinf(limit):
            return
        assert g_phi(spec, limit + 0.5) == 0.0


class TestOmega:
    def test_shannon_uniform_four(self):
        # negative Shannon entropy of the uniform distribution
        value = omega(RegularizerSpec("shannon"), np.full(4, 0.25))
        assert value == pytest.approx(-math.log(4.0), abs=1e-12)

    def test_tsallis_degenerate(self):
        assert omega(RegularizerSpec("tsallis", k=1.0, q=2.0), [1.0, 0.0]) == 0.0

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_one_hot_is_zero(self, spec):
        assert omega(spec, [0.0, 1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)

    def test_shannon_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            lam = float(rng.uniform(0.2, 4.0))
            p = rng.dirichlet(np.ones(5))
            lhs = omega(RegularizerSpec("shannon", lam=lam), p)
            assert lhs == pytest.approx(lam * float(np.sum(p * np.log(p))), abs=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_boundary_limit(self, spec):
        # x * phi(x) -> 0 as x -> 0+
        assert abs(f_phi(spec, 1e-12)) <= 1e-9

    def test_invalid_distribution(self):
        with pytest.raises(ValidationError):
            omega(RegularizerSpec("shannon"), [0.5, 0.6])


class TestGradOmega:
    def test_shannon_uniform_two(self):
        g = grad_omega(RegularizerSpec("shannon"), [0.5, 0.5])
        assert g == pytest.approx([1.0 - math.log(2.0)] * 2, abs=1e-12)

    def test_tsallis_values(self):
        g = grad_omega(RegularizerSpec("tsallis", k=1.0, q=2.0), [0.25, 0.75])
        assert g == pytest.approx([-0.5, 0.5], abs=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_matches_fd_along_simplex(self, spec):
        rng = np.random.default_rng(8)
        p = rng.dirichlet(np.ones(4)) * 0.9 + 0.025
        g = grad_omega(spec, p)
        h = 1e-6
        for a in range(3):
            # interior perturbation keeping the total mass fixed
            direction = np.zeros(4)
            direction[a] = 1.0
            direction[3] = -1.0
            up = omega(spec, p + h * direction)
            down = omega(spec, p - h * direction)
            fd = (up - down) / (2.0 * h)
            assert fd == pytest.approx(g[a] - g[3], abs=1e-6)

    def test_shannon_zero_entry_rejected(self):
        with pytest.raises(ValidationError):
            grad_omega(RegularizerSpec("shannon"), [1.0, 0.0])


class TestConcavity:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_f_phi_strictly_concave(self, spec):
        rng = np.random.default_rng(9)
        for _ in range(100):
            x1, x2, x3 = np.sort(rng.uniform(1e-6, 1.0, size=3))
            if x3 - x1 < 1e-4:
                continue
            w = (x2 - x1) / (x3 - x1)
            chord = (1 - w) * f_phi(spec, x1) + w * f_phi(spec, x3)
            assert f_phi(spec, x2) > chord


class TestSinBreakdown:
    """theta=pi/2 exceeds the monotone range: documents the known defect."""

    def test_warned_at_construction(self):
        with pytest.warns(RuntimeWarning):
            RegularizerSpec("sin", theta=math.pi / 2)

    def test_f_prime_not_monotone(self):
        with pytest.warns(RuntimeWarning):
            spec = RegularizerSpec("sin", theta=math.pi / 2)
        xs = np.linspace(0.01, 1.0, 500)
        vals = f_phi_prime(spec, xs)
        assert not np.all(np.diff(vals) < 0)

    def test_g_phi_fails_on_ambiguous_value(self):
        with pytest.warns(RuntimeWarning):
            spec = RegularizerSpec("sin", theta=math.pi / 2)
        # values attained twice (once per branch) cannot be inverted
        with pytest.raises((ValidationError, Exception)):
            g_phi(spec, -0.2)

    def test_threshold_constant(self):
        theta = SIN_MONOTONE_THETA_MAX
        assert theta * math.tan(theta) == pytest.approx(2.0, abs=1e-10)


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(family="nope"),
            dict(family="shannon", lam=0.0),
            dict(family="tsallis", k=0.0),
            dict(family="tsallis", q=1.0),
            dict(family="cos", theta=2.0),
            dict(family="sin", theta=0.0),
            dict(family="exp", exp_k=-1.0),
            dict(family="exp", exp_q=0.5),
            dict(family="exp", exp_k=0.0, exp_q=1.0),
        ],
    )
    def test_bad_parameters(self, kwargs):
        with pytest.raises(ValidationError):
            RegularizerSpec(**kwargs)


class TestJson:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=spec_id)
    def test_round_trip(self, spec):
        assert RegularizerSpec.from_json(spec.to_json()) == spec

    def test_lambda_key(self):
        spec = RegularizerSpec.from_json({"family": "shannon", "lambda": 2.5})
        assert spec.lam == 2.5

    def test_malformed(self):
        with pytest.raises(ValidationError):
            RegularizerSpec.from_json({"lambda": 1.0})
