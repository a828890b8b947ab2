"""Bregman divergences between discrete distributions and diagonal Gaussians.

For the regularizer family Omega(p) = -lam * E_p[phi(p)], the Bregman
divergence between action distributions reduces to

    D(p1 || p2) = lam * ( E_{p1}[f'(p2) - phi(p1)] - E_{p2}[f'(p2) - phi(p2)] ),

which is lam * KL for shannon and lam * squared Euclidean distance for
tsallis q=2. The Gaussian closed forms (Tsallis entropy, reward baseline,
and the k=1 Bregman divergence) come from the exponential-family identity
integral(pi^alpha * pihat^beta) = exp(F(alpha*theta + beta*thetahat)
- alpha F(theta) - beta F(thetahat)); every closed form here has an
independent Monte-Carlo and (in one dimension) quadrature oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ValidationError
from .mdp import TabularPolicy
from .regularizers import SHANNON, RegularizerSpec, f_phi_prime, f_phi_prime_limit_at_zero, phi
from .validation import as_float_array, check_probability_vector, check_state_indices

MONTE_CARLO = "monte_carlo"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class DiagGaussian:
    """Diagonal-covariance Gaussian: mean vector and per-dimension stddev."""

    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(as_float_array(self.mean, "mean"))
        std = np.atleast_1d(as_float_array(self.stddev, "stddev"))
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValidationError("mean and stddev must be matching 1-d vectors")
        if np.any(std <= 0):
            raise ValidationError("stddev entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stddev", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Density at points x of shape (n, d) or (n,) for d=1."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        z = (x - self.mean) / self.stddev
        log_norm = np.sum(np.log(np.sqrt(2.0 * math.pi) * self.stddev))
        return np.exp(-0.5 * (z * z).sum(axis=1) - log_norm)

    def sample(self, n: int, rng) -> np.ndarray:
        return self.mean + self.stddev * rng.standard_normal((n, self.dim))


def bregman_discrete(p1, p2, spec: RegularizerSpec) -> float:
    """Bregman divergence between action distributions under the spec's Omega.

    Fails for shannon when p2 gives zero mass to an action p1 supports
    (the divergence is infinite there); other families use the finite
    f_phi'(0+) limit.
    """
    p1 = check_probability_vector(p1, "p1")
    p2 = check_probability_vector(p2, "p2")
    if p1.shape != p2.shape:
        raise ValidationError("p1 and p2 must have the same length")
    if spec.family == SHANNON and np.any((p1 > 0) & (p2 <= 0)):
        raise ValidationError("support mismatch: p2 is zero where p1 has mass (shannon)")
    fp2 = np.zeros_like(p2)
    pos2 = p2 > 0
    need = pos2 | (p1 > 0)
    zero2 = need & ~pos2
    if zero2.any():
        fp2[zero2] = f_phi_prime_limit_at_zero(spec)
    if pos2.any():
        fp2[pos2] = f_phi_prime(spec, p2[pos2])
    term1 = 0.0
    m1 = p1 > 0
    if m1.any():
        term1 = np.sum(p1[m1] * (fp2[m1] - phi(spec, p1[m1])))
    term2 = 0.0
    if pos2.any():
        term2 = np.sum(p2[pos2] * (fp2[pos2] - phi(spec, p2[pos2])))
    return float(spec.lam * (term1 - term2))


def mean_bregman(
    policy: TabularPolicy,
    expert: TabularPolicy,
    eval_states,
    spec: RegularizerSpec,
) -> float:
    """Arithmetic mean of bregman_discrete(policy row || expert row) over states."""
    if policy.probs.shape != expert.probs.shape:
        raise ValidationError("policy and expert shapes differ")
    idx = check_state_indices(eval_states, policy.n_states, "eval_states")
    vals = [bregman_discrete(policy.probs[s], expert.probs[s], spec) for s in idx]
    return float(np.mean(vals))


def _log_partition(mean: np.ndarray, std: np.ndarray) -> float:
    """Exponential-family log-normalizer F(theta) of a diagonal Gaussian."""
    return float(
        np.sum(mean**2 / (2.0 * std**2) + 0.5 * math.log(2.0 * math.pi) + np.log(std))
    )


def gaussian_tsallis_entropy(g: DiagGaussian, q: float, k: float = 1.0) -> float:
    """Closed-form Tsallis entropy E_g[k (1 - p^(q-1)) / (q-1)] of a diagonal Gaussian.

    q=1 is the Shannon branch (differential entropy scaled by k); the
    1/(q-1) factors make a limit evaluation numerically useless there.
    """
    if q < 1:
        raise ValidationError(f"gaussian Tsallis entropy requires q >= 1, got {q}")
    if q == 1:
        return float(k * np.sum(np.log(np.sqrt(2.0 * math.pi * math.e) * g.stddev)))
    renyi = float(np.sum(np.log(np.sqrt(2.0 * math.pi) * g.stddev) - math.log(q) / (2.0 * (1.0 - q))))
    return k * (1.0 - math.exp((1.0 - q) * renyi)) / (q - 1.0)


def gaussian_reward_baseline(g: DiagGaussian, q: float, k: float = 1.0) -> float:
    """E_g[f'(p) - phi(p)] = (q-1) * T_q^k(g) - k for the Tsallis family."""
    return (q - 1.0) * gaussian_tsallis_entropy(g, q, k) - k


def gaussian_kl(g1: DiagGaussian, g2: DiagGaussian) -> float:
    """KL(g1 || g2) between diagonal Gaussians."""
    if g1.dim != g2.dim:
        raise ValidationError("dimension mismatch")
    s1, s2 = g1.stddev, g2.stddev
    return float(
        np.sum(np.log(s2 / s1) + (s1**2 + (g1.mean - g2.mean) ** 2) / (2.0 * s2**2) - 0.5)
    )


def gaussian_bregman_tsallis(g1: DiagGaussian, g2: DiagGaussian, q: float) -> float:
    """Bregman divergence D(g1 || g2) under the Tsallis regularizer with k=1.

    q=1 routes to the KL divergence. For q > 1 the cross term
    integral(p1 * p2^(q-1)) is evaluated through the exponential-family
    log-normalizer of the composite natural parameter, which is valid per
    dimension since 1/s1^2 + (q-1)/s2^2 > 0.
    """
    if g1.dim != g2.dim:
        raise ValidationError("dimension mismatch")
    if q < 1:
        raise ValidationError(f"gaussian Bregman divergence requires q >= 1, got {q}")
    if q == 1:
        return gaussian_kl(g1, g2)
    m1, s1, m2, s2 = g1.mean, g1.stddev, g2.mean, g2.stddev
    c = 1.0 / s1**2 + (q - 1.0) / s2**2
    t1 = m1 / s1**2 + (q - 1.0) * m2 / s2**2
    f_composite = float(
        np.sum(0.5 * t1**2 / c + 0.5 * math.log(2.0 * math.pi) - 0.5 * np.log(c))
    )
    cross = math.exp(
        f_composite - _log_partition(m1, s1) - (q - 1.0) * _log_partition(m2, s2)
    )
    t_q1 = gaussian_tsallis_entropy(g1, q, 1.0)
    t_q2 = gaussian_tsallis_entropy(g2, q, 1.0)
    return q / (q - 1.0) - q / (q - 1.0) * cross - t_q1 - (q - 1.0) * t_q2


def _phi_fp_density(q: float, k: float):
    """phi and f' as functions of a density value, with the q=1 log branch."""
    if q == 1:
        return (lambda v: -k * np.log(v)), (lambda v: -k * np.log(v) - k)
    phi_f = lambda v: k * (1.0 - v ** (q - 1.0)) / (q - 1.0)
    fp_f = lambda v: k * (1.0 - q * v ** (q - 1.0)) / (q - 1.0)
    return phi_f, fp_f


def numeric_entropy_oracle(
    g: DiagGaussian,
    q: float,
    k: float = 1.0,
    method: str = MONTE_CARLO,
    n: int = 10**6,
    seed: int = 0,
    quad_limit: int = 200,
):
    """Independent estimate of E_g[phi(p)] for the Tsallis family.

    Monte Carlo (any dimension) returns (estimate, stderr); quadrature
    (d=1 only, adaptive with absolute tolerance 1e-10 over +-12 sigma)
    returns (value, None).
    """
    phi_f, _ = _phi_fp_density(q, k)
    if method == MONTE_CARLO:
        rng = np.random.default_rng(seed)
        vals = phi_f(g.pdf(g.sample(n, rng)))
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))
    if method == QUADRATURE:
        if g.dim != 1:
            raise ValidationError("quadrature oracle is one-dimensional only")
        mu, sd = float(g.mean[0]), float(g.stddev[0])
        p = lambda x: math.exp(-0.5 * ((x - mu) / sd) ** 2) / (math.sqrt(2 * math.pi) * sd)
        val, _ = integrate.quad(
            lambda x: p(x) * phi_f(p(x)),
            mu - 12.0 * sd,
            mu + 12.0 * sd,
            epsabs=1e-10,
            limit=quad_limit,
        )
        return float(val), None
    raise ValidationError(f"unknown oracle method {method!r}")


def numeric_bregman_oracle(
    g1: DiagGaussian,
    g2: DiagGaussian,
    q: float,
    method: str = MONTE_CARLO,
    n: int = 10**6,
    seed: int = 0,
    quad_limit: int = 400,
):
    """Independent estimate of the Gaussian Bregman divergence (k=1).

    Same conventions as :func:`numeric_entropy_oracle`; the Monte-Carlo
    standard error combines the two independent sample means.
    """
    phi_f, fp_f = _phi_fp_density(q, 1.0)
    if method == MONTE_CARLO:
        rng = np.random.default_rng(seed)
        x1 = g1.sample(n, rng)
        x2 = g2.sample(n, rng)
        v1 = fp_f(g2.pdf(x1)) - phi_f(g1.pdf(x1))
        v2 = fp_f(g2.pdf(x2)) - phi_f(g2.pdf(x2))
        est = float(v1.mean() - v2.mean())
        se = math.sqrt(v1.var(ddof=1) / n + v2.var(ddof=1) / n)
        return est, se
    if method == QUADRATURE:
        if g1.dim != 1 or g2.dim != 1:
            raise ValidationError("quadrature oracle is one-dimensional only")
        center = 0.5 * (float(g1.mean[0]) + float(g2.mean[0]))
        span = 12.0 * max(float(g1.stddev[0]), float(g2.stddev[0])) + abs(
            float(g1.mean[0]) - float(g2.mean[0])
        )

        def integrand(x):
            pts = np.array([x])
            p1 = float(g1.pdf(pts)[0])
            p2 = float(g2.pdf(pts)[0])
            return p1 * (fp_f(p2) - phi_f(p1)) - p2 * (fp_f(p2) - phi_f(p2))

        val, _ = integrate.quad(
            integrand, center - span, center + span, epsabs=1e-10, limit=quad_limit
        )
        return float(val), None
    raise ValidationError(f"unknown oracle method {method!r}")


def heatmap_grid(
    expert: DiagGaussian,
    mu_range,
    log_sigma_range,
    resolution: int,
    q: float,
) -> np.ndarray:
    """Normalized divergence grid D(N(mu, sigma^2) || expert) over a parameter box.

    Rows index mu, columns index log sigma; the grid is divided by its
    maximum so the largest cell is exactly 1. The expert must be
    one-dimensional.
    """
    if expert.dim != 1:
        raise ValidationError("heatmap expert must be one-dimensional")
    if resolution < 2:
        raise ValidationError("resolution must be at least 2 per axis")
    mus = np.linspace(float(mu_range[0]), float(mu_range[1]), resolution)
    log_sigmas = np.linspace(float(log_sigma_range[0]), float(log_sigma_range[1]), resolution)
    grid = np.empty((resolution, resolution))
    for i, mu in enumerate(mus):
        for j, ls in enumerate(log_sigmas):
            cand = DiagGaussian(np.array([mu]), np.array([math.exp(ls)]))
            grid[i, j] = gaussian_bregman_tsallis(cand, expert, q)
    peak = grid.max()
    if peak <= 0:
        raise ValidationError("degenerate grid: maximum divergence is not positive")
    return grid / peak


def heatmap_axes(mu_range, log_sigma_range, resolution: int):
    """The (mu, log sigma) axis vectors matching :func:`heatmap_grid`."""
    return (
        np.linspace(float(mu_range[0]), float(mu_range[1]), resolution),
        np.linspace(float(log_sigma_range[0]), float(log_sigma_range[1]), resolution),
    )
