"""Strongly convex policy regularizers of the form Omega(p) = -lam * E_{a~p}[phi(p(a))].

Five scalar families are supported (phi, its derivative, f(x) = x*phi(x),
f'(x), and the inverse g of f' are all exposed):

    shannon   phi(x) = -log x
    tsallis   phi(x) = k/(q-1) * (1 - x^(q-1)),          k > 0, q > 1
    exp       phi(x) = q - x^k q^x,                       k >= 0, q >= 1
    cos       phi(x) = cos(theta*x) - cos(theta),         0 < theta <= pi/2
    sin       phi(x) = sin(theta) - sin(theta*x),         0 < theta <= pi/2

f' is strictly decreasing on (0, 1] for every family except sin with
theta above SIN_MONOTONE_THETA_MAX (the root of theta*tan(theta) = 2,
about 1.0769): there f' turns back up near x = 1, the inverse g becomes
ambiguous and the downstream normalizer bisection loses its bracket.
Such specs are accepted (the condition column only demands theta <= pi/2)
but warned about at construction; the sin default is the safe theta = 1.0.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError

SHANNON = "shannon"
TSALLIS = "tsallis"
EXP = "exp"
COS = "cos"
SIN = "sin"
FAMILIES = (SHANNON, TSALLIS, EXP, COS, SIN)

# Root of theta * tan(theta) = 2; largest theta with x*phi(x) strictly
# concave on (0, 1] for the sin family.
SIN_MONOTONE_THETA_MAX = 1.0768739863118038

_G_TOL_X = 1e-12
_G_MAX_ITER = 200


@dataclass(frozen=True)
class RegularizerSpec:
    """Parameters selecting one regularizer: family, scale lam, and family constants.

    ``k``/``q`` are the tsallis constants, ``theta`` the cos/sin angle, and
    ``exp_k``/``exp_q`` the exp-family constants (defaults reproduce
    phi(x) = e - e^x).
    """

    family: str
    lam: float = 1.0
    k: float = 1.0
    q: float = 2.0
    theta: float | None = None
    exp_k: float = 0.0
    exp_q: float = math.e

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown regularizer family {self.family!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValidationError(f"lam must be positive, got {self.lam}")
        if self.family == TSALLIS:
            if not self.k > 0:
                raise ValidationError(f"tsallis requires k > 0, got {self.k}")
            if not self.q > 1:
                raise ValidationError(f"tsallis requires q > 1, got {self.q}")
        if self.family == EXP:
            if self.exp_k < 0:
                raise ValidationError(f"exp requires k >= 0, got {self.exp_k}")
            if self.exp_q < 1:
                raise ValidationError(f"exp requires q >= 1, got {self.exp_q}")
            if self.exp_k == 0 and self.exp_q == 1:
                raise ValidationError("exp with k=0, q=1 is identically zero")
        if self.family in (COS, SIN):
            theta = self.theta
            if theta is None:
                # cos is sound on the whole condition range; sin is not,
                # so its default stays inside the monotone range.
                theta = math.pi / 2 if self.family == COS else 1.0
                object.__setattr__(self, "theta", theta)
            if not 0 < theta <= math.pi / 2:
                raise ValidationError(f"{self.family} requires 0 < theta <= pi/2, got {theta}")
            if self.family == SIN and theta > SIN_MONOTONE_THETA_MAX:
                warnings.warn(
                    f"sin regularizer with theta={theta:.6f} > {SIN_MONOTONE_THETA_MAX:.6f}: "
                    "x*phi(x) is not concave near x=1; inverse-based solvers may fail",
                    RuntimeWarning,
                    stacklevel=2,
                )

    def to_json(self) -> dict:
        out = {"family": self.family, "lambda": self.lam}
        if self.family == TSALLIS:
            out["k"] = self.k
            out["q"] = self.q
        elif self.family == EXP:
            out["exp_k"] = self.exp_k
            out["exp_q"] = self.exp_q
        elif self.family in (COS, SIN):
            out["theta"] = self.theta
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RegularizerSpec":
        if not isinstance(obj, dict) or "family" not in obj:
            raise ValidationError("regularizer JSON must be an object with a 'family' key")
        kwargs = {"family": obj["family"]}
        if "lambda" in obj:
            kwargs["lam"] = float(obj["lambda"])
        for key in ("k", "q", "theta", "exp_k", "exp_q"):
            if key in obj:
                kwargs[key] = float(obj[key])
        return cls(**kwargs)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x > 1):
        raise ValidationError("phi/f_phi_prime domain is 0 < x <= 1")
    return x


def phi(spec: RegularizerSpec, x):
    """The scalar regularizer phi(x) for 0 < x <= 1 (vectorized)."""
    x = _check_x(x)
    if spec.family == SHANNON:
        return -np.log(x)
    if spec.family == TSALLIS:
        return spec.k / (spec.q - 1.0) * (1.0 - x ** (spec.q - 1.0))
    if spec.family == EXP:
        return spec.exp_q - x**spec.exp_k * spec.exp_q**x
    if spec.family == COS:
        return np.cos(spec.theta * x) - math.cos(spec.theta)
    return math.sin(spec.theta) - np.sin(spec.theta * x)


def phi_prime(spec: RegularizerSpec, x):
    """d/dx phi(x); used by the fixed-point value expression."""
    x = _check_x(x)
    if spec.family == SHANNON:
        return -1.0 / x
    if spec.family == TSALLIS:
        return -spec.k * x ** (spec.q - 2.0)
    if spec.family == EXP:
        k, q = spec.exp_k, spec.exp_q
        return -(x ** (k - 1.0)) * q**x * (k + x * math.log(q)) if k != 0 else -(q**x) * math.log(q)
    if spec.family == COS:
        return -spec.theta * np.sin(spec.theta * x)
    return -spec.theta * np.cos(spec.theta * x)


def f_phi(spec: RegularizerSpec, x):
    """f(x) = x * phi(x), the per-action contribution to -Omega/lam."""
    x = _check_x(x)
    return x * phi(spec, x)


def f_phi_prime(spec: RegularizerSpec, x):
    """d/dx (x * phi(x)) for 0 < x <= 1 (vectorized)."""
    x = _check_x(x)
    return _f_prime_raw(spec, x)


def _f_prime_raw(spec, x):
    if spec.family == SHANNON:
        return -np.log(x) - 1.0
    if spec.family == TSALLIS:
        return spec.k / (spec.q - 1.0) * (1.0 - spec.q * x ** (spec.q - 1.0))
    if spec.family == EXP:
        k, q = spec.exp_k, spec.exp_q
        return q - x**k * q**x * (k + 1.0 + x * math.log(q))
    if spec.family == COS:
        t = spec.theta
        return -math.cos(t) + np.cos(t * x) - t * x * np.sin(t * x)
    t = spec.theta
    return math.sin(t) - np.sin(t * x) - t * x * np.cos(t * x)


def _f_second_raw(spec, x):
    """d2/dx2 (x * phi(x)); negative wherever f' is strictly decreasing."""
    if spec.family == SHANNON:
        return -1.0 / x
    if spec.family == TSALLIS:
        return -spec.k * spec.q * x ** (spec.q - 2.0)
    if spec.family == EXP:
        k, q = spec.exp_k, spec.exp_q
        lnq = math.log(q)
        u = x**k * q**x
        du = x ** (k - 1.0) * q**x * (k + x * lnq) if k != 0 else u * lnq
        return -du * (k + 1.0 + x * lnq) - u * lnq
    if spec.family == COS:
        t = spec.theta
        return -2.0 * t * np.sin(t * x) - t * t * x * np.cos(t * x)
    t = spec.theta
    return -2.0 * t * np.cos(t * x) + t * t * x * np.sin(t * x)


def f_phi_prime_limit_at_zero(spec: RegularizerSpec) -> float:
    """lim_{x->0+} f_phi'(x): +inf for shannon, finite for the other families.

    A finite limit is what allows sparse optimal policies (the max{., 0}
    clamp) and finite rewards on zero-probability expert actions.
    """
    if spec.family == SHANNON:
        return math.inf
    if spec.family == TSALLIS:
        return spec.k / (spec.q - 1.0)
    if spec.family == EXP:
        # x^k -> 1 for k=0, -> 0 for k>0
        return spec.exp_q - 1.0 if spec.exp_k == 0 else spec.exp_q
    if spec.family == COS:
        return 1.0 - math.cos(spec.theta)
    return math.sin(spec.theta)


def g_phi(spec: RegularizerSpec, y: float) -> float:
    """Inverse of f_phi': the x in [0, 1] with f_phi'(x) = y.

    Returns 0 for y at or above the (finite) limit of f_phi' at 0+, the
    sparse-support clamp. Closed form for shannon and tsallis; bracketed
    root finding on (0, 1] otherwise, tolerance 1e-12 on x, at most 200
    iterations. Raises NumericError when no bracket exists, which signals
    a non-monotone f_phi' (an unsound spec such as sin near theta=pi/2).
    """
    y = float(y)
    if spec.family == SHANNON:
        return math.exp(-y - 1.0)
    if spec.family == TSALLIS:
        base = (1.0 - (spec.q - 1.0) * y / spec.k) / spec.q
        if base <= 0.0:
            return 0.0
        return base ** (1.0 / (spec.q - 1.0))
    out = _g_iterative(spec, np.array([y]))
    return float(out[0])


def _g_iterative(spec, y, x0=None):
    """Vectorized safeguarded Newton for g on the exp/cos/sin families."""
    y = np.asarray(y, dtype=float)
    f0 = f_phi_prime_limit_at_zero(spec)
    fp1 = float(_f_prime_raw(spec, np.float64(1.0)))
    out = np.zeros_like(y)
    active = y < f0
    out[~active] = 0.0
    # at or below f'(1) the root is x = 1 (callers bracket to keep y >= f'(1))
    at_one = active & (y <= fp1)
    if np.any(at_one & (y < fp1 - 1e-9)):
        raise ValidationError("g_phi: y below f_phi'(1) has no root in (0, 1] for this family")
    out[at_one] = 1.0
    active &= ~at_one
    if not np.any(active):
        return out

    ya = y[active]
    lo = np.zeros_like(ya)  # f'(lo+) = f0 > ya
    hi = np.ones_like(ya)  # f'(1) <= ya
    x = np.full_like(ya, 0.5) if x0 is None else np.clip(np.asarray(x0, float)[active], 1e-12, 1.0)
    atol = 1e-13 * (1.0 + np.abs(ya))
    converged = np.zeros(ya.shape, dtype=bool)
    for _ in range(_G_MAX_ITER):
        r = _f_prime_raw(spec, x) - ya
        converged |= np.abs(r) <= atol
        converged |= (hi - lo) <= _G_TOL_X
        if converged.all():
            break
        # f' decreasing: positive residual means x is too small
        lo = np.where((r > 0) & ~converged, x, lo)
        hi = np.where((r < 0) & ~converged, x, hi)
        step = r / _f_second_raw(spec, x)
        xn = x - step
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(converged, x, xn)
    else:
        raise NumericError(
            "g_phi failed to converge within 200 iterations; f_phi' is likely non-monotone"
        )
    out[active] = x
    return out


def _g_batch(spec, y, warm=None):
    """g applied elementwise to an array, warm-startable for iterative families."""
    if spec.family == SHANNON:
        return np.exp(-y - 1.0)
    if spec.family == TSALLIS:
        base = np.maximum((1.0 - (spec.q - 1.0) * y / spec.k) / spec.q, 0.0)
        expo = 1.0 / (spec.q - 1.0)
        return base if expo == 1.0 else base**expo
    return _g_iterative(spec, y, x0=warm)


def _check_distribution(p, atol=1e-9):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("expected a 1-d probability vector")
    if np.any(p < -1e-12) or not np.isfinite(p).all():
        raise ValidationError("probability vector has negative or non-finite entries")
    if abs(p.sum() - 1.0) > atol:
        raise ValidationError(f"probability vector sums to {p.sum()!r}, not 1")
    return np.clip(p, 0.0, None)


def omega(spec: RegularizerSpec, p) -> float:
    """Omega(p) = -lam * sum_a p(a) phi(p(a)); zero entries contribute 0."""
    p = _check_distribution(p)
    mask = p > 0.0
    if not mask.any():
        return 0.0
    px = p[mask]
    return float(-spec.lam * np.sum(px * phi(spec, px)))


def grad_omega(spec: RegularizerSpec, p) -> np.ndarray:
    """Gradient of Omega at an interior p: component a is -lam * f_phi'(p(a))."""
    p = _check_distribution(p)
    if np.any(p <= 0.0):
        if math.isinf(f_phi_prime_limit_at_zero(spec)):
            raise ValidationError("grad_omega undefined at zero entries for this family")
        out = np.empty_like(p)
        zero = p <= 0.0
        out[zero] = -spec.lam * f_phi_prime_limit_at_zero(spec)
        out[~zero] = -spec.lam * f_phi_prime(spec, p[~zero])
        return out
    return -spec.lam * f_phi_prime(spec, p)


def omega_rows(spec: RegularizerSpec, probs: np.ndarray) -> np.ndarray:
    """Omega applied to each row of a row-stochastic matrix (no per-row checks)."""
    probs = np.asarray(probs, dtype=float)
    contrib = np.zeros_like(probs)
    mask = probs > 0.0
    if mask.any():
        contrib[mask] = probs[mask] * phi(spec, probs[mask])
    return -spec.lam * contrib.sum(axis=-1)
