"""Input validation helpers shared by the solvers, trainers, and CLI."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_float_array(x, name: str, shape=None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite entries")
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


def check_probability_vector(p, name: str = "p", atol: float = 1e-9) -> np.ndarray:
    p = as_float_array(p, name)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d vector")
    if np.any(p < -1e-12):
        raise ValidationError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > atol:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1 within {atol}")
    return np.clip(p, 0.0, None)


def check_row_stochastic(m, name: str = "matrix", atol: float = 1e-9) -> np.ndarray:
    m = as_float_array(m, name)
    if m.ndim != 2 or m.size == 0:
        raise ValidationError(f"{name} must be a nonempty 2-d matrix")
    if np.any(m < -1e-12):
        raise ValidationError(f"{name} has negative entries")
    sums = m.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
    if bad.size:
        raise ValidationError(f"{name} row {bad[0]} sums to {sums[bad[0]]!r}, not 1 within {atol}")
    return np.clip(m, 0.0, None)


def check_state_indices(states, n_states: int, name: str = "states") -> np.ndarray:
    idx = np.asarray(states)
    if idx.size == 0:
        raise ValidationError(f"{name} must be nonempty")
    if not np.issubdtype(idx.dtype, np.integer):
        if not np.all(idx == np.floor(idx)):
            raise ValidationError(f"{name} must be integer indices")
        idx = idx.astype(int)
    if idx.min() < 0 or idx.max() >= n_states:
        raise ValidationError(f"{name} out of range [0, {n_states})")
    return idx
