"""Input validation helpers used by constructors, the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import InputError

# Affinities are clamped at this floor wherever they enter a log or a
# denominator (the likelihood divides by pi_e, which the model allows to
# vanish).  Expressed on the rescaled scale c = N * p.
EPS_AFFINITY = 1e-10


def as_generator(seed) -> np.random.Generator:
    """Return a numpy Generator from a seed, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_probability_vector(x, name="prior") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InputError(f"{name} must be a non-empty 1-d array")
    if np.any(x < -1e-12) or not np.isfinite(x).all():
        raise InputError(f"{name} must be non-negative and finite")
    total = x.sum()
    if abs(total - 1.0) > 1e-8:
        raise InputError(f"{name} must sum to 1 (got {total!r})")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def check_symmetric_matrix(m, size=None, name="affinity", lo=None, hi=None) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be a square matrix")
    if size is not None and m.shape[0] != size:
        raise InputError(f"{name} must be {size}x{size}, got {m.shape}")
    if not np.isfinite(m).all():
        raise InputError(f"{name} must be finite")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10):
        raise InputError(f"{name} must be symmetric")
    if lo is not None and np.any(m < lo - 1e-12):
        raise InputError(f"{name} entries must be >= {lo}")
    if hi is not None and np.any(m > hi + 1e-12):
        raise InputError(f"{name} entries must be <= {hi}")
    return 0.5 * (m + m.T)


def check_assignment(t, num_nodes, num_communities) -> np.ndarray:
    """Validate a hard community assignment: length N, labels in [0, K)."""
    t = np.asarray(t)
    if t.ndim != 1 or t.shape[0] != num_nodes:
        raise InputError(f"assignment must have length {num_nodes}")
    if not np.issubdtype(t.dtype, np.integer):
        if not np.all(t == np.floor(t)):
            raise InputError("assignment labels must be integers")
        t = t.astype(np.int64)
    if t.size and (t.min() < 0 or t.max() >= num_communities):
        raise InputError(
            f"assignment labels must lie in [0, {num_communities})"
        )
    return t.astype(np.int64, copy=False)


def readonly(a: np.ndarray) -> np.ndarray:
    """Freeze an array in place; shared read-only use is then safe."""
    a.setflags(write=False)
    return a
