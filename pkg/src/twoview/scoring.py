"""Triple plausibility scorers and their analytic gradients.

Three interchangeable score functions over (head, relation, tail) embedding
vectors, higher meaning more plausible:

* translational:   -||h + r - t||_2
* multiplicative:  (h o t) . r        (Hadamard product)
* correlational:   (h * t) . r        (circular correlation)

The ``score_all_*`` helpers evaluate one query against a whole candidate
table in a single matmul; they are algebraically identical to ``score``.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import TwoViewError
from .tensor_ops import circ_convolution, circ_correlation


class ScorerKind(str, Enum):
    TRANSLATIONAL = "translational"
    MULTIPLICATIVE = "multiplicative"
    CORRELATIONAL = "correlational"


def _check_dims(h, r, t):
    if not (h.shape == r.shape == t.shape) or h.ndim != 1:
        raise TwoViewError(
            f"score expects equal-length vectors, got {h.shape}/{r.shape}/{t.shape}")


def score(kind: ScorerKind, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> float:
    h, r, t = np.asarray(h), np.asarray(r), np.asarray(t)
    _check_dims(h, r, t)
    if kind is ScorerKind.TRANSLATIONAL:
        return -float(np.linalg.norm(h + r - t))
    if kind is ScorerKind.MULTIPLICATIVE:
        return float((h * t) @ r)
    return float(circ_correlation(h, t) @ r)


def score_grads(kind: ScorerKind, h: np.ndarray, r: np.ndarray,
                t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(df/dh, df/dr, df/dt) for the given scorer.

    The translational gradient at an exact translation (h + r = t) uses the
    zero subgradient.
    """
    h, r, t = np.asarray(h), np.asarray(r), np.asarray(t)
    _check_dims(h, r, t)
    if kind is ScorerKind.TRANSLATIONAL:
        diff = h + r - t
        norm = float(np.linalg.norm(diff))
        if norm == 0.0:
            zero = np.zeros_like(diff)
            return zero, zero.copy(), zero.copy()
        u = diff / norm
        return -u, -u.copy(), u.copy()
    if kind is ScorerKind.MULTIPLICATIVE:
        return t * r, h * t, h * r
    # correlational: f = sum_{k,i} r_k h_i t_{(k+i)%d}
    return (circ_correlation(r, t),
            circ_correlation(h, t),
            circ_convolution(h, r))


def score_all_tails(kind: ScorerKind, h: np.ndarray, r: np.ndarray,
                    tails: np.ndarray) -> np.ndarray:
    """Scores of (h, r, t~) for every row t~ of ``tails``."""
    if kind is ScorerKind.TRANSLATIONAL:
        return -np.linalg.norm((h + r)[None, :] - tails, axis=1)
    if kind is ScorerKind.MULTIPLICATIVE:
        return tails @ (h * r)
    # (h * t) . r = t . (h circularly convolved with r)
    return tails @ circ_convolution(h, r)


def score_all_heads(kind: ScorerKind, heads: np.ndarray, r: np.ndarray,
                    t: np.ndarray) -> np.ndarray:
    """Scores of (h~, r, t) for every row h~ of ``heads``."""
    if kind is ScorerKind.TRANSLATIONAL:
        return -np.linalg.norm(heads - (t - r)[None, :], axis=1)
    if kind is ScorerKind.MULTIPLICATIVE:
        return heads @ (t * r)
    # (h * t) . r = h . (r star t)
    return heads @ circ_correlation(r, t)
