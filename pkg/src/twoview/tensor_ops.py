"""Dense vector/matrix primitives: initializers, circular correlation,
tanh-affine maps and their pseudo-inverse, norm projection, and a
finite-difference gradient checker.

Training runs in 32-bit for throughput; everything that feeds a numerical
check (finite differences, pseudo-inverse round trips) should be handed
64-bit arrays, since central differences are unreliable in single precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import TwoViewError

log = logging.getLogger(__name__)


@dataclass
class AffineMap:
    """x -> W @ x + b with W of shape (d_out, d_in)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def d_out(self) -> int:
        return self.W.shape[0]

    @property
    def d_in(self) -> int:
        return self.W.shape[1]


def init_unit_sphere(count: int, dim: int, rng: np.random.Generator,
                     dtype=np.float32) -> np.ndarray:
    """Sample ``count`` vectors uniformly from the unit sphere in R^dim.

    Standard Gaussians normalized to unit L2 norm; rows with numerically
    zero norm (immeasurably rare) are resampled.
    """
    if dim < 1:
        raise TwoViewError(f"dimension must be >= 1, got {dim}")
    if count < 0:
        raise TwoViewError(f"count must be >= 0, got {count}")
    out = rng.standard_normal((count, dim))
    norms = np.linalg.norm(out, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        out[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(out, axis=1)
    return (out / norms[:, None]).astype(dtype)


def init_orthogonal(d_out: int, d_in: int, rng: np.random.Generator,
                    dtype=np.float32) -> np.ndarray:
    """Random semi-orthogonal (d_out, d_in) matrix.

    Rows are orthonormal when d_out <= d_in, columns otherwise; obtained by
    QR of a Gaussian matrix with the sign fix that makes the factor
    Haar-distributed.  All singular values equal 1.
    """
    n, m = max(d_out, d_in), min(d_out, d_in)
    a = rng.standard_normal((n, m))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if d_out <= d_in:
        return q.T.astype(dtype)
    return q.astype(dtype)


def circ_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Circular correlation: out[k] = sum_i a[i] * b[(k + i) % d].

    Exact per-definition computation (O(d^2) via one matmul).  The
    FFT-based fast path is ``circ_correlation_fft``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise TwoViewError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.shape[0]
    idx = (np.arange(d)[:, None] + np.arange(d)[None, :]) % d  # [i, k] -> (k+i)%d
    return a @ b[idx]


def circ_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Circular convolution: out[k] = sum_i a[i] * b[(k - i) % d]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise TwoViewError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.shape[0]
    idx = (np.arange(d)[None, :] - np.arange(d)[:, None]) % d  # [i, k] -> (k-i)%d
    return a @ b[idx]


def circ_correlation_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Transform-based circular correlation; matches the definition to ~1e-4 relative."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise TwoViewError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.real(np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b))).astype(a.dtype)


def affine_tanh(m: AffineMap, x: np.ndarray) -> np.ndarray:
    """tanh(W @ x + b); accepts a single vector or a (n, d_in) batch.

    Outputs are strictly inside (-1, 1): floating-point tanh saturates to
    exactly +-1 for large inputs, so saturated values are pulled in by one
    ulp to keep the open-interval contract (and artanh finite).
    """
    x = np.asarray(x)
    if x.shape[-1] != m.d_in:
        raise TwoViewError(
            f"input dim {x.shape[-1]} does not match map input dim {m.d_in}")
    out = np.tanh(m.W @ x + m.b) if x.ndim == 1 else np.tanh(x @ m.W.T + m.b)
    one = out.dtype.type(1.0)
    return np.clip(out, np.nextafter(-one, one), np.nextafter(one, -one))


def affine_tanh_pinv(m: AffineMap, y: np.ndarray, clamp_delta: float = 1e-6,
                     w_pinv: np.ndarray | None = None) -> np.ndarray:
    """Minimum-norm preimage of the tanh-affine map.

    Returns ``pinv(W) @ (artanh(clip(y, -1+delta, 1-delta)) - b)``.  For
    well-conditioned W this is a left inverse on the row space.  Pass a
    precomputed ``w_pinv`` when inverting many targets against one map.
    """
    y = np.asarray(y)
    if not 0.0 < clamp_delta <= 0.1:
        raise TwoViewError(f"clamp delta must be in (0, 0.1], got {clamp_delta}")
    if y.shape[-1] != m.d_out:
        raise TwoViewError(
            f"target dim {y.shape[-1]} does not match map output dim {m.d_out}")
    if w_pinv is None:
        w_pinv = np.linalg.pinv(m.W)
        sv = np.linalg.svd(m.W, compute_uv=False)
        if sv[-1] < 1e-10 * sv[0]:
            log.warning("pseudo-inverting a rank-deficient map "
                        "(condition number %.3g)", sv[0] / max(sv[-1], 1e-300))
    z = np.arctanh(np.clip(y, -1.0 + clamp_delta, 1.0 - clamp_delta))
    if y.ndim == 1:
        return w_pinv @ (z - m.b)
    return (z - m.b) @ w_pinv.T


def project_unit_norm(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm.

    The norm is accumulated in 64-bit so denormal-scale inputs do not
    underflow to zero; a genuinely zero vector is an error.
    """
    v = np.asarray(v)
    norm = float(np.linalg.norm(v.astype(np.float64, copy=False)))
    if norm == 0.0:
        raise TwoViewError("cannot normalize a zero vector")
    return (v.astype(np.float64, copy=False) / norm).astype(v.dtype)


def project_rows_unit_norm(table: np.ndarray, rows: np.ndarray | list[int]) -> None:
    """In-place unit-norm projection of the selected rows of an embedding table."""
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        return
    block = table[rows].astype(np.float64, copy=False)
    norms = np.linalg.norm(block, axis=1)
    if np.any(norms == 0.0):
        raise TwoViewError("cannot normalize a zero embedding row")
    table[rows] = (block / norms[:, None]).astype(table.dtype)


def finite_diff_check(loss_fn, grad: np.ndarray, point: np.ndarray,
                      eps: float = 1e-5) -> float:
    """Max symmetric relative error between ``grad`` and central differences.

    ``loss_fn`` maps a flat 64-bit parameter vector to a scalar; the error
    per coordinate is |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
    and the maximum over coordinates is returned.
    """
    if eps <= 0:
        raise TwoViewError(f"eps must be positive, got {eps}")
    point = np.asarray(point, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != point.shape:
        raise TwoViewError(f"gradient shape {grad.shape} != point shape {point.shape}")
    worst = 0.0
    for i in range(point.size):
        shift = np.zeros_like(point)
        shift[i] = eps
        up = float(loss_fn(point + shift))
        down = float(loss_fn(point - shift))
        if not (np.isfinite(up) and np.isfinite(down)):
            raise TwoViewError(f"non-finite loss at probe coordinate {i}")
        numeric = (up - down) / (2.0 * eps)
        analytic = float(grad[i])
        err = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, err)
    return worst
