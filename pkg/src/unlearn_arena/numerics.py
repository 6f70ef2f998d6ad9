"""Dense linear algebra, probability, and statistics primitives.

Matrices and vectors are plain float64 numpy arrays (row-major). Every
operation here is pure: identical inputs (including stream state) give
bit-identical outputs, which the replay distinguisher and the
reproducibility contract of the game harness both depend on.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCounts, LengthMismatch, NotPositiveDefinite, SingularDowndate

# Pivot floor for the Cholesky factorization, relative to max diagonal.
PIVOT_FLOOR = 1e-12

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of splitmix64; mixes a 64-bit value thoroughly."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _label_to_int(label) -> int:
    if isinstance(label, int):
        return label & _MASK64
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    if isinstance(label, tuple):
        acc = 0x243F6A8885A308D3
        for part in label:
            acc = _splitmix64(acc ^ _label_to_int(part))
        return acc
    raise TypeError(f"unsupported stream label type: {type(label)!r}")


class RngStream:
    """Counter-based random stream keyed by (seed, stream-id).

    Backed by Philox, which is keyed rather than sequentially seeded, so
    distinct stream-ids are statistically independent and a stream's draws
    do not depend on when other streams were used. Streams are
    single-owner: share the (seed, id) pair, not the object.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & _MASK64
        self.stream_id = stream_id & _MASK64
        self._gen = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array([self.seed, self.stream_id], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, label) -> "RngStream":
        """Derive an independent stream; pure, consumes no draws."""
        mixed = _splitmix64(self.stream_id ^ _label_to_int(label))
        return RngStream(self.seed, mixed)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class CredibleInterval:
    lo: float
    hi: float
    level: float

    def contains(self, p: float) -> bool:
        return self.lo <= p <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _check_square_symmetric(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if a.size and np.max(np.abs(a - a.T)) > tol * max(1.0, np.max(np.abs(a))):
        raise ValueError("matrix is not symmetric within tolerance")
    return a


def cholesky_spd(a: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive-definite matrix.

    Raises NotPositiveDefinite when a pivot falls at or below
    PIVOT_FLOOR times the largest diagonal entry.
    """
    a = _check_square_symmetric(a)
    n = a.shape[0]
    floor = PIVOT_FLOOR * (np.max(np.diag(a)) if n else 0.0)
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= floor:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at column {j} is at or below floor {floor:.3e}"
            )
        ljj = math.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1:, j] = (a[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / ljj
    return lower


def _forward_sub(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lower.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    for i in range(n):
        x[i] = (x[i] - lower[i, :i] @ x[:i]) / lower[i, i]
    return x


def _back_sub(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Solves L^T x = b for lower-triangular L.
    n = lower.shape[0]
    x = np.array(b, dtype=np.float64, copy=True)
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lower[i + 1:, i] @ x[i + 1:]) / lower[i, i]
    return x


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for symmetric positive-definite A via Cholesky."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side shape {b.shape} does not match {a.shape}")
    lower = cholesky_spd(a)
    return _back_sub(lower, _forward_sub(lower, b))


def invert_spd(a: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    lower = cholesky_spd(a)
    n = lower.shape[0]
    inv = np.empty((n, n), dtype=np.float64)
    eye = np.eye(n)
    for j in range(n):
        inv[:, j] = _back_sub(lower, _forward_sub(lower, eye[:, j]))
    # Symmetrize away the last-bit asymmetry from column-wise solves.
    return (inv + inv.T) / 2.0


def sherman_morrison_downdate(a_inv: np.ndarray, u: np.ndarray) -> np.ndarray:
    """(A - u u^T)^-1 from A^-1 in O(n^2), via the Sherman-Morrison identity.

    Raises SingularDowndate when 1 - u^T A^-1 u vanishes, i.e. the removal
    makes the underlying matrix singular.
    """
    a_inv = _check_square_symmetric(a_inv)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] != a_inv.shape[0]:
        raise ValueError(f"update vector shape {u.shape} does not match {a_inv.shape}")
    w = a_inv @ u
    denom = 1.0 - u @ w
    if abs(denom) <= 1e-10:
        raise SingularDowndate(f"1 - u^T A^-1 u = {denom:.3e}")
    return a_inv + np.outer(w, w) / denom


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis.

    Outputs are floored at 1e-300 so downstream logs stay finite; the
    floor is far below every tolerance used by the scoring code.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / np.sum(e, axis=-1, keepdims=True)
    return np.maximum(p, 1e-300)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Relative entropy sum(p * ln(p/q)) with 0*ln(0/q) = 0.

    q entries below 1e-12 are clamped to 1e-12 before dividing, so
    underflowed classifier outputs produce large but finite scores.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise LengthMismatch(f"shapes {p.shape} and {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probability entries must be non-negative")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} must sum to 1 within 1e-9, got {v.sum()!r}")
    qc = np.maximum(q, 1e-12)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / qc[mask])))


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the CDF of Beta(a, b) at x."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _beta_quantile(a: float, b: float, prob: float, tol: float = 1e-10) -> float:
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if regularized_incomplete_beta(a, b, mid) < prob:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def jeffreys_interval(successes: int, trials: int, level: float) -> CredibleInterval:
    """Equal-tailed credible interval of Beta(s + 1/2, n - s + 1/2).

    Quantiles are found by bisection on the regularized incomplete beta
    to absolute tolerance 1e-10; no special-function dependency.
    """
    if trials < 0 or successes < 0 or successes > trials:
        raise InvalidCounts(f"successes={successes}, trials={trials}")
    if not 0.0 < level < 1.0:
        raise InvalidCounts(f"level={level} not in (0, 1)")
    a = successes + 0.5
    b = trials - successes + 0.5
    lo = _beta_quantile(a, b, (1.0 - level) / 2.0)
    hi = _beta_quantile(a, b, (1.0 + level) / 2.0)
    return CredibleInterval(lo=lo, hi=hi, level=level)


def gaussian_vector(rng: RngStream, n: int, mean: float, variance: float) -> np.ndarray:
    """n i.i.d. draws from N(mean, variance); variance 0 gives the constant."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0.0:
        return np.full(n, float(mean))
    return mean + math.sqrt(variance) * rng.gen.standard_normal(n)
