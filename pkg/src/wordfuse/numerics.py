"""Dense float64 kernels shared by every other module.

Everything here is deliberately boring: row-major float64 matrices,
a portable PRNG, and a text matrix format.  The point is bit-level
reproducibility across runs and platforms, not speed.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

_MASK64 = (1 << 64) - 1
_UNIT_SCALE = 1.0 / (1 << 53)

# norms below this are treated as zero vectors
DEGENERATE_NORM = 1e-12


class SplitMix64:
    """SplitMix64 generator; identical seeds give identical streams everywhere.

    The state transition is plain 64-bit integer arithmetic, so streams can be
    reproduced exactly in any language. Doubles come from the top 53 bits.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _UNIT_SCALE


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting anything else."""
    out = np.asarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    return out


def as_vector(v, name: str = "vector") -> np.ndarray:
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={out.ndim}")
    return out


def require_finite(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with a pinned accumulation order.

    Each output entry accumulates products over the inner index in ascending
    order, one rounded multiply plus one rounded add per step.  That makes the
    result bit-identical to a naive triple loop with the inner index innermost,
    which is what the self-check suite compares against.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.shape[0]}x{a.shape[1]} @ {b.shape[0]}x{b.shape[1]}"
        )
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k, :])
    return out


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with max subtraction; -inf entries map to exactly 0.

    Rows may contain -inf (masked positions) but must keep at least one finite
    entry; +inf and NaN are rejected.
    """
    m = as_matrix(m, "m")
    if np.isnan(m).any() or np.isposinf(m).any():
        raise ValueError("softmax input contains NaN or +inf")
    finite_rows = np.isfinite(m).any(axis=1)
    if not finite_rows.all():
        bad = int(np.argmin(finite_rows))
        raise ValueError(f"fully masked row {bad}: every entry is -inf")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)  # exp(-inf) == 0.0 exactly
    return e / e.sum(axis=1, keepdims=True)


def cosine(u, v) -> float:
    """Cosine similarity; 0.0 when either vector is degenerately small."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape[0] != v.shape[0]:
        raise ValueError(f"cosine length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu < DEGENERATE_NORM or nv < DEGENERATE_NORM:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def init_matrix(rng: SplitMix64, rows: int, cols: int) -> np.ndarray:
    """Uniform entries in [-1/sqrt(cols), +1/sqrt(cols)], consumed row-major."""
    if rows < 1 or cols < 1:
        raise ValueError(f"init_matrix needs positive dims, got {rows}x{cols}")
    bound = 1.0 / math.sqrt(cols)
    data = [(rng.next_unit() * 2.0 - 1.0) * bound for _ in range(rows * cols)]
    return np.array(data).reshape(rows, cols)


def write_matrix(m, path: str | os.PathLike) -> None:
    """Write the text format: header "rows cols", then one line per row.

    Floats are serialized with the shortest decimal representation that
    round-trips, so write -> read -> write is byte-stable.
    """
    m = require_finite(as_matrix(m), "matrix")
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    for row in m:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    """Parse the text matrix format; errors carry 1-based line numbers."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: line 1: empty file, expected 'rows cols' header")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"{path}: line 1: malformed header {lines[0]!r}, expected 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise ValueError(f"{path}: line 1: non-integer header {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise ValueError(f"{path}: line 1: dimensions must be positive, got {rows}x{cols}")
    if len(lines) - 1 != rows:
        raise ValueError(f"{path}: expected {rows} data rows, found {len(lines) - 1}")
    out = np.empty((rows, cols))
    for i, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if len(tokens) != cols:
            raise ValueError(f"{path}: line {i}: expected {cols} values, got {len(tokens)}")
        for j, tok in enumerate(tokens):
            try:
                val = float(tok)
            except ValueError:
                raise ValueError(f"{path}: line {i}: invalid number {tok!r}") from None
            if not math.isfinite(val):
                raise ValueError(f"{path}: line {i}: non-finite value {tok!r}")
            out[i - 2, j] = val
    return out
