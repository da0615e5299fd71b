"""Frame processing: 320x240 RGB capture to the 84x84x3 state tensor.

Downsampling is an exact area average computed in integer arithmetic.
Cell boundaries fall on multiples of 240/84 = 20/7 rows and 320/84 = 80/21
columns, so overlaps are exact in 1/7-row and 1/21-column units and every
output value is round-half-up of a rational with denominator 1600. This
keeps the tensor bit-identical across platforms.
"""

from __future__ import annotations

import numpy as np

from .errors import BadFrame

VISUAL_SIZE = 84
_SRC_H, _SRC_W = 240, 320


def _overlap_matrix(n_in: int, n_out: int, unit_in: int, unit_out: int) -> np.ndarray:
    """Integer overlap of input interval i with output interval j.

    Input cell i spans [i*unit_in, (i+1)*unit_in), output cell j spans
    [j*unit_out, (j+1)*unit_out) on a common integer grid.
    """
    m = np.zeros((n_in, n_out), dtype=np.int64)
    for i in range(n_in):
        lo_i, hi_i = i * unit_in, (i + 1) * unit_in
        for j in range(n_out):
            lo_j, hi_j = j * unit_out, (j + 1) * unit_out
            ov = min(hi_i, hi_j) - max(lo_i, lo_j)
            if ov > 0:
                m[i, j] = ov
    return m

# 240 rows of 7 units vs 84 cells of 20 units; 320 cols of 21 vs 84 of 80.
# The weight matmuls run in float64: every partial sum is an integer below
# 255 * 20 * 80 = 408,000, far under 2**53, so BLAS accumulation is exact
# in any summation order and the result stays bit-identical to integer math.
_ROW_W = _overlap_matrix(_SRC_H, VISUAL_SIZE, 7, 20).T.astype(np.float64)  # (84, 240)
_COL_W = _overlap_matrix(_SRC_W, VISUAL_SIZE, 21, 80).astype(np.float64)   # (320, 84)
_DENOM = 20 * 80


def process_frame(raw: np.ndarray) -> np.ndarray:
    """Area-average a raw 320x240 RGB frame down to 84x84x3 uint8."""
    if raw.shape != (_SRC_H, _SRC_W, 3) or raw.dtype != np.uint8:
        raise BadFrame(f"expected (240, 320, 3) uint8, got {raw.shape} {raw.dtype}")
    # Channel-first contiguous planes keep the matmuls on the BLAS path.
    src = np.ascontiguousarray(raw.transpose(2, 0, 1)).astype(np.float64)
    out = np.empty((VISUAL_SIZE, VISUAL_SIZE, 3), dtype=np.uint8)
    for ch in range(3):
        sums = (_ROW_W @ src[ch] @ _COL_W).astype(np.int64)
        out[:, :, ch] = (2 * sums + _DENOM) // (2 * _DENOM)
    return out


def state_bytes(state) -> bytes:
    """Canonical byte serialization of an encoded state, used for hashing.

    Box states are raw tensor bytes. Composite states concatenate the
    visual tensor, the sound array (empty when none), the clock as a
    big-endian float64 and the score as a big-endian u64.
    """
    import struct

    if isinstance(state, np.ndarray):
        return state.tobytes()
    parts = [state.visual.tobytes()]
    if state.sound is None:
        parts.append(b"")
    else:
        parts.append(np.ascontiguousarray(state.sound, dtype=np.float64).tobytes())
    parts.append(struct.pack(">d", float(state.clock)))
    parts.append(struct.pack(">Q", int(state.score)))
    return b"".join(parts)
