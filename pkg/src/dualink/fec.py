"""Convolutional encoding and soft-input Viterbi decoding.

Default code is the rate-1/2, K=7, (171, 133) octal code with zero-tail
termination. The decoder's branch metric is the correlation of the LLRs with
the antipodal code symbols, so decisions are invariant to positive scaling of
the whole LLR vector.

The Viterbi inner loop runs in a compiled extension when available; a pure
numpy kernel is the fallback, selected once at import.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .phy_types import LlrVector

try:
    from . import _viterbi_c as _kernel
except ImportError:  # extension not built; numpy fallback
    from . import _viterbi_py as _kernel

__all__ = ["ConvCode", "conv_encode", "viterbi_decode", "viterbi_backend"]


def viterbi_backend() -> str:
    """Which Viterbi kernel is active: ``"cython"`` or ``"python"``."""
    return _kernel.BACKEND


@dataclass(frozen=True)
class ConvCode:
    constraint_length: int = 7
    generators: tuple[int, ...] = (0o171, 0o133)
    rate: Fraction = Fraction(1, 2)
    termination: str = "zero_tail"

    def __post_init__(self):
        if not self.generators:
            raise ValueError("generators must be non-empty")
        for g in self.generators:
            if g <= 0 or g >= 1 << self.constraint_length:
                raise ValueError(
                    f"generator {g:o} (octal) does not fit in {self.constraint_length} bits"
                )
        if self.rate != Fraction(1, len(self.generators)):
            raise ValueError("rate must equal 1/len(generators)")
        if self.termination != "zero_tail":
            raise ValueError(f"unsupported termination {self.termination!r}")

    @property
    def n_tail_bits(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_length - 1)

    def n_coded_bits(self, n_info_bits: int) -> int:
        return (n_info_bits + self.n_tail_bits) * len(self.generators)

    def n_info_bits(self, n_coded_bits: int) -> int:
        n, rem = divmod(n_coded_bits, len(self.generators))
        if rem or n <= self.n_tail_bits:
            raise ValueError(f"coded length {n_coded_bits} does not fit the code")
        return n - self.n_tail_bits


def _taps(code: ConvCode) -> np.ndarray:
    """Generator taps, MSB (current input) first; shape [n_gen, K]."""
    K = code.constraint_length
    return np.array(
        [[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in code.generators],
        dtype=np.uint8,
    )


def conv_encode(bits, code: ConvCode = ConvCode()) -> np.ndarray:
    """Encode with zero-tail termination; starts and ends in the zero state.

    Output length is (n_info + K - 1) * n_generators, generator outputs
    interleaved per input bit.
    """
    u = np.asarray(getattr(bits, "bits", bits), dtype=np.uint8)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("input bits must be a non-empty 1-D sequence")
    taps = _taps(code)
    n_out = u.size + code.n_tail_bits
    coded = np.empty((n_out, len(code.generators)), dtype=np.uint8)
    for i, row in enumerate(taps):
        # full convolution over GF(2) includes the zero-tail flush
        coded[:, i] = np.convolve(u, row)[:n_out] % 2
    return coded.reshape(-1)


@lru_cache(maxsize=8)
def _trellis(code: ConvCode):
    """Predecessor tables for the ACS kernel.

    State holds the previous K-1 input bits, newest at the top bit, so the
    decoded input of a step is the top bit of the state entered.
    """
    K = code.constraint_length
    n_states = code.n_states
    shift = K - 2
    taps_mask = np.array(code.generators, dtype=np.int64)

    pred_state = np.empty((n_states, 2), dtype=np.int32)
    pred_sign = np.empty((n_states, 2, 2), dtype=np.float64)
    for d in range(n_states):
        b_in = d >> shift
        low = d & ((1 << shift) - 1)
        for j in range(2):
            s = (low << 1) | j
            pred_state[d, j] = s
            reg = (b_in << (K - 1)) | s
            for i, g in enumerate(taps_mask):
                out_bit = bin(reg & int(g)).count("1") & 1
                pred_sign[d, j, i] = 1.0 - 2.0 * out_bit
    return pred_state, pred_sign, shift


def viterbi_decode(llrs, code: ConvCode = ConvCode()) -> np.ndarray:
    """Maximum-likelihood information bits from per-coded-bit LLRs.

    Positive LLR means coded bit 0 (antipodal symbol +1). Tail bits are
    stripped from the output.
    """
    raw = llrs.llrs if isinstance(llrs, LlrVector) else np.asarray(llrs, dtype=np.float64)
    n_gen = len(code.generators)
    if n_gen != 2:
        raise NotImplementedError("kernel supports rate-1/2 codes only")
    if raw.ndim != 1 or raw.size % n_gen:
        raise ValueError(f"LLR count {raw.size} not divisible by {n_gen}")
    T = raw.size // n_gen
    if T <= code.n_tail_bits:
        raise ValueError("LLR vector too short for the zero-tail")
    pred_state, pred_sign, shift = _trellis(code)
    bits = _kernel.viterbi_rate2(raw.reshape(T, 2), pred_state, pred_sign, shift)
    return np.asarray(bits[: T - code.n_tail_bits], dtype=np.uint8)
