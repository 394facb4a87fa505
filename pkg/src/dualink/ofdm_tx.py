"""Frame assembly: preamble generation, symbol mapping and OFDM modulation.

A frame is 9 identical preamble symbols followed by a configurable number of
data symbols. The transmitted baseband is real-valued: each OFDM symbol's
spectrum is made conjugate-symmetric before the inverse FFT, matching a PLC
line driver and usable unchanged at complex baseband for the wireless link.

FFT scaling convention (fixed project-wide): the transmitter uses the
unnormalized inverse DFT (numpy ifft times fft_size) and the receiver divides
its forward FFT by fft_size, so a unit constellation point comes back with
unit magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fec import ConvCode, conv_encode
from .phy_types import BitSequence, FrequencySymbols, PhyParams, SampleBlock

__all__ = [
    "Preamble",
    "make_preamble",
    "map_symbols",
    "symbols_to_time",
    "assemble_frame",
    "write_frame_dump",
    "read_frame_dump",
]

PREAMBLE_SEED = 0x1901


@dataclass(frozen=True)
class Preamble:
    """One known BPSK symbol repeated identically n_repeats times."""

    freq_symbol: np.ndarray  # complex, one entry per active subcarrier
    n_repeats: int = 9

    def __post_init__(self):
        sym = np.ascontiguousarray(self.freq_symbol, dtype=np.complex128)
        if sym.ndim != 1 or sym.size == 0:
            raise ValueError("freq_symbol must be a non-empty 1-D array")
        if np.any(np.abs(sym) == 0):
            raise ValueError("preamble symbol must have no zero entries")
        sym.flags.writeable = False
        object.__setattr__(self, "freq_symbol", sym)


def make_preamble(params: PhyParams, seed: int = PREAMBLE_SEED) -> Preamble:
    """Fixed pseudo-random BPSK preamble symbol with flat per-subcarrier
    magnitude (serves timing, channel and noise estimation alike)."""
    rng = np.random.default_rng(seed)
    pattern = 1.0 - 2.0 * rng.integers(0, 2, size=params.n_active)
    return Preamble(
        freq_symbol=pattern.astype(np.complex128),
        n_repeats=params.n_preamble_symbols,
    )


def map_symbols(coded_bits, modulation: str, preamble_ref: np.ndarray,
                n_subcarriers: int) -> FrequencySymbols:
    """Map coded bits onto active subcarriers, one bit per subcarrier per
    symbol.

    BPSK: bit 0 -> +1, bit 1 -> -1. DBPSK: per subcarrier, each symbol is the
    previous one times the antipodal bit value, referenced to the last
    preamble symbol.
    """
    bits = np.asarray(getattr(coded_bits, "bits", coded_bits), dtype=np.uint8)
    if bits.size % n_subcarriers:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {n_subcarriers} subcarriers"
        )
    antipodal = (1.0 - 2.0 * bits.astype(np.float64)).reshape(-1, n_subcarriers)
    if modulation == "bpsk":
        symbols = antipodal.astype(np.complex128)
    elif modulation == "dbpsk":
        ref = np.asarray(preamble_ref, dtype=np.complex128)
        if ref.size != n_subcarriers:
            raise ValueError("preamble reference length mismatch")
        symbols = ref[None, :] * np.cumprod(antipodal, axis=0)
    else:
        raise ValueError(f"unknown modulation {modulation!r}")
    return FrequencySymbols(symbols=symbols)


def symbols_to_time(symbols: FrequencySymbols, params: PhyParams) -> np.ndarray:
    """Modulate frequency-domain rows into time-domain OFDM symbols with CP.

    Returns a real-valued flat array of n_symbols * symbol_len samples. The
    spectrum is extended conjugate-symmetrically (bin N-k = conj(bin k)) so
    the unnormalized inverse DFT is real.
    """
    n = params.fft_size
    sc = np.asarray(params.active_subcarriers)
    spectrum = np.zeros((symbols.n_symbols, n), dtype=np.complex128)
    spectrum[:, sc] = symbols.symbols
    spectrum[:, n - sc] = np.conj(symbols.symbols)
    time = np.fft.ifft(spectrum, axis=1) * n
    time = np.concatenate([time[:, -params.cp_len:], time], axis=1)
    return time.reshape(-1)


def assemble_frame(info_bits: BitSequence, params: PhyParams,
                   code: ConvCode = ConvCode()) -> SampleBlock:
    """Complete baseband frame: 9-symbol preamble plus encoded, mapped data
    symbols. Output length is (9 + n_data_symbols) * (fft_size + cp_len)."""
    coded = conv_encode(info_bits, code)
    if coded.size != params.n_coded_bits:
        raise ValueError(
            f"encoded length {coded.size} does not fill {params.n_data_symbols} "
            f"data symbols ({params.n_coded_bits} coded bits)"
        )
    preamble = make_preamble(params)
    data = map_symbols(coded, params.modulation, preamble.freq_symbol, params.n_active)
    rows = np.vstack([
        np.tile(preamble.freq_symbol, (preamble.n_repeats, 1)),
        data.symbols,
    ])
    samples = symbols_to_time(FrequencySymbols(symbols=rows), params)
    return SampleBlock(samples=samples, sample_rate_hz=params.sample_rate_hz)


def write_frame_dump(block: SampleBlock, path) -> None:
    """Dump samples as little-endian float64 pairs (I then Q)."""
    np.ascontiguousarray(block.samples, dtype="<c16").tofile(path)


def read_frame_dump(path, sample_rate_hz: float) -> SampleBlock:
    samples = np.fromfile(path, dtype="<c16")
    return SampleBlock(samples=samples, sample_rate_hz=sample_rate_hz)
