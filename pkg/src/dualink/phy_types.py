"""Shared PHY domain types, transceiver constants and seeded bit generation.

The default numerology is a 400 kHz / 256-point OFDM baseband with 36 active
subcarriers (indices 23..58) spanning the CENELEC A band, a 64-sample cyclic
prefix and a 9-symbol preamble. All types are immutable after construction so
they can be shared freely between the two link pipelines.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

__all__ = [
    "ConfigError",
    "PhyParams",
    "BitSequence",
    "SampleBlock",
    "FrequencySymbols",
    "LinkEstimates",
    "LlrVector",
    "BerRecord",
    "generate_bits",
    "derive_params",
    "load_params",
    "payload_digest",
    "params_hash",
]


class ConfigError(ValueError):
    """Raised when a parameter set violates one of its invariants."""


def _default_active_subcarriers() -> tuple[int, ...]:
    # 35.9375 kHz / 1.5625 kHz = 23, 90.625 kHz / 1.5625 kHz = 58
    return tuple(range(23, 59))


@dataclass(frozen=True)
class PhyParams:
    """Baseband transceiver constants shared by both links."""

    sample_rate_hz: float = 400_000.0
    fft_size: int = 256
    cp_len: int = 64
    n_preamble_symbols: int = 9
    active_subcarriers: tuple[int, ...] = field(
        default_factory=_default_active_subcarriers
    )
    n_data_symbols: int = 12
    modulation: str = "bpsk"
    code_rate: Fraction = Fraction(1, 2)
    frame_period_s: float = 0.4

    # --- derived quantities ---

    @property
    def n_active(self) -> int:
        return len(self.active_subcarriers)

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    @property
    def n_frame_symbols(self) -> int:
        return self.n_preamble_symbols + self.n_data_symbols

    @property
    def frame_len(self) -> int:
        return self.n_frame_symbols * self.symbol_len

    @property
    def n_coded_bits(self) -> int:
        """Coded bits carried per frame: one bit per active subcarrier per
        data symbol for (D)BPSK."""
        return self.n_data_symbols * self.n_active

    def validate(self) -> None:
        if self.fft_size <= 0:
            raise ConfigError(f"fft_size must be positive, got {self.fft_size}")
        if not 0 <= self.cp_len < self.fft_size:
            raise ConfigError(
                f"cp_len must satisfy 0 <= cp_len < fft_size, got {self.cp_len}"
            )
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.n_preamble_symbols < 2:
            raise ConfigError(
                "n_preamble_symbols must be >= 2 (noise estimation needs "
                f"successive identical symbols), got {self.n_preamble_symbols}"
            )
        if self.n_data_symbols <= 0:
            raise ConfigError(f"n_data_symbols must be positive, got {self.n_data_symbols}")
        if not self.active_subcarriers:
            raise ConfigError("active_subcarriers must be non-empty")
        sc = np.asarray(self.active_subcarriers)
        if sc.min() < 1 or sc.max() > self.fft_size // 2 - 1:
            raise ConfigError(
                "active_subcarriers must lie in [1, fft_size/2 - 1] "
                f"(got range {sc.min()}..{sc.max()})"
            )
        if len(set(self.active_subcarriers)) != len(self.active_subcarriers):
            raise ConfigError("active_subcarriers contains duplicates")
        if self.modulation not in ("bpsk", "dbpsk"):
            raise ConfigError(f"modulation must be 'bpsk' or 'dbpsk', got {self.modulation!r}")
        if not 0 < self.code_rate <= 1:
            raise ConfigError(f"code_rate must lie in (0, 1], got {self.code_rate}")
        if self.frame_period_s <= 0:
            raise ConfigError(f"frame_period_s must be positive, got {self.frame_period_s}")
        if self.frame_len / self.sample_rate_hz >= self.frame_period_s:
            raise ConfigError(
                f"n_data_symbols={self.n_data_symbols} makes the frame longer "
                f"than frame_period_s={self.frame_period_s}"
            )


def derive_params(base: PhyParams) -> PhyParams:
    """Validate a parameter set and return it with derived fields available.

    Idempotent: derived quantities are computed properties, so validating an
    already-validated set returns an equal object.
    """
    if isinstance(base.active_subcarriers, list):
        base = replace(base, active_subcarriers=tuple(base.active_subcarriers))
    base.validate()
    return base


_PARSED_FIELDS = {
    "sample_rate_hz": float,
    "fft_size": int,
    "cp_len": int,
    "n_preamble_symbols": int,
    "n_data_symbols": int,
    "modulation": str,
    "frame_period_s": float,
}


def _parse_subcarriers(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def load_params(path) -> PhyParams:
    """Load PhyParams from a plain ``key = value`` config file.

    Blank lines and ``#`` comments are ignored; unknown keys are rejected.
    """
    overrides: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in _PARSED_FIELDS:
                overrides[key] = _PARSED_FIELDS[key](value)
            elif key == "active_subcarriers":
                overrides[key] = _parse_subcarriers(value)
            elif key == "code_rate":
                overrides[key] = Fraction(value.replace(" ", ""))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return derive_params(PhyParams(**overrides))


def params_hash(params: PhyParams) -> str:
    """Short stable digest of a parameter set, for result-file headers."""
    text = ",".join(f"{f.name}={getattr(params, f.name)!r}" for f in fields(params))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class BitSequence:
    """A seeded pseudo-random (or otherwise known) bit sequence."""

    bits: np.ndarray
    seed: int = -1

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size == 0:
            raise ValueError("bits must be a non-empty 1-D array")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return self.bits.size


def generate_bits(seed: int, n_bits: int) -> BitSequence:
    """Deterministic pseudo-random bit sequence from a 64-bit-state generator."""
    if n_bits <= 0:
        raise ValueError(f"n_bits must be positive, got {n_bits}")
    rng = np.random.default_rng(seed)
    return BitSequence(bits=rng.integers(0, 2, size=n_bits, dtype=np.uint8), seed=seed)


def payload_digest(bits: np.ndarray) -> int:
    """Opaque identifier of a transmitted bit sequence (frame-match check)."""
    return zlib.crc32(np.ascontiguousarray(bits, dtype=np.uint8).tobytes())


@dataclass(frozen=True)
class SampleBlock:
    """Time-domain complex baseband samples."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class FrequencySymbols:
    """Matrix of per-subcarrier symbols, one row per OFDM symbol."""

    symbols: np.ndarray  # [n_symbols, n_active_subcarriers]

    def __post_init__(self):
        symbols = np.ascontiguousarray(self.symbols, dtype=np.complex128)
        if symbols.ndim != 2:
            raise ValueError("symbols must be a 2-D matrix")
        symbols.flags.writeable = False
        object.__setattr__(self, "symbols", symbols)

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.symbols.shape[1]


@dataclass(frozen=True)
class LinkEstimates:
    """Per-frame channel gain and noise variance knowledge for one link.

    Either true values (perfect knowledge) or receiver estimates.
    """

    h_hat: np.ndarray          # complex, per active subcarrier
    sigma2_per_sc: np.ndarray  # real >= 0, per active subcarrier
    sigma2_scalar: float       # time/frequency-averaged
    ebn0_est_db: float

    def __post_init__(self):
        h = np.ascontiguousarray(self.h_hat, dtype=np.complex128)
        s = np.ascontiguousarray(self.sigma2_per_sc, dtype=np.float64)
        if h.shape != s.shape or h.ndim != 1:
            raise ValueError("h_hat and sigma2_per_sc must be 1-D with equal length")
        if np.any(s < 0) or self.sigma2_scalar < 0:
            raise ValueError("noise variances must be >= 0")
        h.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "h_hat", h)
        object.__setattr__(self, "sigma2_per_sc", s)


@dataclass(frozen=True)
class LlrVector:
    """Per-coded-bit log-likelihood ratios for one frame on one link.

    Convention fixed project-wide: positive LLR means bit 0 is more likely.
    """

    llrs: np.ndarray
    frame_index: int = 0
    payload_digest: int = 0

    def __post_init__(self):
        llrs = np.ascontiguousarray(self.llrs, dtype=np.float64)
        if llrs.ndim != 1:
            raise ValueError("llrs must be 1-D")
        llrs.flags.writeable = False
        object.__setattr__(self, "llrs", llrs)

    def __len__(self) -> int:
        return self.llrs.size


@dataclass(frozen=True)
class BerRecord:
    """One Monte-Carlo result row."""

    scenario: str
    modulation: str
    knowledge: str          # "perfect" | "estimated"
    ebn0_plc_db: float | None
    ebn0_wireless_db: float | None
    link: str               # "plc" | "wireless" | "combined"
    bits_total: int
    bit_errors: int
    ber: float
    seed: int

    def __post_init__(self):
        if self.bits_total <= 0:
            raise ValueError("bits_total must be positive")
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber out of range: {self.ber}")
        expected = self.bit_errors / self.bits_total
        if abs(self.ber - expected) > 1e-12:
            raise ValueError("ber must equal bit_errors / bits_total")
