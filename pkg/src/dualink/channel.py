"""Link emulation: flat complex gain, integer sample delay, AWGN, link-down.

Both links use the same model (narrowband channel, Gaussian noise); they
differ only in their configuration and noise seed. Noise generation is
reproducible per seed and independent across links when distinct seeds are
used.

Eb/N0 accounting (fixed project-wide): Eb is energy per information bit
measured on active subcarriers after the receiver FFT, excluding cyclic
prefix and preamble overhead. With the project FFT scaling (rx FFT divided
by fft_size) the post-FFT per-subcarrier SNR at a given Eb/N0 is
(Eb/N0)_linear * code_rate for one coded bit per subcarrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fec import ConvCode
from .phy_types import PhyParams, SampleBlock

__all__ = [
    "ChannelConfig",
    "ebn0_to_noise_sigma2",
    "noise_floor_sigma2",
    "apply_channel",
]

DOWN = None  # sentinel for ebn0_db: transmitter silent, receiver sees noise only


@dataclass(frozen=True)
class ChannelConfig:
    """One link's channel. ``ebn0_db=None`` means the link is down."""

    gain: complex = 1.0 + 0.0j
    delay_samples: int = 0
    ebn0_db: float | None = 10.0
    capture_margin: int = 96
    freq_response: np.ndarray | None = None  # optional per-bin gain, len fft_size

    def __post_init__(self):
        if self.delay_samples < 0:
            raise ValueError("delay_samples must be >= 0")
        if self.capture_margin < 0:
            raise ValueError("capture_margin must be >= 0")
        if self.freq_response is not None:
            fr = np.ascontiguousarray(self.freq_response, dtype=np.complex128)
            fr.flags.writeable = False
            object.__setattr__(self, "freq_response", fr)

    @property
    def is_down(self) -> bool:
        return self.ebn0_db is None


def ebn0_to_noise_sigma2(ebn0_db: float, params: PhyParams,
                         code: ConvCode = ConvCode()) -> float:
    """Time-domain complex-noise variance for a target per-information-bit
    Eb/N0, assuming unit-magnitude channel gain.

    Post-FFT per-subcarrier noise variance is sigma2 / fft_size, so a unit
    constellation point sees SNR = ebn0_linear * code_rate there.
    """
    ebn0_lin = 10.0 ** (ebn0_db / 10.0)
    sigma2_sc = 1.0 / (ebn0_lin * float(code.rate))
    return params.fft_size * sigma2_sc


def noise_floor_sigma2(params: PhyParams, code: ConvCode = ConvCode()) -> float:
    """Nominal receiver noise floor used in link-down mode (0 dB Eb/N0)."""
    return ebn0_to_noise_sigma2(0.0, params, code)


def apply_channel(tx: SampleBlock, cfg: ChannelConfig, noise_seed: int,
                  params: PhyParams, code: ConvCode = ConvCode()) -> SampleBlock:
    """Produce the receiver capture for one frame.

    Capture length is frame length + capture_margin. The transmitted signal
    is scaled by the flat gain (or filtered by the optional per-bin frequency
    response), shifted by the integer delay, and circular complex Gaussian
    noise is added everywhere. In down mode the capture is noise only, at the
    nominal noise floor.
    """
    frame_len = len(tx)
    capture_len = frame_len + cfg.capture_margin
    if cfg.delay_samples + frame_len > capture_len:
        raise ValueError(
            f"delay {cfg.delay_samples} exceeds capture margin {cfg.capture_margin}"
        )

    if cfg.is_down:
        sigma2 = noise_floor_sigma2(params, code)
    else:
        sigma2 = ebn0_to_noise_sigma2(cfg.ebn0_db, params, code)

    rng = np.random.default_rng(noise_seed)
    scale = np.sqrt(sigma2 / 2.0)
    capture = scale * (
        rng.standard_normal(capture_len) + 1j * rng.standard_normal(capture_len)
    )

    if not cfg.is_down:
        signal = tx.samples
        if cfg.freq_response is not None:
            impulse = np.fft.ifft(cfg.freq_response)
            # truncated to the CP length: the prefix absorbs this delay spread
            signal = np.convolve(signal, impulse[: params.cp_len])[:frame_len]
        capture[cfg.delay_samples : cfg.delay_samples + frame_len] += cfg.gain * signal

    return SampleBlock(samples=capture, sample_rate_hz=tx.sample_rate_hz)
