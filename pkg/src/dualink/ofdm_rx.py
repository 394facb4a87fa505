"""Per-link OFDM receiver.

Chain: cross-correlation timing detection (or manual override), CP-stripped
FFT demodulation, least-squares channel estimation over the 9 preamble
symbols, successive-difference noise variance estimation with three averaging
modes, and LLR demapping for BPSK / DBPSK.

LLR convention: positive means bit 0 (antipodal symbol +1) is more likely.
BPSK LLRs are computed in the pre-equalized form 4*Re(Y conj(H))/sigma2,
which is the correctly noise-weighted zero-forcing decision variable;
explicit ZF division is kept for diagnostics (EVM) only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fec import ConvCode
from .ofdm_tx import Preamble, make_preamble, symbols_to_time
from .phy_types import FrequencySymbols, LinkEstimates, LlrVector, PhyParams, SampleBlock

__all__ = [
    "TimingResult",
    "detect_timing",
    "demodulate",
    "split_frame",
    "estimate_channel_ls",
    "estimate_noise",
    "NoiseTracker",
    "demap_llr",
    "equalize_zf",
    "evm",
    "LinkReceiver",
    "ReceiverOutput",
    "NOISE_MODES",
]

NOISE_MODES = ("instantaneous", "avg_time", "avg_time_freq")

DEFAULT_TIMING_ADVANCE = 8  # samples, well inside the 64-sample CP
SIGMA2_CLAMP_REL = 1e-12    # floor relative to mean received power


@dataclass(frozen=True)
class TimingResult:
    detected_offset: int
    applied_offset: int
    correlation_peak: float

    def __post_init__(self):
        if self.applied_offset < 0:
            raise ValueError("applied_offset must be >= 0")


def preamble_template(preamble: Preamble, params: PhyParams) -> np.ndarray:
    """Time-domain samples of one preamble symbol including its CP."""
    one = FrequencySymbols(symbols=preamble.freq_symbol[None, :])
    return symbols_to_time(one, params)


def detect_timing(capture: SampleBlock, preamble: Preamble, params: PhyParams,
                  advance: int = DEFAULT_TIMING_ADVANCE,
                  manual: int | None = None) -> TimingResult:
    """Locate the frame start in a capture.

    With ``manual`` set, the given offset is applied regardless of the signal
    (the low-power fallback) and no correlation is run. Otherwise the offset
    is the argmax of |cross-correlation| between the known preamble symbol
    and the capture, searched over the capture margin, minus the timing
    advance (clamped to 0) so the FFT window lands inside the CP.
    """
    frame_len = params.frame_len
    if manual is not None:
        if manual + frame_len > len(capture):
            raise ValueError("manual offset leaves no room for a full frame")
        return TimingResult(detected_offset=manual, applied_offset=manual,
                            correlation_peak=0.0)

    template = preamble_template(preamble, params)
    if len(capture) < template.size:
        raise ValueError("capture shorter than one preamble symbol")
    max_lag = len(capture) - frame_len
    if max_lag < 0:
        raise ValueError("capture shorter than one frame")
    segment = capture.samples[: max_lag + template.size]
    corr = np.abs(np.correlate(segment, template, mode="valid"))
    detected = int(np.argmax(corr))
    applied = max(detected - advance, 0)
    return TimingResult(detected_offset=detected, applied_offset=applied,
                        correlation_peak=float(corr[detected]))


def demodulate(capture: SampleBlock, timing: TimingResult,
               params: PhyParams) -> FrequencySymbols:
    """Strip CPs, FFT each symbol (divided by fft_size) and extract the
    active subcarriers for all preamble + data symbols."""
    n, cp = params.fft_size, params.cp_len
    start = timing.applied_offset
    end = start + params.frame_len
    if end > len(capture):
        raise ValueError(
            f"FFT window overruns capture: offset {start} + frame {params.frame_len} "
            f"> {len(capture)}"
        )
    frame = capture.samples[start:end].reshape(params.n_frame_symbols, params.symbol_len)
    spectrum = np.fft.fft(frame[:, cp:], axis=1) / n
    sc = np.asarray(params.active_subcarriers)
    return FrequencySymbols(symbols=spectrum[:, sc])


def split_frame(symbols: FrequencySymbols, params: PhyParams):
    """(preamble rows, data rows) views of a demodulated frame."""
    n_pre = params.n_preamble_symbols
    return (FrequencySymbols(symbols=symbols.symbols[:n_pre]),
            FrequencySymbols(symbols=symbols.symbols[n_pre:]))


def estimate_channel_ls(rx_preamble: FrequencySymbols,
                        known_symbol: np.ndarray) -> np.ndarray:
    """Frequency-domain LS channel estimate averaged over the preamble
    symbols: h_hat[k] = mean_i rx[i,k] / known[k]."""
    known = np.asarray(known_symbol, dtype=np.complex128)
    if rx_preamble.n_subcarriers != known.size:
        raise ValueError("preamble subcarrier count mismatch")
    return np.mean(rx_preamble.symbols / known[None, :], axis=0)


def estimate_noise(rx_preamble: FrequencySymbols, mode: str = "avg_time_freq",
                   tracker: "NoiseTracker | None" = None) -> np.ndarray:
    """Per-subcarrier noise variance from successive identical preamble
    symbols: differencing adjacent symbols cancels the signal, and half the
    squared difference magnitude estimates the per-symbol noise variance.

    instantaneous : one symbol pair, per subcarrier.
    avg_time      : mean over all pairs, exponentially averaged across frames
                    when a tracker is supplied.
    avg_time_freq : additionally averaged across subcarriers (flat vector).
    """
    if mode not in NOISE_MODES:
        raise ValueError(f"unknown noise mode {mode!r}")
    rows = rx_preamble.symbols
    if rows.shape[0] < 2:
        raise ValueError("noise estimation needs >= 2 identical preamble symbols")
    pair_estimates = np.abs(np.diff(rows, axis=0)) ** 2 / 2.0

    if mode == "instantaneous":
        return pair_estimates[-1].copy()
    per_sc = pair_estimates.mean(axis=0)
    if mode == "avg_time_freq":
        per_sc = np.full_like(per_sc, per_sc.mean())
    if tracker is not None:
        per_sc = tracker.update(per_sc)
    return per_sc


class NoiseTracker:
    """Single-writer exponential average of noise estimates across frames."""

    def __init__(self, alpha: float = 0.1):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha = alpha
        self._state: np.ndarray | None = None

    def update(self, estimate: np.ndarray) -> np.ndarray:
        if self._state is None:
            self._state = estimate.astype(np.float64)
        else:
            self._state = self.alpha * estimate + (1.0 - self.alpha) * self._state
        return self._state.copy()

    def reset(self) -> None:
        self._state = None


def build_estimates(h_hat: np.ndarray, sigma2_per_sc: np.ndarray,
                    code_rate: float) -> LinkEstimates:
    sigma2_scalar = float(np.mean(sigma2_per_sc))
    snr = float(np.mean(np.abs(h_hat) ** 2)) / max(sigma2_scalar, 1e-300)
    ebn0_lin = snr / code_rate
    return LinkEstimates(
        h_hat=h_hat,
        sigma2_per_sc=sigma2_per_sc,
        sigma2_scalar=sigma2_scalar,
        ebn0_est_db=10.0 * np.log10(max(ebn0_lin, 1e-300)),
    )


def _clamped_sigma2(sigma2_per_sc: np.ndarray, rx_power: float) -> np.ndarray:
    floor = SIGMA2_CLAMP_REL * max(rx_power, 1e-300)
    return np.maximum(sigma2_per_sc, floor)


def demap_llr(rx_data: FrequencySymbols, est: LinkEstimates, modulation: str,
              ref_symbols: np.ndarray | None = None) -> np.ndarray:
    """Per-coded-bit LLRs, row-major over [symbol, subcarrier].

    BPSK: 4*Re(Y conj(H))/sigma2 per subcarrier (Gaussian LL difference).
    DBPSK: 2*Re(Y_n conj(Y_{n-1}))/sigma2 referenced to the received last
    preamble symbol, scaled by 2*SNR/(2*SNR + 1). The differential product
    carries a noise-by-noise term of variance sigma2^2/2 on top of the usual
    2*|H|^2*sigma2, so the Gaussian LL weight is |H|^2/(|H|^2*sigma2 +
    sigma2^2/2); without the correction a near-dead branch gets grossly
    overconfident LLRs and drags down a diversity sum. The scale uses the
    subcarrier-mean SNR (the channels are flat), so single-link hard
    decisions are unchanged.
    """
    y = rx_data.symbols
    if est.sigma2_per_sc.size != rx_data.n_subcarriers:
        raise ValueError("estimate dimensions do not match data symbols")
    sigma2 = _clamped_sigma2(est.sigma2_per_sc, float(np.mean(np.abs(y) ** 2)))
    if modulation == "bpsk":
        llr = 4.0 * np.real(y * np.conj(est.h_hat)[None, :]) / sigma2[None, :]
    elif modulation == "dbpsk":
        if ref_symbols is None:
            raise ValueError("DBPSK demapping needs the received reference symbol")
        prev = np.vstack([np.asarray(ref_symbols, dtype=np.complex128)[None, :], y[:-1]])
        snr = float(np.mean(np.abs(est.h_hat) ** 2)) / float(np.mean(sigma2))
        weight = 2.0 * snr / (2.0 * snr + 1.0)
        llr = weight * 2.0 * np.real(y * np.conj(prev)) / sigma2[None, :]
    else:
        raise ValueError(f"unknown modulation {modulation!r}")
    return llr.reshape(-1)


def equalize_zf(rx: FrequencySymbols, h_hat: np.ndarray) -> FrequencySymbols:
    """Zero-forcing equalization, for diagnostics (EVM) only."""
    h = np.asarray(h_hat, dtype=np.complex128)
    mag2 = np.abs(h) ** 2
    safe = np.where(mag2 > 0, h, 1.0)
    return FrequencySymbols(symbols=rx.symbols / safe[None, :])


def evm(equalized: FrequencySymbols, reference: np.ndarray | None = None) -> float:
    """RMS error magnitude relative to RMS reference magnitude. Without a
    reference the nearest BPSK decision is used."""
    eq = equalized.symbols
    ref = np.sign(np.real(eq)) if reference is None else reference
    err = np.mean(np.abs(eq - ref) ** 2)
    return float(np.sqrt(err / max(np.mean(np.abs(ref) ** 2), 1e-300)))


@dataclass(frozen=True)
class ReceiverOutput:
    llr: LlrVector                 # estimated-knowledge LLRs
    estimates: LinkEstimates
    timing: TimingResult
    rx_data: FrequencySymbols      # for re-demapping under other knowledge
    ref_symbols: np.ndarray        # received last preamble symbol (DBPSK ref)


class LinkReceiver:
    """One link's receiver pipeline with per-link noise-averaging state.

    Instances share nothing mutable: each link owns one receiver, and only
    that link's pipeline updates the exponential noise average.
    """

    def __init__(self, params: PhyParams, code: ConvCode = ConvCode(),
                 noise_mode: str = "avg_time_freq",
                 advance: int = DEFAULT_TIMING_ADVANCE,
                 alpha: float = 0.1,
                 manual_timing: int | None = None,
                 diagnostics_path=None):
        self.params = params
        self.code = code
        self.noise_mode = noise_mode
        self.advance = advance
        self.manual_timing = manual_timing
        self.preamble = make_preamble(params)
        self.tracker = NoiseTracker(alpha) if noise_mode != "instantaneous" else None
        self._diag = None
        if diagnostics_path is not None:
            self._diag_fh = open(diagnostics_path, "w", newline="")
            self._diag = csv.writer(self._diag_fh)
            self._diag.writerow(["frame_index", "detected_offset", "ebn0_est_db", "evm"])

    def process(self, capture: SampleBlock, frame_index: int = 0,
                digest: int = 0) -> ReceiverOutput:
        timing = detect_timing(capture, self.preamble, self.params,
                               advance=self.advance, manual=self.manual_timing)
        symbols = demodulate(capture, timing, self.params)
        rx_pre, rx_data = split_frame(symbols, self.params)
        h_hat = estimate_channel_ls(rx_pre, self.preamble.freq_symbol)
        sigma2 = estimate_noise(rx_pre, self.noise_mode, self.tracker)
        est = build_estimates(h_hat, sigma2, float(self.code.rate))
        ref = rx_pre.symbols[-1]
        llrs = demap_llr(rx_data, est, self.params.modulation, ref_symbols=ref)
        if self._diag is not None:
            self._diag.writerow([
                frame_index, timing.detected_offset,
                f"{est.ebn0_est_db:.3f}",
                f"{evm(equalize_zf(rx_data, h_hat)):.5f}",
            ])
        return ReceiverOutput(
            llr=LlrVector(llrs=llrs, frame_index=frame_index, payload_digest=digest),
            estimates=est,
            timing=timing,
            rx_data=rx_data,
            ref_symbols=ref,
        )

    def close(self) -> None:
        if self._diag is not None:
            self._diag_fh.close()
            self._diag = None
