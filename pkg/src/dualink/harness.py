"""Scenario orchestration and Monte-Carlo BER sweeps.

Scenarios: one link down, equal-Eb/N0 sweep, fixed-wireless-Eb/N0 sweep, or
a custom grid, each evaluated under perfect and/or estimated channel and
noise knowledge. Every point owns independently seeded payload and noise
streams derived from the master seed, so reruns are byte-identical
regardless of worker-pool scheduling.

Per frame the pipeline is: payload bits -> encode -> OFDM frame -> both
channels -> both receivers -> LLR demap (both knowledge modes from the same
capture, i.e. common random numbers) -> decode PLC / wireless / combined
lanes and accumulate errors.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .channel import ChannelConfig, apply_channel, ebn0_to_noise_sigma2, noise_floor_sigma2
from .combiner import COMBINERS
from .fec import ConvCode, viterbi_decode
from .ofdm_rx import LinkReceiver, build_estimates, demap_llr, demodulate, \
    estimate_channel_ls, split_frame
from .ofdm_tx import assemble_frame
from .phy_types import BerRecord, ConfigError, LlrVector, PhyParams, derive_params, \
    generate_bits, params_hash, payload_digest

__all__ = [
    "ScenarioConfig",
    "SCENARIOS",
    "LINKS",
    "build_grid",
    "run_point",
    "run_scenario",
    "write_csv",
    "read_results",
    "ebn0_at_ber",
]

SCENARIOS = ("link_down", "equal_sweep", "fixed_wireless_sweep", "custom")
LINKS = ("plc", "wireless", "combined")
KNOWLEDGE_MODES = ("perfect", "estimated")

# Arbitrary fixed unit-magnitude gains; distinct phases on the two links
# exercise the phase handling without changing any Eb/N0.
PLC_GAIN = np.exp(0.4j)
WIRELESS_GAIN = np.exp(-1.1j)
PLC_DELAY = 12
WIRELESS_DELAY = 20


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "equal_sweep"
    modulation: str = "bpsk"
    # "down" marks a silent link; a scalar wireless value is held fixed
    ebn0_plc_db: tuple[float, ...] | str = tuple(range(-6, 9))
    ebn0_wireless_db: tuple[float, ...] | float | str = ()
    knowledge: tuple[str, ...] = KNOWLEDGE_MODES
    min_bits: int = 100_000
    min_errors: int = 100
    max_bits: int = 10_000_000
    seed: int = 0
    n_data_symbols: int = 12
    realtime_pacing: bool = False
    noise_mode: str = "avg_time_freq"
    combining: str = "mrc"
    workers: int = 1

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.modulation not in ("bpsk", "dbpsk"):
            raise ConfigError(f"unknown modulation {self.modulation!r}")
        if self.min_bits < 10_000:
            raise ConfigError("min_bits must be >= 10000")
        if self.min_errors < 0:
            raise ConfigError("min_errors must be >= 0")
        if self.max_bits < self.min_bits:
            raise ConfigError("max_bits must be >= min_bits")
        if not self.knowledge or any(k not in KNOWLEDGE_MODES for k in self.knowledge):
            raise ConfigError(f"knowledge must be a subset of {KNOWLEDGE_MODES}")
        if self.combining not in COMBINERS:
            raise ConfigError(f"unknown combining scheme {self.combining!r}")
        if isinstance(self.ebn0_plc_db, str) and self.ebn0_plc_db != "down":
            raise ConfigError(f"bad ebn0_plc_db {self.ebn0_plc_db!r}")
        for side in ("ebn0_plc_db", "ebn0_wireless_db"):
            value = getattr(self, side)
            if isinstance(value, tuple) and self.scenario != "link_down" \
                    and side == "ebn0_plc_db" and not value:
                raise ConfigError("sweep list must be non-empty")

    def phy_params(self) -> PhyParams:
        return derive_params(PhyParams(n_data_symbols=self.n_data_symbols,
                                       modulation=self.modulation))


def build_grid(cfg: ScenarioConfig) -> list[tuple[float | None, float | None]]:
    """(ebn0_plc, ebn0_wireless) pairs of the sweep; None marks a down link."""
    cfg.validate()
    plc, wrl = cfg.ebn0_plc_db, cfg.ebn0_wireless_db
    if cfg.scenario == "equal_sweep":
        return [(e, e) for e in plc]
    if cfg.scenario == "fixed_wireless_sweep":
        if not isinstance(wrl, (int, float)):
            raise ConfigError("fixed_wireless_sweep needs a scalar wireless Eb/N0")
        return [(e, float(wrl)) for e in plc]
    if cfg.scenario == "link_down":
        if wrl == "down":
            return [(e, None) for e in plc]
        if plc == "down":
            if isinstance(wrl, (int, float)):
                wrl = (float(wrl),)
            return [(None, w) for w in wrl]
        raise ConfigError("link_down needs exactly one side set to 'down'")
    # custom: cross product, allowing scalar / down on either side
    def as_list(v):
        if v == "down":
            return [None]
        if isinstance(v, (int, float)):
            return [float(v)]
        return list(v)
    return [(p, w) for p in as_list(plc) for w in as_list(wrl)]


def _perfect_estimates(params: PhyParams, code: ConvCode, chan: ChannelConfig,
                       receiver: LinkReceiver):
    """True per-subcarrier gain and noise variance for a link.

    The gain (including the residual timing-offset phase ramp of the applied
    FFT window) is measured from one noise-free pass through the channel and
    receiver, which is exact to machine precision. Also returns the timing
    offset to freeze into the receiver (manual correction, as used at low
    transmit power).
    """
    n_sc = params.n_active
    if chan.is_down:
        sigma2_sc = noise_floor_sigma2(params, code) / params.fft_size
        return build_estimates(np.zeros(n_sc, dtype=np.complex128),
                               np.full(n_sc, sigma2_sc), float(code.rate)), 0
    probe_bits = generate_bits(0xCA1, code.n_info_bits(params.n_coded_bits))
    tx = assemble_frame(probe_bits, params, code)
    quiet = replace(chan, ebn0_db=300.0)  # negligible noise, timing exact
    capture = apply_channel(tx, quiet, noise_seed=0, params=params, code=code)
    out = receiver.process(capture)
    symbols = demodulate(capture, out.timing, params)
    rx_pre, _ = split_frame(symbols, params)
    h_true = estimate_channel_ls(rx_pre, receiver.preamble.freq_symbol)
    sigma2_sc = ebn0_to_noise_sigma2(chan.ebn0_db, params, code) / params.fft_size
    est = build_estimates(h_true, np.full(n_sc, sigma2_sc), float(code.rate))
    return est, out.timing.applied_offset


@dataclass
class _LaneCounter:
    errors: dict = field(default_factory=dict)  # (knowledge, link) -> int
    bits: int = 0


def run_point(cfg: ScenarioConfig, ebn0_pair: tuple[float | None, float | None],
              point_index: int = 0) -> list[BerRecord]:
    """Simulate one sweep point until the stopping rule is met.

    Runs frames until bits >= min_bits and every lane has either reached
    min_errors or stayed error-free, capped at max_bits. Returns one record
    per (knowledge, link) lane; all lanes share the same frames.
    """
    cfg.validate()
    ebn0_plc, ebn0_wrl = ebn0_pair
    params = cfg.phy_params()
    code = ConvCode()
    n_info = code.n_info_bits(params.n_coded_bits)
    combine = COMBINERS[cfg.combining]

    chan_p = ChannelConfig(gain=PLC_GAIN, delay_samples=PLC_DELAY, ebn0_db=ebn0_plc)
    chan_w = ChannelConfig(gain=WIRELESS_GAIN, delay_samples=WIRELESS_DELAY,
                           ebn0_db=ebn0_wrl)

    rx_p = LinkReceiver(params, code, noise_mode=cfg.noise_mode)
    rx_w = LinkReceiver(params, code, noise_mode=cfg.noise_mode)
    perfect_p, offset_p = _perfect_estimates(params, code, chan_p, rx_p)
    perfect_w, offset_w = _perfect_estimates(params, code, chan_w, rx_w)
    # Timing is calibrated once at high power, then frozen (manual
    # correction), so low-Eb/N0 frames keep a stable FFT window.
    rx_p.manual_timing = offset_p
    rx_w.manual_timing = offset_w
    rx_p.tracker and rx_p.tracker.reset()
    rx_w.tracker and rx_w.tracker.reset()

    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(point_index,))
    payload_rng, noise_rng_p, noise_rng_w = (
        np.random.default_rng(child) for child in ss.spawn(3)
    )

    counter = _LaneCounter(errors={(k, l): 0 for k in cfg.knowledge for l in LINKS})
    frame_index = 0
    while True:
        t0 = time.monotonic()
        seed = int(payload_rng.integers(0, 2**63))
        info = generate_bits(seed, n_info)
        digest = payload_digest(info.bits)
        tx = assemble_frame(info, params, code)
        cap_p = apply_channel(tx, chan_p, int(noise_rng_p.integers(0, 2**63)),
                              params, code)
        cap_w = apply_channel(tx, chan_w, int(noise_rng_w.integers(0, 2**63)),
                              params, code)
        out_p = rx_p.process(cap_p, frame_index, digest)
        out_w = rx_w.process(cap_w, frame_index, digest)

        for knowledge in cfg.knowledge:
            if knowledge == "estimated":
                llr_p, llr_w = out_p.llr, out_w.llr
            else:
                llr_p = LlrVector(
                    llrs=demap_llr(out_p.rx_data, perfect_p, cfg.modulation,
                                   ref_symbols=out_p.ref_symbols),
                    frame_index=frame_index, payload_digest=digest)
                llr_w = LlrVector(
                    llrs=demap_llr(out_w.rx_data, perfect_w, cfg.modulation,
                                   ref_symbols=out_w.ref_symbols),
                    frame_index=frame_index, payload_digest=digest)
            decoded = {
                "plc": viterbi_decode(llr_p, code),
                "wireless": viterbi_decode(llr_w, code),
                "combined": viterbi_decode(combine(llr_p, llr_w), code),
            }
            for link, bits in decoded.items():
                counter.errors[(knowledge, link)] += int(np.sum(bits != info.bits))

        counter.bits += n_info
        frame_index += 1
        if cfg.realtime_pacing:
            time.sleep(max(0.0, params.frame_period_s - (time.monotonic() - t0)))
        if counter.bits >= cfg.max_bits:
            break
        if counter.bits >= cfg.min_bits and all(
            e == 0 or e >= cfg.min_errors for e in counter.errors.values()
        ):
            break

    return [
        BerRecord(
            scenario=cfg.scenario, modulation=cfg.modulation, knowledge=knowledge,
            ebn0_plc_db=ebn0_plc, ebn0_wireless_db=ebn0_wrl, link=link,
            bits_total=counter.bits, bit_errors=counter.errors[(knowledge, link)],
            ber=counter.errors[(knowledge, link)] / counter.bits, seed=cfg.seed,
        )
        for knowledge in cfg.knowledge
        for link in LINKS
    ]


def _point_task(args):
    cfg, pair, index = args
    return run_point(cfg, pair, index)


def run_scenario(cfg: ScenarioConfig, out_path=None) -> list[BerRecord]:
    """Run every point of the sweep grid; optionally write the CSV results.

    Result rows are ordered by grid position regardless of worker completion
    order, so a rerun with the same seed is byte-identical.
    """
    grid = build_grid(cfg)
    tasks = [(cfg, pair, i) for i, pair in enumerate(grid)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_point = list(pool.map(_point_task, tasks))
    else:
        per_point = [_point_task(t) for t in tasks]
    records = [rec for point in per_point for rec in point]
    if out_path is not None:
        write_csv(records, cfg, out_path)
    return records


def _fmt_ebn0(value: float | None) -> str:
    return "down" if value is None else f"{value:g}"


CSV_COLUMNS = ["scenario", "modulation", "knowledge", "ebn0_plc_db",
               "ebn0_wireless_db", "link", "bits_total", "bit_errors", "ber", "seed"]


def write_csv(records: list[BerRecord], cfg: ScenarioConfig, path) -> None:
    params = cfg.phy_params()
    with open(path, "w", newline="") as fh:
        fh.write(f"# dualink {__version__}\n")
        fh.write(f"# params {params_hash(params)}\n")
        fh.write(f"# seed {cfg.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.scenario, r.modulation, r.knowledge,
                _fmt_ebn0(r.ebn0_plc_db), _fmt_ebn0(r.ebn0_wireless_db),
                r.link, r.bits_total, r.bit_errors, f"{r.ber:.10g}", r.seed,
            ])


def read_results(path) -> list[dict]:
    """Parse a results CSV back into dicts (numbers converted)."""
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            for key in ("ebn0_plc_db", "ebn0_wireless_db"):
                row[key] = None if row[key] == "down" else float(row[key])
            row["bits_total"] = int(row["bits_total"])
            row["bit_errors"] = int(row["bit_errors"])
            row["ber"] = float(row["ber"])
            row["seed"] = int(row["seed"])
            rows.append(row)
    return rows


def ebn0_at_ber(points: list[tuple[float, float]], target_ber: float) -> float:
    """Eb/N0 at which a BER curve crosses the target, interpolating linearly
    in (Eb/N0, log10 BER). Points with zero BER are ignored."""
    pts = sorted((e, b) for e, b in points if b > 0)
    if len(pts) < 2:
        raise ValueError("need at least two nonzero-BER points")
    log_t = np.log10(target_ber)
    for (e0, b0), (e1, b1) in zip(pts, pts[1:]):
        l0, l1 = np.log10(b0), np.log10(b1)
        if (l0 - log_t) * (l1 - log_t) <= 0 and l0 != l1:
            return e0 + (e1 - e0) * (l0 - log_t) / (l0 - l1)
    raise ValueError(f"curve does not cross BER {target_ber:g}")
