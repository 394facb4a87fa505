import subprocess
import sys

import pytest

from dualink.harness import (
    CSV_COLUMNS,
    ScenarioConfig,
    build_grid,
    ebn0_at_ber,
    read_results,
    run_point,
    run_scenario,
    write_csv,
)
from dualink.phy_types import ConfigError

FAST = dict(min_bits=10_000, min_errors=0, max_bits=10_000)


class TestConfig:
    def test_min_bits_floor(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(min_bits=5000).validate()

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario="sideways").validate()

    def test_grid_equal_sweep(self):
        cfg = ScenarioConfig(scenario="equal_sweep", ebn0_plc_db=(0.0, 1.0), **FAST)
        assert build_grid(cfg) == [(0.0, 0.0), (1.0, 1.0)]

    def test_grid_fixed_wireless(self):
        cfg = ScenarioConfig(scenario="fixed_wireless_sweep",
                             ebn0_plc_db=(-6.0, -4.0), ebn0_wireless_db=3.0, **FAST)
        assert build_grid(cfg) == [(-6.0, 3.0), (-4.0, 3.0)]

    def test_grid_link_down_both_directions(self):
        cfg = ScenarioConfig(scenario="link_down", ebn0_plc_db=(7.3,),
                             ebn0_wireless_db="down", **FAST)
        assert build_grid(cfg) == [(7.3, None)]
        cfg = ScenarioConfig(scenario="link_down", ebn0_plc_db="down",
                             ebn0_wireless_db=(8.56,), **FAST)
        assert build_grid(cfg) == [(None, 8.56)]

    def test_link_down_needs_one_down_side(self):
        cfg = ScenarioConfig(scenario="link_down", ebn0_plc_db=(1.0,),
                             ebn0_wireless_db=(2.0,), **FAST)
        with pytest.raises(ConfigError):
            build_grid(cfg)


class TestRunPoint:
    def test_record_layout(self):
        cfg = ScenarioConfig(scenario="equal_sweep", ebn0_plc_db=(4.0,), **FAST)
        records = run_point(cfg, (4.0, 4.0), 0)
        assert len(records) == 6  # 3 links x 2 knowledge modes
        assert {r.link for r in records} == {"plc", "wireless", "combined"}
        assert {r.knowledge for r in records} == {"perfect", "estimated"}
        assert all(r.bits_total >= 10_000 for r in records)

    def test_deterministic_rerun(self):
        cfg = ScenarioConfig(scenario="equal_sweep", ebn0_plc_db=(2.0,),
                             knowledge=("perfect",), **FAST)
        a = run_point(cfg, (2.0, 2.0), 0)
        b = run_point(cfg, (2.0, 2.0), 0)
        assert a == b

    def test_error_target_extends_run(self):
        cfg = ScenarioConfig(scenario="equal_sweep", ebn0_plc_db=(0.0,),
                             knowledge=("perfect",), min_bits=10_000,
                             min_errors=50, max_bits=100_000)
        records = run_point(cfg, (0.0, 0.0), 0)
        by_link = {r.link: r for r in records}
        # single links sit around 1e-2 BER at 0 dB: target reachable
        assert by_link["plc"].bit_errors >= 50
        assert by_link["wireless"].bit_errors >= 50


class TestCsv:
    def run_small(self, tmp_path, name="a.csv"):
        cfg = ScenarioConfig(scenario="equal_sweep", ebn0_plc_db=(3.0,),
                             knowledge=("perfect",), seed=11, **FAST)
        out = tmp_path / name
        records = run_scenario(cfg, out_path=out)
        return cfg, out, records

    def test_schema_and_header(self, tmp_path):
        cfg, out, records = self.run_small(tmp_path)
        text = out.read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# dualink ")
        assert lines[1].startswith("# params ")
        assert lines[2] == "# seed 11"
        assert lines[3] == ",".join(CSV_COLUMNS)
        rows = read_results(out)
        assert len(rows) == len(records) == 3
        assert rows[0]["ebn0_plc_db"] == 3.0

    def test_byte_identical_rerun(self, tmp_path):
        _, out_a, _ = self.run_small(tmp_path, "a.csv")
        _, out_b, _ = self.run_small(tmp_path, "b.csv")
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_down_marker_round_trips(self, tmp_path):
        cfg = ScenarioConfig(scenario="link_down", ebn0_plc_db=(7.3,),
                             ebn0_wireless_db="down", knowledge=("perfect",),
                             seed=1, **FAST)
        out = tmp_path / "down.csv"
        run_scenario(cfg, out_path=out)
        rows = read_results(out)
        assert all(r["ebn0_wireless_db"] is None for r in rows)
        assert all(r["ebn0_plc_db"] == 7.3 for r in rows)


def test_ebn0_at_ber_interpolation():
    curve = [(0.0, 1e-2), (2.0, 1e-3), (4.0, 1e-4)]
    assert ebn0_at_ber(curve, 1e-3) == pytest.approx(2.0)
    assert ebn0_at_ber(curve, 10 ** -3.5) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        ebn0_at_ber(curve, 1e-9)


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "dualink.cli", *args],
                              capture_output=True, text=True)

    def test_run_success_exit_0(self, tmp_path):
        out = tmp_path / "r.csv"
        proc = self.run_cli(
            "run", "--scenario", "equal_sweep", "--ebn0-plc", "4",
            "--knowledge", "perfect", "--min-bits", "10000", "--min-errors", "0",
            "--max-bits", "10000", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
        assert len(read_results(out)) == 3

    def test_config_error_exit_1(self, tmp_path):
        proc = self.run_cli(
            "run", "--scenario", "equal_sweep", "--ebn0-plc", "4",
            "--min-bits", "10", "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 1
        assert "configuration error" in proc.stderr

    def test_bad_range_exit_1(self, tmp_path):
        proc = self.run_cli(
            "run", "--scenario", "equal_sweep", "--ebn0-plc", "8:4",
            "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 1

    def test_io_error_exit_2(self, tmp_path):
        proc = self.run_cli(
            "run", "--scenario", "equal_sweep", "--ebn0-plc", "4",
            "--knowledge", "perfect", "--min-bits", "10000", "--min-errors", "0",
            "--max-bits", "10000", "--out", str(tmp_path / "missing" / "r.csv"),
        )
        assert proc.returncode == 2
        assert "I/O error" in proc.stderr

    def test_config_file_validated(self, tmp_path):
        bad = tmp_path / "phy.cfg"
        bad.write_text("cp_len = 300\n")
        proc = self.run_cli(
            "run", "--scenario", "equal_sweep", "--ebn0-plc", "4",
            "--config", str(bad), "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 1
