import json
import math

import numpy as np
import pytest

from trihybrid import cli
from trihybrid import harness as hn
from trihybrid.harmonics import truncation_length

# small, fast batch settings shared by most tests
FAST = dict(
    n_h=2, n_v=2, n_users=2, n_paths=2, n_rf=2, truncation=1,
    max_iterations=5, tolerance=0.0, user_radius_m=60.0,
)


def fast_config(**kwargs):
    params = dict(FAST)
    params.update(kwargs)
    return hn.RunConfig(**params)


def strip_wall(record):
    return (
        record.seed, record.mode, record.pmax_dbm, record.sum_rate,
        record.iterations, record.decomp_residual, record.projected_sum_rate,
        record.error,
    )


class TestConfig:
    def test_defaults_match_reference_setup(self):
        cfg = hn.RunConfig()
        assert cfg.n_h * cfg.n_v == 9
        assert cfg.n_users == 2
        assert cfg.n_paths == 3
        assert cfg.n_rf == 4
        assert truncation_length(cfg.truncation) == 25
        assert cfg.eta == pytest.approx(math.sqrt(2 * math.pi))
        assert cfg.frequency_hz == 30e9
        assert cfg.noise_dbm == -95.0
        assert cfg.pmax_dbm == (10.0,)
        assert cfg.bs_position == (0.0, 0.0, 10.0)

    def test_dbm_conversion(self):
        assert hn.dbm_to_watts(20.0) == pytest.approx(0.1)
        assert hn.dbm_to_watts(10.0) == pytest.approx(0.01)
        assert hn.watts_to_dbm(0.1) == pytest.approx(20.0)
        cfg = hn.RunConfig(pmax_dbm=(20.0,))
        assert cfg.scenario_config(20.0).p_max_w == pytest.approx(0.1)
        assert cfg.scenario_config(20.0).noise_power_w == pytest.approx(10 ** (-12.5))

    def test_zero_trials_rejected(self):
        with pytest.raises(hn.ConfigError, match="trials"):
            hn.RunConfig(trials=0)

    def test_unknown_field_named(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"n_users": 2, "bogus_knob": 1}))
        with pytest.raises(hn.ConfigError, match="bogus_knob"):
            hn.parse_config(path)

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(hn.ConfigError, match="line"):
            hn.parse_config(path)

    def test_file_plus_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"trials": 7, "seed": 3}))
        cfg = hn.parse_config(path, {"seed": 9, "mode": None})
        assert cfg.trials == 7
        assert cfg.seed == 9  # override wins, None overrides are ignored
        assert cfg.mode == "all"

    def test_rf_chain_bounds(self):
        with pytest.raises(hn.ConfigError, match="n_rf"):
            hn.RunConfig(n_rf=1)  # below n_users
        with pytest.raises(hn.ConfigError, match="n_rf"):
            hn.RunConfig(n_rf=10)  # above n_h * n_v

    def test_invalid_mode(self):
        with pytest.raises(hn.ConfigError, match="mode"):
            hn.RunConfig(mode="quad")

    def test_sweep_config(self):
        cfg = hn.sweep_config(fast_config(mode="hybrid"))
        assert cfg.mode == "all"
        assert cfg.pmax_dbm == tuple(float(p) for p in range(0, 31, 5))
        cfg = hn.sweep_config(fast_config(), pmax_dbm=[3.0, 6.0])
        assert cfg.pmax_dbm == (3.0, 6.0)


class TestRunTrials:
    def test_cardinality(self):
        cfg = fast_config(trials=2, pmax_dbm=(5.0, 10.0), mode="all", seed=1)
        records = hn.run_trials(cfg)
        assert len(records) == 12
        keys = [(r.seed, r.pmax_dbm, r.mode) for r in records]
        assert keys == sorted(keys, key=lambda k: (k[0], k[1], hn.MODES.index(k[2])))

    def test_deterministic_scientific_fields(self):
        cfg = fast_config(trials=2, mode="all", seed=4)
        a = [strip_wall(r) for r in hn.run_trials(cfg)]
        b = [strip_wall(r) for r in hn.run_trials(cfg)]
        assert a == b

    def test_parallel_matches_serial(self):
        serial = fast_config(trials=3, mode="trihybrid", seed=2, workers=1)
        parallel = fast_config(trials=3, mode="trihybrid", seed=2, workers=2)
        a = [strip_wall(r) for r in hn.run_trials(serial)]
        b = [strip_wall(r) for r in hn.run_trials(parallel)]
        assert a == b

    def test_failed_trial_flagged_not_fatal(self):
        cfg = fast_config(
            trials=1, mode="projected", patterns_path="/nonexistent/patterns.json"
        )
        records = hn.run_trials(cfg)
        assert len(records) == 1
        assert records[0].error is not None
        assert math.isnan(records[0].sum_rate)
        assert records[0].iterations == 0

    def test_mean_trihybrid_beats_hybrid(self):
        cfg = fast_config(trials=5, mode="all", seed=10, max_iterations=30)
        records = hn.run_trials(cfg)
        tri = np.mean([r.sum_rate for r in records if r.mode == "trihybrid"])
        hyb = np.mean([r.sum_rate for r in records if r.mode == "hybrid"])
        assert tri > hyb


class TestCsv:
    def test_header_only_for_empty_batch(self, tmp_path):
        path = tmp_path / "empty.csv"
        hn.emit_csv([], path)
        lines = path.read_text(encoding="utf-8").split("\n")
        assert lines == [hn.CSV_HEADER, ""]

    def test_line_count(self, tmp_path):
        cfg = fast_config(trials=2, pmax_dbm=(5.0, 10.0), mode="all", seed=1)
        records = hn.run_trials(cfg)
        path = tmp_path / "r.csv"
        hn.emit_csv(records, path)
        text = path.read_text(encoding="utf-8")
        assert len(text.split("\n")) == 14  # header + 12 rows + trailing newline
        assert "\r" not in text

    def test_round_trip(self, tmp_path):
        cfg = fast_config(trials=1, mode="all", seed=6)
        records = hn.run_trials(cfg)
        path = tmp_path / "r.csv"
        hn.emit_csv(records, path)
        parsed = hn.read_csv(path)
        for orig, back in zip(records, parsed):
            assert back.seed == orig.seed
            assert back.mode == orig.mode
            assert back.pmax_dbm == orig.pmax_dbm
            assert back.sum_rate == pytest.approx(orig.sum_rate, rel=1e-8)
            assert back.iterations == orig.iterations
            assert back.decomp_residual == pytest.approx(orig.decomp_residual, rel=1e-8)
            if orig.projected_sum_rate is None:
                assert back.projected_sum_rate is None
            else:
                assert back.projected_sum_rate == pytest.approx(
                    orig.projected_sum_rate, rel=1e-8
                )

    def test_nine_significant_digits(self, tmp_path):
        rec = hn.TrialRecord(
            seed=1, mode="hybrid", pmax_dbm=10.0, sum_rate=1.0 / 3.0,
            iterations=2, decomp_residual=2.0 / 3.0, projected_sum_rate=None,
            wall_ms=1.5,
        )
        path = tmp_path / "fmt.csv"
        hn.emit_csv([rec], path)
        row = path.read_text().split("\n")[1]
        assert "0.333333333" in row
        assert "0.666666667" in row

    def test_emit_is_byte_stable(self, tmp_path):
        cfg = fast_config(trials=1, mode="hybrid", seed=8)
        records = hn.run_trials(cfg)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        hn.emit_csv(records, p1)
        hn.emit_csv(records, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestTrace:
    def test_rows_start_at_one_and_rates_monotone(self):
        cfg = fast_config(max_iterations=12, seed=3)
        rows = hn.convergence_trace(cfg, seed=3)
        modes = {r.mode for r in rows}
        assert modes == {"trihybrid", "hybrid"}
        for mode in modes:
            series = [r for r in rows if r.mode == mode]
            assert series[0].iteration == 1
            assert [r.iteration for r in series] == list(range(1, len(series) + 1))
            rates = [r.sum_rate for r in series]
            assert all(b >= a - 1e-8 for a, b in zip(rates, rates[1:]))

    def test_trihybrid_ends_at_or_above_hybrid(self):
        cfg = fast_config(max_iterations=30, seed=5)
        rows = hn.convergence_trace(cfg, seed=5)
        tri = [r.sum_rate for r in rows if r.mode == "trihybrid"][-1]
        hyb = [r.sum_rate for r in rows if r.mode == "hybrid"][-1]
        assert tri >= hyb

    def test_trace_csv(self, tmp_path):
        cfg = fast_config(max_iterations=4, seed=1)
        rows = hn.convergence_trace(cfg, seed=1)
        path = tmp_path / "trace.csv"
        hn.emit_trace_csv(rows, path)
        lines = path.read_text(encoding="utf-8").strip().split("\n")
        assert lines[0] == "mode,iteration,sum_rate,objective"
        assert len(lines) == len(rows) + 1


class TestCli:
    def write_fast_config(self, tmp_path, **kwargs):
        params = dict(FAST)
        params.update(kwargs)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(params))
        return path

    def test_run_subcommand(self, tmp_path, capsys):
        cfg = self.write_fast_config(tmp_path, trials=1, mode="hybrid")
        out = tmp_path / "results.csv"
        code = cli.main(["run", "--config", str(cfg), "--out", str(out), "--seed", "2"])
        assert code == 0
        assert out.exists()
        assert "hybrid" in capsys.readouterr().out
        assert len(hn.read_csv(out)) == 1

    def test_config_error_exit_code(self, capsys):
        code = cli.main(["run", "--trials", "0"])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_bad_patterns_file_is_config_error(self, tmp_path, capsys):
        cfg = self.write_fast_config(tmp_path, trials=1, mode="projected")
        code = cli.main(
            ["run", "--config", str(cfg), "--patterns", "/missing.json",
             "--out", str(tmp_path / "r.csv")]
        )
        assert code == 1

    def test_trace_subcommand(self, tmp_path):
        cfg = self.write_fast_config(tmp_path, max_iterations=3)
        out = tmp_path / "t.csv"
        code = cli.main(["trace", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert out.read_text().startswith("mode,iteration,sum_rate,objective")

    def test_sweep_forces_all_modes(self, tmp_path):
        cfg = self.write_fast_config(tmp_path, trials=1, mode="hybrid")
        out = tmp_path / "s.csv"
        code = cli.main(
            ["sweep", "--config", str(cfg), "--pmax-dbm", "5", "10",
             "--out", str(out)]
        )
        assert code == 0
        records = hn.read_csv(out)
        assert {r.mode for r in records} == set(hn.MODES)
        assert {r.pmax_dbm for r in records} == {5.0, 10.0}

    def test_project_subcommand(self, tmp_path):
        cfg = self.write_fast_config(tmp_path, trials=1)
        out = tmp_path / "p.csv"
        code = cli.main(["project", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        records = hn.read_csv(out)
        assert all(r.mode == "projected" for r in records)
        assert all(r.projected_sum_rate is not None for r in records)

    def test_failed_batch_exit_code(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise RuntimeError("synthetic trial failure")

        monkeypatch.setattr(hn, "run_single", boom)
        cfg = self.write_fast_config(tmp_path, trials=2, mode="hybrid")
        out = tmp_path / "f.csv"
        code = cli.main(["run", "--config", str(cfg), "--out", str(out)])
        assert code == 2
        assert "failed" in capsys.readouterr().err
        records = hn.read_csv(out)
        assert len(records) == 2
        assert all(math.isnan(r.sum_rate) for r in records)

    def test_no_refit_flag(self, tmp_path):
        cfg = self.write_fast_config(tmp_path, trials=1)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert cli.main(["project", "--config", str(cfg), "--out", str(out1)]) == 0
        assert cli.main(
            ["project", "--config", str(cfg), "--out", str(out2), "--no-refit"]
        ) == 0
        with_refit = hn.read_csv(out1)[0].projected_sum_rate
        without = hn.read_csv(out2)[0].projected_sum_rate
        assert with_refit >= without - 1e-9
