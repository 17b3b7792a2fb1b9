import math

import numpy as np
import pytest
from scipy.stats import binom, chisquare

from fedgame.energy import EnergyParams, WifiParams, node_round_energy
from fedgame.pbdist import expected_duration, poibin_pmf
from fedgame.simulate import (
    SimConfig,
    monte_carlo,
    results_to_csv,
    run_many,
    simulate_run,
    summarize,
)

from conftest import constant_dm


def make_cfg(default_dm, **kw):
    base = dict(
        profile=np.full(50, 0.5), dm=default_dm, ep=EnergyParams(),
        wifi=WifiParams(), mode="static_draw", seed=123,
    )
    base.update(kw)
    return SimConfig(**base)


class TestSimulateRun:
    def test_seeded_determinism(self, default_dm):
        cfg = make_cfg(default_dm)
        a, b = simulate_run(cfg), simulate_run(cfg)
        assert a.rounds == b.rounds
        assert a.energy_total_j == b.energy_total_j
        assert np.array_equal(a.per_node_energy_j, b.per_node_energy_j)
        assert np.array_equal(a.participants_per_round, b.participants_per_round)
        c = simulate_run(make_cfg(default_dm, seed=124))
        assert not np.array_equal(a.participants_per_round, c.participants_per_round)

    def test_static_duration_follows_first_draw(self, default_dm):
        cfg = make_cfg(default_dm)
        res = simulate_run(cfg)
        m = int(res.participants_per_round[0])
        assert res.rounds == int(math.floor(default_dm.eval(m) + 0.5))
        assert not res.truncated
        assert len(res.participants_per_round) == res.rounds

    def test_full_participation_progress(self, default_dm):
        cfg = make_cfg(default_dm, profile=np.ones(50), mode="progress")
        res = simulate_run(cfg)
        assert res.rounds == math.ceil(default_dm.eval(50))
        assert not res.truncated
        assert all(k == 50 for k in res.participants_per_round)

    def test_no_participation_truncates_with_idle_energy(self, default_dm):
        cfg = make_cfg(default_dm, profile=np.zeros(50), mode="progress",
                       max_rounds=40)
        res = simulate_run(cfg)
        assert res.truncated and res.rounds == 40
        assert all(k == 0 for k in res.participants_per_round)
        assert res.energy_total_j == pytest.approx(50 * 968.5 * 40, rel=1e-12)

    def test_static_truncation_flag(self, default_dm):
        cfg = make_cfg(default_dm, profile=np.zeros(50), max_rounds=10)
        res = simulate_run(cfg)  # zero participants pin duration at the cap
        assert res.truncated and res.rounds == 10

    def test_energy_decomposition(self, default_dm):
        res = simulate_run(make_cfg(default_dm))
        assert res.energy_total_j == pytest.approx(res.per_node_energy_j.sum(), rel=1e-12)
        assert np.all(res.per_node_energy_j > 0.0)

    def test_energy_matches_per_node_accounting(self, default_dm):
        # constant training time makes the per-round totals a function of the
        # participant count alone, reproducible through the energy module
        ep = EnergyParams(t_train_min_s=6.0, t_train_max_s=6.0)
        wifi = WifiParams()
        cfg = make_cfg(default_dm, ep=ep, wifi=wifi, profile=np.full(8, 0.4))
        res = simulate_run(cfg)
        active = node_round_energy(True, ep, 6.0, wifi).total
        idle = node_round_energy(False, ep, 0.0, wifi).total
        expected = sum(
            k * active + (8 - k) * idle for k in res.participants_per_round
        )
        assert res.energy_total_j == pytest.approx(expected, rel=1e-12)

    def test_progress_uses_cap_for_empty_rounds(self):
        dm = constant_dm(4.0, 4)  # cap = 8
        cfg = SimConfig(profile=np.zeros(4), dm=dm, ep=EnergyParams(),
                        wifi=WifiParams(), mode="progress", seed=5)
        res = simulate_run(cfg)
        # every empty round contributes 1/8, so convergence takes exactly 8
        assert res.rounds == 8 and not res.truncated

    def test_config_validation(self, default_dm):
        with pytest.raises(ValueError):
            make_cfg(default_dm, mode="warp")
        with pytest.raises(ValueError):
            make_cfg(default_dm, reps=0)
        with pytest.raises(ValueError):
            make_cfg(default_dm, max_rounds=0)
        with pytest.raises(ValueError):
            make_cfg(default_dm, profile=np.full(51, 0.5))

    def test_default_round_cap(self, default_dm):
        cfg = make_cfg(default_dm)
        assert cfg.effective_max_rounds == math.ceil(10 * default_dm.d_cap)


class TestMonteCarlo:
    def test_static_mean_tracks_analytic_expectation(self, default_dm):
        cfg = make_cfg(default_dm, reps=2000)
        summary = monte_carlo(cfg)
        ks = np.arange(51)
        pmf = binom.pmf(ks, 50, 0.5)
        rounded = np.floor(default_dm.eval(ks) + 0.5)
        target = float(pmf @ rounded)             # mean of the simulated statistic
        se = math.sqrt(float(pmf @ (rounded - target) ** 2) / summary.completed)
        assert abs(summary.mean_rounds - target) <= 3 * se
        # and the rounding quantisation is the only gap to the smooth expectation
        eq8 = expected_duration(cfg.profile, default_dm)
        assert abs(summary.mean_rounds - eq8) <= 3 * se + abs(target - eq8)

    def test_reps_one_equals_single_run(self, default_dm):
        cfg = make_cfg(default_dm, reps=1)
        summary = monte_carlo(cfg)
        run = run_many(cfg)[0]
        assert summary.mean_rounds == run.rounds
        assert summary.std_rounds == 0.0
        assert summary.mean_energy_wh == pytest.approx(run.energy_total_wh)

    def test_worker_count_does_not_change_results(self, default_dm):
        cfg = make_cfg(default_dm, reps=64)
        seq = run_many(cfg, workers=1)
        par = run_many(cfg, workers=4)
        assert [r.rounds for r in seq] == [r.rounds for r in par]
        assert [r.energy_total_j for r in seq] == [r.energy_total_j for r in par]
        assert summarize(seq) == summarize(par)

    def test_all_truncated_flagged_invalid(self, default_dm):
        cfg = make_cfg(default_dm, profile=np.zeros(50), mode="progress",
                       max_rounds=5, reps=8)
        summary = monte_carlo(cfg)
        assert summary.valid is False
        assert summary.truncation_rate == 1.0
        assert math.isnan(summary.mean_rounds)

    def test_mean_energy_near_measured_run(self, default_dm, averaged_rows):
        # the calibrated defaults should land close to the measured 704 Wh
        cfg = make_cfg(default_dm, reps=400)
        summary = monte_carlo(cfg)
        measured = next(r for r in averaged_rows if r.p == 0.5).e_mean
        assert abs(summary.mean_energy_wh - measured) / measured <= 0.15

    def test_participant_counts_match_distribution(self):
        # ~1e5 sampled rounds against the analytic count distribution
        profile = np.array([0.15, 0.4, 0.55, 0.6, 0.75, 0.9])
        dm = constant_dm(2000.0, 6, floor=1.0)
        cfg = SimConfig(profile=profile, dm=dm, ep=EnergyParams(),
                        wifi=WifiParams(), mode="progress", seed=2024, reps=50)
        counts = np.concatenate(
            [r.participants_per_round for r in run_many(cfg)]
        )
        observed = np.bincount(counts, minlength=7).astype(float)
        expected = poibin_pmf(profile) * counts.size
        stat = chisquare(observed, expected)
        assert stat.pvalue > 0.01


class TestCsvExport:
    def test_per_rep_rows_and_summary(self, default_dm):
        cfg = make_cfg(default_dm, reps=5)
        results = run_many(cfg)
        text = results_to_csv(results)
        lines = text.splitlines()
        assert lines[0] == "rep,rounds,energy_wh,truncated"
        assert len(lines) == 7
        assert lines[-1].startswith("summary,")

    def test_byte_determinism(self, default_dm):
        cfg = make_cfg(default_dm, reps=12)
        a = results_to_csv(run_many(cfg, workers=1))
        b = results_to_csv(run_many(cfg, workers=3))
        assert a == b
