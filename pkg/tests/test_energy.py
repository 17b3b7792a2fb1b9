import math
from dataclasses import replace

import numpy as np
import pytest

from fedgame.empirics import EmpiricalRow
from fedgame.energy import (
    CalibrationError,
    ContributionDiscardedError,
    EnergyParams,
    WifiParams,
    airtime,
    calibrate_energy_params,
    data_bits_per_symbol,
    dbm_to_watts,
    expected_round_energy,
    node_round_energy,
    round_energy,
    run_energy,
    tx_energy,
)


def oracle_airtime(wifi: WifiParams) -> float:
    """Arithmetic re-derivation of the transaction model, kept independent
    of the implementation's structure."""
    def legacy(bits):
        return wifi.t_phy_s + math.ceil(bits / wifi.legacy_bits_per_symbol) * wifi.legacy_symbol_s

    per_exchange = (
        wifi.cw / 2 * wifi.t_empty_slot_s
        + legacy(wifi.l_rts_bits) + legacy(wifi.l_cts_bits) + legacy(wifi.l_ack_bits)
        + 3 * wifi.t_sifs_s + wifi.t_difs_s
    )
    total, left = 0.0, wifi.model_size_bits
    for _ in range(max(1, math.ceil(wifi.model_size_bits / wifi.max_ampdu_bits))):
        chunk = min(left, wifi.max_ampdu_bits)
        payload_bits = wifi.l_sf_bits + wifi.l_mac_bits + chunk
        symbols = math.ceil(payload_bits / wifi.data_bits_per_symbol)
        total += per_exchange + wifi.t_phy_s + wifi.t_he_su_s + symbols * wifi.he_symbol_s
        left -= chunk
    return total


class TestAirtime:
    def test_default_bits_per_symbol(self):
        assert data_bits_per_symbol() == 1950
        assert WifiParams().data_bits_per_symbol == 1950

    def test_matches_arithmetic_oracle(self):
        for wifi in (
            WifiParams(),
            WifiParams(model_size_bits=10_000),
            WifiParams(max_ampdu_bits=1_000_000),
            WifiParams(data_bits_per_symbol=234),
        ):
            assert airtime(wifi) == pytest.approx(oracle_airtime(wifi), rel=1e-12)

    def test_zero_payload_is_pure_overhead(self):
        wifi = WifiParams(model_size_bits=0)
        t = airtime(wifi)
        assert t == pytest.approx(oracle_airtime(wifi), rel=1e-12)
        assert t < 1e-3  # well under a millisecond of protocol overhead

    def test_payload_dominates_default(self):
        wifi = WifiParams()
        payload_s = wifi.model_size_bits / wifi.data_bits_per_symbol * wifi.he_symbol_s
        t = airtime(wifi)
        assert payload_s <= t <= 1.05 * payload_s
        assert 2.0 <= t <= 3.0  # seconds for a 44.73 MB update at MCS 11

    def test_doubling_payload_more_than_doubles_data_time(self):
        small = WifiParams()
        large = replace(small, model_size_bits=2 * small.model_size_bits)
        t_small, t_large = airtime(small), airtime(large)
        assert t_large > t_small
        overhead = airtime(replace(small, model_size_bits=0))
        assert t_large - overhead >= 2.0 * (t_small - overhead) * 0.999

    def test_monotone_in_payload(self):
        sizes = np.linspace(0, 4e8, 9, dtype=int)
        times = [airtime(WifiParams(model_size_bits=int(s))) for s in sizes]
        assert all(a < b for a, b in zip(times, times[1:]))

    def test_weakly_decreasing_in_symbol_capacity(self):
        times = [
            airtime(WifiParams(data_bits_per_symbol=bps))
            for bps in (234, 468, 975, 1950)
        ]
        assert all(a >= b for a, b in zip(times, times[1:]))

    def test_aggregation_adds_exchanges(self):
        one = WifiParams(max_ampdu_bits=10**12)
        many = WifiParams()  # default cap splits the update into 7 aggregates
        assert airtime(many) > airtime(one)

    def test_zero_symbol_capacity_rejected(self):
        wifi = replace(WifiParams(), data_bits_per_symbol=0)
        with pytest.raises(ValueError):
            airtime(wifi)


class TestTxEnergy:
    def test_dbm_conversion(self):
        assert dbm_to_watts(9.0) == pytest.approx(7.943e-3, rel=1e-3)
        assert dbm_to_watts(30.0) == pytest.approx(1.0)

    def test_product_of_power_and_airtime(self):
        wifi, ep = WifiParams(), EnergyParams()
        assert tx_energy(wifi, ep) == ep.p_tx_w * airtime(wifi)

    def test_unit_second_example(self):
        # 9 dBm over one second of airtime is 7.94 mJ
        assert dbm_to_watts(9.0) * 1.0 == pytest.approx(7.94e-3, rel=1e-3)

    def test_repeat_calls_identical(self):
        wifi, ep = WifiParams(), EnergyParams()
        assert tx_energy(wifi, ep) == tx_energy(wifi, ep)


class TestNodeRoundEnergy:
    def test_idle_round_is_exact(self):
        b = node_round_energy(False, EnergyParams(), 0.0, WifiParams())
        assert b.total == 96.85 * 10.0
        assert b.total == 968.5
        assert b.train == 0.0 and b.tx == 0.0

    def test_full_window_training_leaves_no_idle(self):
        ep = EnergyParams()
        b = node_round_energy(True, ep, ep.t_round_s, WifiParams())
        assert b.idle == 0.0
        assert b.train == ep.p_hw_w * ep.t_round_s

    def test_train_component_exact(self):
        ep = EnergyParams()
        b = node_round_energy(True, ep, 6.25, WifiParams())
        assert b.train == ep.p_hw_w * 6.25

    def test_components_nonnegative_and_add_up(self):
        b = node_round_energy(True, EnergyParams(), 7.5, WifiParams())
        assert min(b.train, b.tx, b.idle) >= 0.0
        assert b.total == b.train + b.tx + b.idle

    def test_overlong_training_discarded(self):
        with pytest.raises(ContributionDiscardedError):
            node_round_energy(True, EnergyParams(), 10.5, WifiParams())

    def test_nonpositive_training_rejected(self):
        with pytest.raises(ValueError):
            node_round_energy(True, EnergyParams(), 0.0, WifiParams())


class TestRoundAndRunEnergy:
    def test_all_idle(self):
        total = round_energy(set(), 4, EnergyParams(), {}, WifiParams())
        assert total == pytest.approx(4 * 968.5)

    def test_homogeneous_participants(self):
        ep, wifi = EnergyParams(), WifiParams()
        per = node_round_energy(True, ep, 6.0, wifi).total
        total = round_energy({0, 1, 2}, 3, ep, {0: 6.0, 1: 6.0, 2: 6.0}, wifi)
        assert total == pytest.approx(3 * per)

    def test_two_node_hand_sum(self):
        ep, wifi = EnergyParams(), WifiParams()
        total = round_energy({0}, 2, ep, {0: 5.0}, wifi)
        expected = 968.5 + ep.p_hw_w * 5.0 + tx_energy(wifi, ep) + 96.85 * 5.0
        assert total == pytest.approx(expected)

    def test_unknown_participant_rejected(self):
        with pytest.raises(ValueError):
            round_energy({5}, 3, EnergyParams(), {5: 5.0}, WifiParams())

    def test_run_energy_sums(self):
        assert run_energy([]) == 0.0
        assert run_energy([10.0] * 7) == pytest.approx(70.0)
        vals = [3.0, 1.0, 4.0, 1.5]
        assert run_energy(vals) == run_energy(reversed(vals))


class TestCalibration:
    def _rows_from_params(self, ep, wifi, n, probs, rounds):
        rows = []
        for p, d in zip(probs, rounds):
            wh = d * expected_round_energy(p, n, ep, wifi) / 3600.0
            rows.append(EmpiricalRow(p, d, 0.5, wh, 1.0, "averaged"))
        return rows

    def test_round_trip_recovers_power(self):
        truth = EnergyParams(p_hw_w=203.4)
        wifi = WifiParams()
        rows = self._rows_from_params(
            truth, wifi, 50, [0.1, 0.3, 0.5, 0.7], [70, 47, 40, 38]
        )
        cal = calibrate_energy_params(rows, EnergyParams(p_hw_w=120.0), wifi, 50)
        assert cal.params.p_hw_w == pytest.approx(203.4, rel=0.01)

    def test_single_row_exact(self):
        truth = EnergyParams(p_hw_w=150.0)
        wifi = WifiParams()
        rows = self._rows_from_params(truth, wifi, 50, [0.5], [40])
        cal = calibrate_energy_params(rows, EnergyParams(), wifi, 50)
        assert cal.predicted_wh[0] == pytest.approx(rows[0].e_mean, rel=1e-12)

    def test_embedded_table_reproduced(self, averaged_rows):
        cal = calibrate_energy_params(averaged_rows, EnergyParams(), WifiParams(), 50)
        within = (cal.relative_errors <= 0.15).mean()
        assert within >= 0.8
        assert 120.0 < cal.params.p_hw_w < 260.0

    def test_default_power_matches_embedded_calibration(self, averaged_rows):
        cal = calibrate_energy_params(averaged_rows, EnergyParams(), WifiParams(), 50)
        assert EnergyParams().p_hw_w == pytest.approx(cal.params.p_hw_w, abs=0.01)

    def test_adjust_training_time(self, averaged_rows):
        cal = calibrate_energy_params(
            averaged_rows, EnergyParams(p_hw_w=176.22), WifiParams(), 50,
            adjust="t_train",
        )
        assert 5.0 <= cal.params.t_train_mean_s <= 9.0

    def test_infeasible_power(self):
        rows = [EmpiricalRow(0.5, 40, 0.5, 1.0, 0.0, "averaged")]
        with pytest.raises(CalibrationError):
            calibrate_energy_params(rows, EnergyParams(), WifiParams(), 50)

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            calibrate_energy_params([], EnergyParams(), WifiParams(), 50)
