"""Per-node and per-round energy accounting with an 802.11ax airtime model.

A participating node spends ``P_hw * T_train`` on local training, a fixed
``P_tx * T_tx`` on uploading the model over the wireless link, and idles at
``P_idle`` for the remainder of the round window ``T_round``.  A node that
sits a round out idles for the whole window.  Totals add up over nodes and
rounds with no cross terms.

The airtime ``T_tx`` comes from a deterministic single-user MAC transaction
model: mean fixed-CW backoff, RTS/CTS/ACK control frames at the legacy rate,
and the payload split into A-MPDU aggregates carried in HE data frames.
Collisions, retransmissions and rate adaptation are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ContributionDiscardedError",
    "CalibrationError",
    "EnergyParams",
    "WifiParams",
    "EnergyBreakdown",
    "CalibrationResult",
    "dbm_to_watts",
    "joules_to_wh",
    "data_bits_per_symbol",
    "airtime",
    "tx_energy",
    "node_round_energy",
    "round_energy",
    "run_energy",
    "expected_round_energy",
    "calibrate_energy_params",
]

WH_PER_JOULE = 1.0 / 3600.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def joules_to_wh(joules):
    if np.ndim(joules):
        return np.asarray(joules, dtype=float) * WH_PER_JOULE
    return float(joules) * WH_PER_JOULE


def data_bits_per_symbol(
    n_subcarriers: int = 234,
    n_spatial_streams: int = 1,
    modulation_bits: int = 10,
    coding_rate: float = 5.0 / 6.0,
) -> int:
    """Data bits carried per HE OFDM symbol.

    Defaults are the 20 MHz single-stream ceiling (1024-QAM, rate 5/6),
    giving 1950 bits per 13.6 us symbol.
    """
    return int(round(n_subcarriers * n_spatial_streams * modulation_bits * coding_rate))


class ContributionDiscardedError(ValueError):
    """Training ran past the round window, so the upload would be discarded."""


class CalibrationError(ValueError):
    """No feasible hardware-power value reproduces the measured energies."""


@dataclass(frozen=True)
class EnergyParams:
    """Power and timing constants of one node.

    ``p_hw_w`` is the average training-time hardware draw (CPU+GPU+DRAM).
    The bundled measurements do not state it directly; the default below is
    the value calibrated against the averaged measurement table (see
    :func:`calibrate_energy_params`).  Training time per round is uniform on
    ``[t_train_min_s, t_train_max_s]``; a degenerate interval makes it
    constant.
    """

    p_hw_w: float = 176.22
    p_idle_w: float = 96.85
    p_tx_w: float = dbm_to_watts(9.0)
    t_round_s: float = 10.0
    t_train_min_s: float = 5.0
    t_train_max_s: float = 9.0

    def __post_init__(self):
        if min(self.p_hw_w, self.p_idle_w, self.p_tx_w) <= 0.0:
            raise ValueError("all powers must be positive")
        if self.t_round_s <= 0.0:
            raise ValueError("round window must be positive")
        if not 0.0 < self.t_train_min_s <= self.t_train_max_s <= self.t_round_s:
            raise ValueError(
                "training-time interval must satisfy 0 < min <= max <= t_round"
            )

    @property
    def t_train_mean_s(self) -> float:
        return 0.5 * (self.t_train_min_s + self.t_train_max_s)


@dataclass(frozen=True)
class WifiParams:
    """802.11ax MAC/PHY constants for a 20 MHz single-user upload."""

    model_size_bits: int = 357_840_000      # 44.73 MB of float32 weights
    legacy_symbol_s: float = 4e-6
    legacy_bits_per_symbol: int = 24
    data_bits_per_symbol: int = data_bits_per_symbol()
    he_symbol_s: float = 13.6e-6             # 12.8 us + 0.8 us guard
    t_empty_slot_s: float = 9e-6
    t_sifs_s: float = 16e-6
    t_difs_s: float = 34e-6
    t_phy_s: float = 20e-6
    t_he_su_s: float = 100e-6
    l_rts_bits: int = 160
    l_cts_bits: int = 112
    l_ack_bits: int = 240
    l_sf_bits: int = 16
    l_mac_bits: int = 320
    cw: int = 15
    max_ampdu_bits: int = 6_500_631 * 8      # HE maximum A-MPDU length

    def __post_init__(self):
        durations = (
            self.legacy_symbol_s, self.he_symbol_s, self.t_empty_slot_s,
            self.t_sifs_s, self.t_difs_s, self.t_phy_s, self.t_he_su_s,
        )
        if min(durations) <= 0.0:
            raise ValueError("all durations must be positive")
        lengths = (
            self.legacy_bits_per_symbol, self.l_rts_bits, self.l_cts_bits,
            self.l_ack_bits, self.l_sf_bits, self.l_mac_bits, self.max_ampdu_bits,
        )
        if min(lengths) <= 0:
            raise ValueError("all frame lengths must be positive")
        if self.model_size_bits < 0:
            raise ValueError("model size cannot be negative")
        if self.cw < 0:
            raise ValueError("contention window cannot be negative")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy of one node over one round, in joules."""

    train: float
    tx: float
    idle: float

    @property
    def total(self) -> float:
        return self.train + self.tx + self.idle


@dataclass(frozen=True)
class CalibrationResult:
    params: EnergyParams
    predicted_wh: np.ndarray
    measured_wh: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        return np.abs(self.predicted_wh - self.measured_wh) / self.measured_wh


def _legacy_frame_s(wifi: WifiParams, length_bits: int) -> float:
    symbols = math.ceil(length_bits / wifi.legacy_bits_per_symbol)
    return wifi.t_phy_s + symbols * wifi.legacy_symbol_s


def _data_frame_s(wifi: WifiParams, payload_bits: int) -> float:
    bits = wifi.l_sf_bits + wifi.l_mac_bits + payload_bits
    symbols = math.ceil(bits / wifi.data_bits_per_symbol)
    return wifi.t_phy_s + wifi.t_he_su_s + symbols * wifi.he_symbol_s


def airtime(wifi: WifiParams) -> float:
    """Channel time in seconds for one full model upload.

    The payload is split into ``ceil(model_size_bits / max_ampdu_bits)``
    aggregates; each aggregate costs a complete MAC transaction

        backoff + RTS + SIFS + CTS + SIFS + DATA + SIFS + ACK + DIFS

    with the mean fixed-CW backoff ``(CW / 2) * t_empty_slot`` and control
    frames sent at the legacy rate.  Deterministic for fixed parameters.
    """
    if wifi.data_bits_per_symbol <= 0:
        raise ValueError("data_bits_per_symbol must be positive")
    backoff = 0.5 * wifi.cw * wifi.t_empty_slot_s
    overhead = (
        backoff
        + _legacy_frame_s(wifi, wifi.l_rts_bits)
        + wifi.t_sifs_s
        + _legacy_frame_s(wifi, wifi.l_cts_bits)
        + wifi.t_sifs_s
        + wifi.t_sifs_s
        + _legacy_frame_s(wifi, wifi.l_ack_bits)
        + wifi.t_difs_s
    )
    n_agg = max(1, math.ceil(wifi.model_size_bits / wifi.max_ampdu_bits))
    total = 0.0
    remaining = wifi.model_size_bits
    for _ in range(n_agg):
        chunk = min(remaining, wifi.max_ampdu_bits)
        total += overhead + _data_frame_s(wifi, chunk)
        remaining -= chunk
    return total


def tx_energy(wifi: WifiParams, ep: EnergyParams) -> float:
    """Upload energy ``P_tx * T_tx`` in joules; identical for every node and round."""
    return ep.p_tx_w * airtime(wifi)


def node_round_energy(
    participating: bool,
    ep: EnergyParams,
    t_train_s: float,
    wifi: WifiParams,
) -> EnergyBreakdown:
    """Energy breakdown of one node for one round.

    A participant trains for ``t_train_s``, uploads, and idles the rest of
    the window; training past the window raises
    :class:`ContributionDiscardedError` because the upload would no longer
    be accepted.  A non-participant idles for the whole window.
    """
    if not participating:
        return EnergyBreakdown(0.0, 0.0, ep.p_idle_w * ep.t_round_s)
    if t_train_s > ep.t_round_s:
        raise ContributionDiscardedError(
            f"training time {t_train_s} s exceeds round window {ep.t_round_s} s"
        )
    if t_train_s <= 0.0:
        raise ValueError("participant training time must be positive")
    return EnergyBreakdown(
        train=ep.p_hw_w * t_train_s,
        tx=tx_energy(wifi, ep),
        idle=ep.p_idle_w * (ep.t_round_s - t_train_s),
    )


def round_energy(
    participants,
    n_nodes: int,
    ep: EnergyParams,
    t_train_per_node,
    wifi: WifiParams,
) -> float:
    """Total energy of one round in joules.

    ``participants`` is a set of node ids in ``range(n_nodes)``;
    ``t_train_per_node`` maps each participant id to its training time.
    """
    participants = set(participants)
    if not participants <= set(range(n_nodes)):
        raise ValueError("participants must be node ids in range(n_nodes)")
    total = 0.0
    for i in range(n_nodes):
        if i in participants:
            total += node_round_energy(True, ep, t_train_per_node[i], wifi).total
        else:
            total += node_round_energy(False, ep, 0.0, wifi).total
    return total


def run_energy(round_energies) -> float:
    """Total energy over a run: plain sum of per-round totals (joules)."""
    return float(sum(round_energies))


def expected_round_energy(
    p: float, n_nodes: int, ep: EnergyParams, wifi: WifiParams
) -> float:
    """Expected per-round energy (joules) at symmetric participation ``p``.

    Uses ``n_nodes * p`` expected participants and the mean training time;
    exact for the model because per-round energy is linear in both.
    """
    etx = tx_energy(wifi, ep)
    tbar = ep.t_train_mean_s
    per_participant = ep.p_hw_w * tbar + etx + ep.p_idle_w * (ep.t_round_s - tbar)
    per_idler = ep.p_idle_w * ep.t_round_s
    return n_nodes * (p * per_participant + (1.0 - p) * per_idler)


def calibrate_energy_params(
    rows,
    ep0: EnergyParams,
    wifi: WifiParams,
    n_nodes: int,
    adjust: str = "p_hw",
) -> CalibrationResult:
    """Least-squares calibration of the training power against measured runs.

    For each measurement row the analytic expected run energy is
    ``d_mean * expected_round_energy(p)``; the model is linear in the
    product ``t_train_mean * (p_hw - p_idle)``, so that product is solved in
    closed form and backed out into ``p_hw`` (default) or, with
    ``adjust="t_train"``, into the mean training time at fixed ``p_hw``.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("calibration needs at least one row")
    if adjust not in ("p_hw", "t_train"):
        raise ValueError(f"unknown adjustment target {adjust!r}")
    p = np.array([r.p for r in rows])
    d = np.array([r.d_mean for r in rows])
    e_j = np.array([r.e_mean for r in rows]) / WH_PER_JOULE
    etx = tx_energy(wifi, ep0)
    # run energy = beta * (d * n * p) + base, with beta = tbar * (p_hw - p_idle)
    base = d * n_nodes * (p * etx + ep0.p_idle_w * ep0.t_round_s)
    a = d * n_nodes * p
    beta = float(a @ (e_j - base) / (a @ a))
    if adjust == "p_hw":
        p_hw = ep0.p_idle_w + beta / ep0.t_train_mean_s
        if p_hw <= 0.0:
            raise CalibrationError(f"calibrated hardware power {p_hw:.2f} W not positive")
        params = replace(ep0, p_hw_w=p_hw)
    else:
        if ep0.p_hw_w <= ep0.p_idle_w:
            raise CalibrationError(
                "cannot back out training time: p_hw does not exceed p_idle"
            )
        tbar = beta / (ep0.p_hw_w - ep0.p_idle_w)
        if not 0.0 < tbar <= ep0.t_round_s:
            raise CalibrationError(
                f"calibrated mean training time {tbar:.2f} s outside (0, t_round]"
            )
        params = replace(ep0, t_train_min_s=tbar, t_train_max_s=tbar)
    predicted = np.array(
        [di * expected_round_energy(pi, n_nodes, params, wifi) for pi, di in zip(p, d)]
    ) * WH_PER_JOULE
    return CalibrationResult(params, predicted, np.array([r.e_mean for r in rows]))
