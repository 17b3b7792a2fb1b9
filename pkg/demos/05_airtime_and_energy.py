"""What does one model upload cost over the air?
================================================

A 44.73 MB update leaves a station as a handful of aggregated data frames,
each wrapped in the usual RTS/CTS/ACK handshake.  The airtime model prices
all of that deterministically; combined with the transmit power it gives
the (tiny) radio energy, and the calibration ties the much larger compute
draw to the measured run energies.
"""

from dataclasses import replace

from fedgame.empirics import load_empirical_table
from fedgame.energy import (
    EnergyParams,
    WifiParams,
    airtime,
    calibrate_energy_params,
    node_round_energy,
    tx_energy,
)

wifi, ep = WifiParams(), EnergyParams()

rate_bps = wifi.data_bits_per_symbol / wifi.he_symbol_s
print(f"PHY rate: {rate_bps / 1e6:.1f} Mb/s "
      f"({wifi.data_bits_per_symbol} bits per {wifi.he_symbol_s * 1e6:.1f} us symbol)")
print(f"payload: {wifi.model_size_bits / 8e6:.2f} MB "
      f"-> {wifi.model_size_bits / rate_bps:.3f} s of pure payload airtime")
print(f"full upload airtime: {airtime(wifi):.3f} s")
print(f"protocol overhead only: {airtime(replace(wifi, model_size_bits=0)) * 1e3:.3f} ms")
print(f"radio energy per upload: {tx_energy(wifi, ep) * 1e3:.2f} mJ "
      f"at {ep.p_tx_w * 1e3:.2f} mW")

# Radio energy is negligible next to compute and idle draw:
active = node_round_energy(True, ep, 7.0, wifi)
idle = node_round_energy(False, ep, 0.0, wifi)
print(f"\nparticipant round (7 s training): train {active.train:.0f} J + "
      f"tx {active.tx:.3f} J + idle {active.idle:.0f} J = {active.total:.0f} J")
print(f"idle round: {idle.total:.1f} J")

# The training power is not directly measured in the table; calibrating it
# against the run energies pins it down and reproduces the table closely.
cal = calibrate_energy_params(load_empirical_table("averaged"),
                              EnergyParams(), wifi, n_nodes=50)
print(f"\ncalibrated training power: {cal.params.p_hw_w:.2f} W")
print(f"worst relative error across the table: {cal.relative_errors.max():.1%}")
