"""Does the round simulator agree with the closed-form expectation?
===================================================================

The static-draw mode draws one participant count and reads the duration
off the fitted model, so over many replications its mean must converge to
the analytic Poisson-Binomial expectation.  The progress mode instead
accumulates per-round contributions and is the more behaviourally faithful
picture; both are compared against the measured table here.
"""

import numpy as np

from fedgame.empirics import fit_duration_model, load_empirical_table
from fedgame.energy import EnergyParams, WifiParams
from fedgame.pbdist import expected_duration
from fedgame.simulate import SimConfig, monte_carlo

rows = load_empirical_table("averaged")
dm = fit_duration_model(rows, n_nodes=50)
ep, wifi = EnergyParams(), WifiParams()

print("p     analytic  static(mc)  progress(mc)  measured d  measured E   mc E")
for p in (0.2, 0.5, 0.69):
    profile = np.full(50, p)
    analytic = expected_duration(profile, dm)
    static = monte_carlo(SimConfig(profile=profile, dm=dm, ep=ep, wifi=wifi,
                                   mode="static_draw", seed=7, reps=4000))
    progress = monte_carlo(SimConfig(profile=profile, dm=dm, ep=ep, wifi=wifi,
                                     mode="progress", seed=7, reps=400))
    row = min(rows, key=lambda r: abs(r.p - p))
    print(f"{p:<5} {analytic:8.2f}  {static.mean_rounds:9.2f}  "
          f"{progress.mean_rounds:11.2f}  {row.d_mean:9.2f}  {row.e_mean:9.1f}  "
          f"{progress.mean_energy_wh:7.1f}")

print("""
The static means sit within Monte-Carlo noise of the analytic values, and
with the calibrated power constants the simulated energies land close to
the measured watt-hours.
""")

# Identical seeds give bit-identical runs regardless of worker count.
cfg = SimConfig(profile=np.full(50, 0.5), dm=dm, ep=ep, wifi=wifi,
                mode="progress", seed=42, reps=32)
a = monte_carlo(cfg, workers=1)
b = monte_carlo(cfg, workers=4)
print("summary identical across worker counts:", a == b)
