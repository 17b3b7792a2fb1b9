"""How many nodes show up in a round?
====================================

Each node joins a training round independently with its own probability,
so the participant count follows a Poisson-Binomial distribution.  This
script walks through the count PMF, the leave-one-out PMF used for
best-response derivatives, and the expectation functionals built on top.
"""

import numpy as np

from fedgame.pbdist import (
    duration_gradient,
    expected_duration,
    poibin_pmf,
    poibin_pmf_excluding,
)
from fedgame.empirics import fit_duration_model, load_empirical_table

# A small heterogeneous fleet: two keen nodes, two reluctant ones.
fleet = np.array([0.9, 0.8, 0.3, 0.1])
pmf = poibin_pmf(fleet)
print("fleet probabilities:", fleet)
for m, mass in enumerate(pmf):
    print(f"  P[{m} participants] = {mass:.4f}")

# The mean of the count equals the sum of the probabilities.
print("mean participants:", float(pmf @ np.arange(fleet.size + 1)))
print("sum of probabilities:", fleet.sum())

# Removing one node gives the distribution the *others* generate; this is
# what a node differentiates against when weighing its own participation.
others = poibin_pmf_excluding(fleet, 0)
print("count PMF excluding node 0:", np.round(others, 4))

# With a fitted duration model d(k), the expected number of rounds to
# convergence is the d-weighted mean of the count PMF, and its derivative
# with respect to one node's probability has a closed form.
dm = fit_duration_model(load_empirical_table("averaged"), n_nodes=50)
population = np.full(50, 0.5)
print("expected rounds at p=0.5 everywhere:",
      round(expected_duration(population, dm), 3))
print("marginal effect of node 0 joining more often:",
      round(duration_gradient(population, 0, dm), 4), "rounds per unit prob")
