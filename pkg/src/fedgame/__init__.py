"""Game-theoretic analytics for probabilistic federated-learning participation.

Submodules:

* :mod:`fedgame.pbdist` -- Poisson-Binomial participant-count distribution
  and duration expectation/gradient functionals.
* :mod:`fedgame.empirics` -- embedded round/energy measurements and the
  duration/energy models fitted from them.
* :mod:`fedgame.game` -- utilities, best responses, symmetric Nash
  equilibria, social optimum, Price of Anarchy, parameter sweeps.
* :mod:`fedgame.energy` -- per-node/round/run energy accounting and the
  802.11ax airtime model.
* :mod:`fedgame.simulate` -- seeded Monte-Carlo round simulator.
* :mod:`fedgame.cli` -- the ``fedgame`` command line.
"""

from . import empirics, energy, game, pbdist, simulate

__all__ = ["pbdist", "empirics", "game", "energy", "simulate", "cli"]
__version__ = "0.1.0"
