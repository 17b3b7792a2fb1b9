import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly

from fedgame.empirics import DurationModel, fit_duration_model, load_empirical_table


@pytest.fixture(scope="session")
def averaged_rows():
    return load_empirical_table("averaged")


@pytest.fixture(scope="session")
def single_seed_rows():
    return load_empirical_table("single_seed")


@pytest.fixture(scope="session")
def default_dm(averaged_rows):
    """Degree-3 weighted fit of the averaged table for a 50-node population."""
    return fit_duration_model(averaged_rows, n_nodes=50)


def constant_dm(value: float, n_nodes: int = 50, floor: float = 1.0) -> DurationModel:
    return DurationModel(
        np.array([float(value)]), 0, n_nodes, floor, max(2.0 * value, floor),
        "deterministic_wls",
    )


def tabulated_dm(values, n_nodes: int | None = None) -> DurationModel:
    """Interpolating-polynomial model through the given integer-count values."""
    values = np.asarray(values, dtype=float)
    ks = np.arange(values.size)
    coef = npoly.polyfit(ks, values, values.size - 1)
    n = values.size - 1 if n_nodes is None else n_nodes
    return DurationModel(coef, values.size - 1, n, min(values) - 100.0,
                         max(values) + 100.0, "deterministic_wls")


def two_valley_dm(n_nodes: int = 50) -> DurationModel:
    """Quartic with a shallow valley near k=10 and a deeper one near k=30.

    Used to exercise multi-equilibrium landscapes that the bundled data's
    low-degree fits do not produce: d(k) = 40 + ((k-10)(k-30))^2 / 3000 - k/4.
    """
    quad = np.array([300.0, -40.0, 1.0])
    coef = npoly.polyadd(npoly.polymul(quad, quad) / 3000.0, np.array([40.0, -0.25]))
    return DurationModel(coef, 4, n_nodes, 1.0, 300.0, "deterministic_wls")
