"""Embedded round/energy measurements and the models fitted from them.

The bundled dataset records, for a 50-node federated training deployment,
the number of global rounds to convergence ``d`` and the total energy drawn
``E`` (watt-hours) at symmetric participation probabilities ``p`` between
0.1 and 0.7.  Two variants are embedded verbatim: a single-seed run and the
mean/standard deviation over repeated seeded runs.

Two models are fitted from the rows:

* :class:`DurationModel` -- a clamped polynomial mapping the participant
  count ``k`` to expected rounds ``d(k)``, using ``k = N * p`` as the bridge
  between the probability-indexed table and the count-indexed model.
* :class:`EnergyLinearModel` -- ordinary least squares of energy on rounds,
  exploiting the near-linear energy-vs-rounds relationship in the data.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "FitError",
    "EmpiricalRow",
    "DurationModel",
    "EnergyLinearModel",
    "load_empirical_table",
    "fit_duration_model",
    "eval_duration",
    "fit_energy_linear",
    "rows_to_csv",
    "rows_from_csv",
    "SIGMA_FLOOR",
    "DEFAULT_DEGREE",
    "DEFAULT_RESAMPLES",
]

# Weight floor (rounds): keeps the tightest rows (sigma as low as 0.82) and
# the zero-sigma single-seed rows from dominating the weighted fit.
SIGMA_FLOOR = 0.5

DEFAULT_DEGREE = 3
DEFAULT_RESAMPLES = 100

# (p, energy_wh, rounds) from the single-seed run.
_SINGLE_SEED = [
    (0.100, 1056.81, 74), (0.125, 1060.25, 73), (0.130, 830.90, 57),
    (0.150, 1073.33, 73), (0.160, 962.90, 65), (0.175, 600.42, 40),
    (0.200, 861.87, 57), (0.225, 691.04, 45), (0.250, 638.27, 41),
    (0.300, 720.66, 45), (0.350, 641.78, 39), (0.400, 691.90, 41),
    (0.410, 811.87, 48), (0.420, 647.21, 38), (0.430, 736.57, 43),
    (0.440, 686.69, 40), (0.450, 827.07, 48), (0.460, 884.16, 51),
    (0.470, 698.03, 40), (0.480, 700.97, 40), (0.490, 686.84, 39),
    (0.500, 689.25, 39), (0.510, 656.18, 37), (0.520, 660.68, 37),
    (0.530, 663.44, 37), (0.540, 702.24, 39), (0.550, 741.38, 41),
    (0.560, 781.14, 43), (0.570, 692.42, 38), (0.580, 659.89, 36),
    (0.590, 662.56, 36), (0.600, 627.10, 34), (0.610, 666.57, 36),
    (0.620, 707.24, 38), (0.630, 804.00, 43), (0.640, 865.10, 46),
    (0.650, 716.03, 38), (0.660, 698.39, 37), (0.670, 816.24, 43),
    (0.680, 724.07, 38), (0.690, 612.04, 32), (0.700, 711.64, 37),
]

# (p, d_mean, d_std, e_mean, e_std) averaged over seeds.
_AVERAGED = [
    (0.100, 74.50, 11.47, 1072.14, 123.43),
    (0.125, 68.00, 13.09, 1005.97, 140.49),
    (0.130, 56.00, 5.29, 862.84, 60.19),
    (0.150, 62.50, 8.81, 950.26, 100.14),
    (0.160, 57.25, 6.13, 887.80, 61.31),
    (0.175, 51.00, 9.42, 797.18, 145.67),
    (0.200, 51.00, 4.55, 816.96, 37.86),
    (0.225, 45.50, 3.70, 747.44, 54.52),
    (0.250, 51.00, 9.56, 803.96, 132.64),
    (0.300, 46.75, 2.75, 768.25, 41.50),
    (0.350, 43.00, 5.23, 724.40, 73.21),
    (0.400, 43.25, 2.22, 734.25, 33.22),
    (0.410, 44.50, 5.32, 758.88, 62.29),
    (0.420, 42.75, 4.11, 725.76, 59.45),
    (0.430, 42.75, 3.30, 734.69, 35.41),
    (0.440, 43.00, 4.08, 732.95, 49.07),
    (0.450, 43.50, 4.43, 751.96, 61.11),
    (0.460, 42.75, 5.56, 750.14, 89.77),
    (0.470, 39.50, 3.11, 698.25, 33.15),
    (0.480, 39.25, 6.70, 696.30, 71.74),
    (0.490, 40.67, 2.89, 709.99, 33.48),
    (0.500, 40.00, 0.82, 704.10, 11.11),
    (0.510, 41.75, 3.30, 719.96, 43.71),
    (0.520, 42.50, 7.33, 729.13, 81.90),
    (0.530, 40.00, 3.16, 703.01, 37.23),
    (0.540, 41.75, 4.27, 726.11, 44.34),
    (0.550, 39.50, 2.65, 706.41, 35.12),
    (0.560, 40.25, 2.99, 719.03, 48.51),
    (0.570, 40.50, 4.43, 712.93, 46.15),
    (0.580, 46.25, 14.15, 771.83, 152.41),
    (0.590, 39.00, 2.58, 694.74, 27.70),
    (0.600, 39.00, 4.24, 691.24, 51.19),
    (0.610, 37.75, 2.87, 682.34, 30.05),
    (0.620, 39.75, 5.56, 708.59, 58.31),
    (0.630, 37.75, 3.50, 697.93, 70.71),
    (0.640, 39.75, 5.91, 726.61, 102.68),
    (0.650, 39.00, 2.16, 702.75, 23.75),
    (0.660, 40.75, 4.99, 719.79, 48.48),
    (0.670, 40.00, 4.69, 725.12, 75.90),
    (0.680, 41.25, 4.03, 728.89, 36.60),
    (0.690, 37.50, 3.87, 676.75, 45.17),
    (0.700, 38.25, 5.50, 696.29, 59.19),
]


class FitError(ValueError):
    """A regression could not be carried out on the given rows."""


@dataclass(frozen=True)
class EmpiricalRow:
    """One measurement row: symmetric participation probability ``p``,
    rounds to convergence and energy in Wh (means and, for the averaged
    table, standard deviations)."""

    p: float
    d_mean: float
    d_std: float
    e_mean: float
    e_std: float
    source: str  # "single_seed" or "averaged"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if self.d_mean < 1.0:
            raise ValueError(f"d_mean={self.d_mean} below one round")
        if self.e_mean <= 0.0:
            raise ValueError(f"e_mean={self.e_mean} not positive")
        if self.d_std < 0.0 or self.e_std < 0.0:
            raise ValueError("standard deviations must be non-negative")
        if self.source not in ("single_seed", "averaged"):
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class DurationModel:
    """Clamped polynomial ``d(k)``: expected rounds given ``k`` participants.

    ``coefficients`` are in ascending powers of ``k``.  Evaluation is defined
    on ``k`` in ``[0, n_nodes]`` and clamped into ``[d_floor, d_cap]``; the
    cap gives a finite duration to participant counts the data never
    observed (notably ``k = 0``).
    """

    coefficients: np.ndarray
    degree: int
    n_nodes: int
    d_floor: float
    d_cap: float
    fit_mode: str  # "deterministic_wls" or "stochastic_resample"
    seed: int | None = None
    resamples: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if self.d_cap < self.d_floor:
            raise ValueError("d_cap below d_floor")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")

    def eval(self, k):
        """Clamped polynomial value at participant count ``k`` (scalar or array)."""
        karr = np.asarray(k, dtype=float)
        if np.any(karr < 0.0) or np.any(karr > self.n_nodes):
            raise ValueError(
                f"participant count outside model domain [0, {self.n_nodes}]"
            )
        val = npoly.polyval(karr, self.coefficients)
        out = np.clip(val, self.d_floor, self.d_cap)
        return float(out) if np.isscalar(k) or karr.ndim == 0 else out

    def shifted(self, offset: float) -> "DurationModel":
        """Model with ``offset`` added to every duration value (cap moves too)."""
        coef = self.coefficients.copy()
        coef[0] += offset
        return DurationModel(
            coef, self.degree, self.n_nodes, self.d_floor + offset,
            self.d_cap + offset, self.fit_mode, self.seed, self.resamples,
        )


@dataclass(frozen=True)
class EnergyLinearModel:
    """Straight line mapping rounds to total energy in Wh."""

    slope: float
    intercept: float

    def __post_init__(self):
        if self.slope <= 0.0:
            raise ValueError(f"energy slope {self.slope} not positive")

    def predict(self, rounds):
        return self.slope * np.asarray(rounds, dtype=float) + self.intercept


def load_empirical_table(which: str = "averaged") -> list[EmpiricalRow]:
    """Return the embedded dataset, ``which`` in {"single_seed", "averaged"}.

    Values are reproduced verbatim from the source measurements; single-seed
    rows carry zero standard deviations.
    """
    if which == "single_seed":
        return [
            EmpiricalRow(p, d, 0.0, e, 0.0, "single_seed")
            for p, e, d in _SINGLE_SEED
        ]
    if which == "averaged":
        return [
            EmpiricalRow(p, dm, ds, em, es, "averaged")
            for p, dm, ds, em, es in _AVERAGED
        ]
    raise ValueError(f"unknown table {which!r}")


def _polyfit_or_raise(x, y, degree, w=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", np.exceptions.RankWarning)
        try:
            return npoly.polyfit(x, y, degree, w=w)
        except (np.exceptions.RankWarning, np.linalg.LinAlgError) as exc:
            raise FitError(f"rank-deficient design matrix: {exc}") from exc


def fit_duration_model(
    rows,
    n_nodes: int,
    degree: int = DEFAULT_DEGREE,
    mode: str = "deterministic_wls",
    seed: int | None = None,
    resamples: int = DEFAULT_RESAMPLES,
) -> DurationModel:
    """Fit the participant-count duration polynomial from measurement rows.

    Each row's probability is mapped to the expected participant count
    ``k = n_nodes * p``.  ``deterministic_wls`` solves a weighted least
    squares on ``(k, d_mean)`` with weights ``1 / max(d_std, SIGMA_FLOOR)**2``.
    ``stochastic_resample`` instead draws ``resamples`` points per row from
    ``Normal(d_mean, d_std)`` with the given seed and solves an unweighted
    least squares on the sampled cloud; with a fixed seed the result is
    bit-reproducible.

    The clamp cap is set to twice the largest observed mean duration so that
    unobserved counts (in particular ``k = 0``) stay finite.
    """
    rows = list(rows)
    if degree < 0:
        raise FitError(f"degree must be >= 0, got {degree}")
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if len(rows) < degree + 1:
        raise FitError(
            f"need at least {degree + 1} rows for degree {degree}, got {len(rows)}"
        )
    k = np.array([n_nodes * r.p for r in rows])
    d = np.array([r.d_mean for r in rows])
    s = np.array([r.d_std for r in rows])
    d_cap = 2.0 * float(d.max())

    if mode == "deterministic_wls":
        # numpy's ``w`` multiplies residuals, so pass 1/sigma for 1/sigma^2 weights
        coef = _polyfit_or_raise(k, d, degree, w=1.0 / np.maximum(s, SIGMA_FLOOR))
        return DurationModel(coef, degree, n_nodes, 1.0, d_cap, mode)
    if mode == "stochastic_resample":
        if seed is None:
            raise FitError("stochastic_resample requires a seed")
        rng = np.random.default_rng(seed)
        xs = np.repeat(k, resamples)
        ys = rng.normal(np.repeat(d, resamples), np.repeat(s, resamples))
        coef = _polyfit_or_raise(xs, ys, degree)
        return DurationModel(coef, degree, n_nodes, 1.0, d_cap, mode, seed, resamples)
    raise ValueError(f"unknown fit mode {mode!r}")


def eval_duration(dm: DurationModel, k) -> float:
    """Duration model value at ``k``; thin functional wrapper over ``dm.eval``."""
    return dm.eval(k)


def fit_energy_linear(rows) -> EnergyLinearModel:
    """Ordinary least squares of mean energy (Wh) on mean rounds."""
    rows = list(rows)
    if len(rows) < 2:
        raise FitError("need at least two rows for the energy line")
    d = np.array([r.d_mean for r in rows])
    e = np.array([r.e_mean for r in rows])
    if np.ptp(d) == 0.0:
        raise FitError("all round counts identical; energy line is singular")
    coef = _polyfit_or_raise(d, e, 1)
    return EnergyLinearModel(slope=float(coef[1]), intercept=float(coef[0]))


# CSV schema shared by the library and the command line: UTF-8, '.' decimal,
# LF line endings.
CSV_HEADER = "p,d_mean,d_std,e_mean,e_std,source"


def rows_to_csv(rows) -> str:
    """Serialise rows in the export schema."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(
            f"{r.p:.10g},{r.d_mean:.10g},{r.d_std:.10g},"
            f"{r.e_mean:.10g},{r.e_std:.10g},{r.source}\n"
        )
    return buf.getvalue()


def rows_from_csv(text: str) -> list[EmpiricalRow]:
    """Parse rows in the export schema, reporting the offending line on error."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            rows.append(
                EmpiricalRow(
                    p=float(parts[0]),
                    d_mean=float(parts[1]),
                    d_std=float(parts[2]),
                    e_mean=float(parts[3]),
                    e_std=float(parts[4]),
                    source=parts[5].strip(),
                )
            )
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return rows
