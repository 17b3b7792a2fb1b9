"""Poisson-Binomial distribution of the number of participating nodes.

Each node joins a round independently with its own probability ``p_i``; the
number of participants ``m`` then follows a Poisson-Binomial distribution.
The PMF is evaluated through the discrete-Fourier (complex exponential)
closed form

    P[m] = (1 / (N+1)) * sum_n  exp(-j 2 pi n m / (N+1))
                                * prod_k [ p_k (exp(j 2 pi n / (N+1)) - 1) + 1 ]

which is exact up to floating-point round-off.  Expectation and derivative
functionals of a participant-count duration model are built on top of it.

All functions here are pure: they never mutate their inputs and hold no
module state, so returned arrays can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PmfNumericsError",
    "as_profile",
    "poibin_pmf",
    "poibin_pmf_excluding",
    "expected_duration",
    "duration_gradient",
]

# Round-off guards for the DFT evaluation.  Masses in (-NEG_CLAMP, 0) are
# clamped to zero; anything more negative, or a larger imaginary residue,
# signals a genuine numerical failure rather than benign round-off.
NEG_CLAMP = 1e-9
IMAG_TOL = 1e-7

# The O(N^2) DFT evaluation is intentional (no FFT); cap the profile size so
# a pathological call cannot silently take hours.
MAX_NODES = 10_000


class PmfNumericsError(ArithmeticError):
    """The DFT evaluation produced masses outside numerical tolerance."""


def as_profile(probs) -> np.ndarray:
    """Validate and return a participation-probability profile as float64.

    Every entry must lie in [0, 1] and the profile must be non-empty.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("profile must be a non-empty 1-D sequence")
    if p.size > MAX_NODES:
        raise ValueError(f"profile has {p.size} entries, cap is {MAX_NODES}")
    if not np.all(np.isfinite(p)):
        raise ValueError("profile entries must be finite")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("profile entries must lie in [0, 1]")
    return p


def _dft_pmf(p: np.ndarray) -> np.ndarray:
    """DFT closed form of the Poisson-Binomial PMF for probabilities ``p``.

    Accepts the empty profile, for which the count is deterministically 0.
    """
    n = p.size
    if n == 0:
        return np.ones(1)
    size = n + 1
    theta = 2.0 * np.pi / size
    z = np.exp(1j * theta * np.arange(size))          # DFT nodes on unit circle
    # prod_k [1 + p_k (z - 1)] for every node z
    factors = 1.0 + np.outer(p, z - 1.0)              # (n, size)
    terms = factors.prod(axis=0)                      # (size,)
    # mass[m] = (1/size) * sum_n terms[n] * exp(-j theta n m), in memory-bounded chunks
    raw = np.empty(size, dtype=complex)
    ns = np.arange(size)
    chunk = max(1, min(size, 4_000_000 // size))
    for start in range(0, size, chunk):
        ms = np.arange(start, min(start + chunk, size))
        phases = np.exp(-1j * theta * np.outer(ms, ns))
        raw[ms] = phases @ terms / size
    imag_max = float(np.abs(raw.imag).max())
    if imag_max > IMAG_TOL:
        raise PmfNumericsError(
            f"imaginary residue {imag_max:.3e} exceeds tolerance {IMAG_TOL:.1e}"
        )
    mass = raw.real
    low = float(mass.min())
    if low < -NEG_CLAMP:
        raise PmfNumericsError(
            f"raw mass {low:.3e} below clamping threshold -{NEG_CLAMP:.1e}"
        )
    if low < 0.0:
        mass = np.where(mass < 0.0, 0.0, mass)
        mass = mass / mass.sum()
    return mass


def poibin_pmf(profile) -> np.ndarray:
    """PMF of the participant count for the given probability profile.

    Returns an array of length ``N + 1`` whose ``m``-th entry is the
    probability that exactly ``m`` of the ``N`` nodes participate.

    Raises :class:`PmfNumericsError` if the DFT evaluation falls outside the
    round-off tolerances (imaginary residue above 1e-7, or any raw mass
    below -1e-9).  Smaller negative masses are clamped to zero and the
    vector renormalised.
    """
    return _dft_pmf(as_profile(profile))


def poibin_pmf_excluding(profile, i: int) -> np.ndarray:
    """Participant-count PMF over all nodes except node ``i``.

    The reduced profile is re-evaluated with the DFT directly rather than by
    deconvolving the full PMF, which is unstable for probabilities near 0 or
    1.  For a single-node profile this degenerates to the point mass at 0.
    """
    p = as_profile(profile)
    if not 0 <= i < p.size:
        raise IndexError(f"node index {i} out of range for profile of size {p.size}")
    return _dft_pmf(np.delete(p, i))


def _duration_values(dm, n: int) -> np.ndarray:
    """Tabulate ``dm.eval`` on the integer participant counts 0..n."""
    return np.asarray(dm.eval(np.arange(n + 1)), dtype=float)


def expected_duration(profile, dm) -> float:
    """Expected task duration ``sum_k d(k) P[m=k]`` in rounds.

    ``dm`` is any duration model exposing ``eval(k)`` on the integer counts
    0..N (see :class:`fedgame.empirics.DurationModel`).
    """
    p = as_profile(profile)
    d = _duration_values(dm, p.size)
    return float(d @ _dft_pmf(p))


def duration_gradient(profile, i: int, dm) -> float:
    """Partial derivative of :func:`expected_duration` w.r.t. ``p_i``.

    The expectation is multilinear in the profile, so the derivative has the
    closed form ``sum_k (d(k+1) - d(k)) Q_k`` where ``Q`` is the count PMF of
    the other ``N - 1`` nodes.
    """
    p = as_profile(profile)
    if not 0 <= i < p.size:
        raise IndexError(f"node index {i} out of range for profile of size {p.size}")
    d = _duration_values(dm, p.size)
    q = _dft_pmf(np.delete(p, i))
    return float(np.diff(d) @ q)
