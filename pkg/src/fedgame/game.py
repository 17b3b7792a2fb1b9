"""Participation game: utilities, best responses, equilibria and efficiency.

Each of ``N`` nodes commits to a participation probability and receives

    u_i = -E[duration] - gamma * ln(AoI(p_i)) - c * p_i

where the expected duration is taken over the Poisson-Binomial participant
count, ``AoI(p) = 1/p - 1/2`` is the expected age of the node's last
contribution under Bernoulli participation, ``gamma`` weights that freshness
incentive and ``c`` prices the node's own participation effort.

Equilibrium search exploits symmetry: candidates are the zeros of the
per-node marginal utility along the symmetric diagonal plus the boundary
strategies, each kept only if it is verified to be a global (possibly
weakly indifferent) best response against the others.  The social optimum
maximises the symmetric per-node utility; per-node and total objectives
coincide up to the factor ``N``.

Costs are negated utilities, so the Price of Anarchy compares the worst
(most expensive) equilibrium against the optimum and is >= 1 whenever both
costs are positive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import pbdist
from .empirics import DurationModel

__all__ = [
    "NoEquilibriumError",
    "NonPositiveCostError",
    "GameConfig",
    "EquilibriumResult",
    "PoAReport",
    "SweepRow",
    "aoi",
    "utility",
    "marginal_utility",
    "best_response",
    "solve_symmetric_ne",
    "solve_social_optimum",
    "price_of_anarchy",
    "sweep",
    "best_gamma",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

# Values this close to the grid maximum count as ties, which resolve to the
# smallest probability; without it, float noise on an exactly flat utility
# (constant duration model, no incentive) would defeat the tie-break.
_TIE_RTOL = 1e-12

# Relative slack used when checking that a candidate is a global best
# response.  Weak equilibria (exactly flat own-utility, the generic case
# without the freshness incentive) pass with gap ~0; genuine profitable
# deviations exceed it by orders of magnitude.
_BR_UTILITY_RTOL = 1e-6


class NoEquilibriumError(RuntimeError):
    """The solver found no equilibrium for this configuration."""


class NonPositiveCostError(RuntimeError):
    """A compared strategy has non-positive cost, so the cost ratio is undefined."""


@dataclass(frozen=True)
class GameConfig:
    """One game instance: population size, prices, and solver knobs."""

    n_nodes: int
    c: float
    gamma: float
    dm: DurationModel
    grid_points: int = 2001
    refine_tol: float = 1e-8
    p_min: float = 1e-6

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.c < 0.0 or self.gamma < 0.0:
            raise ValueError("c and gamma must be non-negative")
        if self.grid_points < 11:
            raise ValueError("grid_points must be >= 11")
        if not 0.0 < self.p_min < 1.0:
            raise ValueError("p_min must lie strictly between 0 and 1")
        if self.dm.n_nodes < self.n_nodes:
            raise ValueError("duration model not defined up to n_nodes participants")

    @property
    def p_low(self) -> float:
        """Lower edge of the strategy set: 0 without the incentive, else p_min."""
        return self.p_min if self.gamma > 0.0 else 0.0

    @property
    def grid_spacing(self) -> float:
        return (1.0 - self.p_low) / (self.grid_points - 1)


@dataclass(frozen=True)
class EquilibriumResult:
    p_star: float
    utility_at_ne: float
    residual: float          # marginal utility at p_star
    kind: str                # "interior", "boundary_zero" or "boundary_one"

    @property
    def cost(self) -> float:
        return -self.utility_at_ne


@dataclass(frozen=True)
class PoAReport:
    cost_worst_ne: float
    cost_optimum: float
    poa: float
    ne_set: tuple[EquilibriumResult, ...]
    p_opt: float


@dataclass(frozen=True)
class SweepRow:
    c: float
    gamma: float
    p_ne_worst: float | None
    p_opt: float
    u_ne: float | None
    u_opt: float
    poa: float | None
    flags: str = ""


def aoi(p: float) -> float:
    """Expected age of information ``1/p - 1/2`` under Bernoulli(p) updates."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"AoI undefined for participation probability {p}")
    return 1.0 / p - 0.5


def _check_profile(profile, cfg: GameConfig) -> np.ndarray:
    p = pbdist.as_profile(profile)
    if p.size != cfg.n_nodes:
        raise ValueError(f"profile has {p.size} entries, game has {cfg.n_nodes}")
    return p


def _dvals(cfg: GameConfig) -> np.ndarray:
    return np.asarray(cfg.dm.eval(np.arange(cfg.n_nodes + 1)), dtype=float)


def _incentive(p_i: float, cfg: GameConfig) -> float:
    """-gamma * ln(AoI), with the log argument clamped at p_min."""
    if cfg.gamma == 0.0:
        return 0.0
    if p_i == 0.0:
        raise ValueError("participation probability 0 is outside the strategy set "
                         "when the freshness incentive is active")
    return -cfg.gamma * math.log(aoi(min(max(p_i, cfg.p_min), 1.0)))


def utility(profile, i: int, cfg: GameConfig) -> float:
    """Utility of node ``i`` under the full probability profile."""
    p = _check_profile(profile, cfg)
    p_i = float(p[i])
    exp_dur = pbdist.expected_duration(p, cfg.dm)
    return -exp_dur + _incentive(p_i, cfg) - cfg.c * p_i


def marginal_utility(profile, i: int, cfg: GameConfig) -> float:
    """Analytic partial derivative of ``utility`` with respect to ``p_i``.

    Duration enters through the closed-form Poisson-Binomial gradient; the
    incentive contributes ``2 gamma / (p_i (2 - p_i))``.  At the boundaries
    the incentive term is evaluated at the clamped probability.
    """
    p = _check_profile(profile, cfg)
    if not 0 <= i < p.size:
        raise IndexError(f"node index {i} out of range")
    dgrad = pbdist.duration_gradient(p, i, cfg.dm)
    inc = 0.0
    if cfg.gamma > 0.0:
        pe = min(max(float(p[i]), cfg.p_min), 1.0)
        inc = 2.0 * cfg.gamma / (pe * (2.0 - pe))
    return -dgrad + inc - cfg.c


def _golden_max(fun, a: float, b: float, tol: float) -> float:
    """Golden-section maximiser of a scalar function on [a, b]."""
    dist = b - a
    if dist <= tol:
        return 0.5 * (a + b)
    n = int(math.ceil(math.log(tol / dist) / math.log(_INV_PHI)))
    c = a + _INV_PHI_SQ * dist
    d = a + _INV_PHI * dist
    yc, yd = fun(c), fun(d)
    for _ in range(max(n - 1, 0)):
        if yc > yd:
            b, d, yd = d, c, yc
            dist *= _INV_PHI
            c = a + _INV_PHI_SQ * dist
            yc = fun(c)
        else:
            a, c, yc = c, d, yd
            dist *= _INV_PHI
            d = a + _INV_PHI * dist
            yd = fun(d)
    return 0.5 * (a + d) if yc > yd else 0.5 * (c + b)


def _argmax_ties_low(vals: np.ndarray) -> int:
    """Index of the first value within round-off of the maximum."""
    top = float(vals.max())
    return int(np.argmax(vals >= top - _TIE_RTOL * (1.0 + abs(top))))


def _prefer(p_a: float, u_a: float, p_b: float, u_b: float) -> float:
    """Point with the larger utility; round-off ties go to the smaller p."""
    eps = _TIE_RTOL * (1.0 + max(abs(u_a), abs(u_b)))
    if u_a > u_b + eps:
        return float(p_a)
    if u_b > u_a + eps:
        return float(p_b)
    return float(min(p_a, p_b))


def _own_utility_fn(q: np.ndarray, cfg: GameConfig):
    """Node utility as a function of its own probability, others fixed.

    ``q`` is the participant-count PMF of the other nodes.  The duration
    expectation is linear in the own probability:
    ``E[D](p_i) = p_i E_q[d(m+1)] + (1 - p_i) E_q[d(m)]``.
    """
    d = _dvals(cfg)
    a = float(q @ d[1:])
    b = float(q @ d[:-1])

    def u(p_i: float) -> float:
        return -(p_i * a + (1.0 - p_i) * b) + _incentive(p_i, cfg) - cfg.c * p_i

    return u


def best_response(i: int, others_fixed, cfg: GameConfig) -> float:
    """Utility-maximising own probability against a fixed profile.

    ``others_fixed`` is a full profile whose entry ``i`` is ignored.  The
    maximiser is located by a grid scan refined with a golden-section search
    in the best bracket; exact ties resolve to the smaller probability.
    """
    p = _check_profile(others_fixed, cfg)
    if not 0 <= i < p.size:
        raise IndexError(f"node index {i} out of range")
    u = _own_utility_fn(pbdist.poibin_pmf_excluding(p, i), cfg)
    grid = np.linspace(cfg.p_low, 1.0, cfg.grid_points)
    vals = np.array([u(x) for x in grid])
    j = _argmax_ties_low(vals)
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    refined = _golden_max(u, lo, hi, cfg.refine_tol)
    return _prefer(refined, u(refined), float(grid[j]), float(vals[j]))


def _symmetric_profile(p: float, cfg: GameConfig) -> np.ndarray:
    return np.full(cfg.n_nodes, p)


def symmetric_utility(p: float, cfg: GameConfig) -> float:
    """Common utility when every node plays ``p``."""
    return utility(_symmetric_profile(p, cfg), 0, cfg)


def _verified(p_star: float, kind: str, cfg: GameConfig) -> EquilibriumResult | None:
    """Keep ``p_star`` only if it is a global (possibly weak) best response.

    The direct check matches the best response to within ten grid spacings.
    Without the incentive the own-utility is linear in the own probability,
    so at an interior zero of the marginal every strategy is exactly
    indifferent and the numerical best response lands on an arbitrary
    endpoint; such weak equilibria are accepted through the utility gap
    instead of the location match.
    """
    sym = _symmetric_profile(p_star, cfg)
    br = best_response(0, sym, cfg)
    accept = abs(br - p_star) <= 10.0 * cfg.grid_spacing
    u_star = utility(sym, 0, cfg)
    if not accept:
        deviated = sym.copy()
        deviated[0] = br
        gap = utility(deviated, 0, cfg) - u_star
        accept = gap <= _BR_UTILITY_RTOL * (1.0 + abs(u_star))
    if not accept:
        return None
    residual = marginal_utility(sym, 0, cfg)
    return EquilibriumResult(p_star=float(p_star), utility_at_ne=u_star,
                             residual=residual, kind=kind)


def solve_symmetric_ne(cfg: GameConfig) -> list[EquilibriumResult]:
    """All symmetric Nash equilibria found on the strategy interval.

    Interior candidates are sign changes of the symmetric marginal utility,
    refined by bisection to ``refine_tol``; the boundaries (0 only when the
    incentive is off, 1 always) are candidates too.  Every candidate must
    pass the global best-response verification.  An empty list means the
    solver found no equilibrium; callers that need one should treat that as
    a distinguished outcome rather than an error of this function.
    """
    def mu(p: float) -> float:
        return marginal_utility(_symmetric_profile(p, cfg), 0, cfg)

    grid = np.linspace(cfg.p_low, 1.0, cfg.grid_points)
    mu_grid = np.array([mu(p) for p in grid])

    candidates: list[tuple[float, str]] = []
    # Exact zeros: keep only the left edge of each zero run, so a flat
    # marginal (constant duration model) yields one candidate, not 2001.
    for idx in np.flatnonzero(mu_grid == 0.0):
        if idx == 0 or mu_grid[idx - 1] != 0.0:
            candidates.append((float(grid[idx]), "interior"))
    # Sign changes: bisect down to refine_tol.
    for idx in np.flatnonzero(mu_grid[:-1] * mu_grid[1:] < 0.0):
        a, b = float(grid[idx]), float(grid[idx + 1])
        fa = mu_grid[idx]
        while b - a > cfg.refine_tol:
            m = 0.5 * (a + b)
            fm = mu(m)
            if fa * fm <= 0.0:
                b = m
            else:
                a, fa = m, fm
        candidates.append((0.5 * (a + b), "interior"))

    if cfg.gamma == 0.0:
        candidates.append((0.0, "boundary_zero"))
    candidates.append((1.0, "boundary_one"))

    results: list[EquilibriumResult] = []
    for p_star, kind in candidates:
        if kind == "interior" and not cfg.p_low < p_star < 1.0:
            continue
        res = _verified(p_star, kind, cfg)
        if res is None:
            continue
        if any(abs(res.p_star - r.p_star) <= 0.5 * cfg.grid_spacing for r in results):
            continue
        results.append(res)
    results.sort(key=lambda r: r.p_star)
    return results


def solve_social_optimum(cfg: GameConfig) -> tuple[float, float]:
    """Symmetric probability maximising the common utility, with its value."""
    grid = np.linspace(cfg.p_low, 1.0, cfg.grid_points)
    vals = np.array([symmetric_utility(p, cfg) for p in grid])
    j = _argmax_ties_low(vals)
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    refined = _golden_max(lambda p: symmetric_utility(p, cfg), lo, hi, cfg.refine_tol)
    u_ref = symmetric_utility(refined, cfg)
    p_opt = _prefer(refined, u_ref, float(grid[j]), float(vals[j]))
    return p_opt, symmetric_utility(p_opt, cfg)


def _worst(ne_set) -> EquilibriumResult:
    """Most expensive equilibrium; cost ties resolve to the smaller p."""
    worst = ne_set[0]
    for r in ne_set[1:]:
        if r.cost > worst.cost:
            worst = r
    return worst


def price_of_anarchy(cfg: GameConfig) -> PoAReport:
    """Cost ratio of the worst equilibrium to the social optimum.

    Raises :class:`NoEquilibriumError` when the solver returns no
    equilibrium and :class:`NonPositiveCostError` when either compared cost
    is non-positive (the ratio is then meaningless in this regime).
    """
    ne_set = solve_symmetric_ne(cfg)
    if not ne_set:
        raise NoEquilibriumError(
            f"no symmetric equilibrium for c={cfg.c}, gamma={cfg.gamma}"
        )
    p_opt, u_opt = solve_social_optimum(cfg)
    worst = _worst(ne_set)
    cost_ne = worst.cost
    cost_opt = -u_opt
    if cost_ne <= 0.0 or cost_opt <= 0.0:
        raise NonPositiveCostError(
            f"non-positive cost (ne={cost_ne:.4g}, opt={cost_opt:.4g}); "
            "cost ratio undefined in this regime"
        )
    return PoAReport(
        cost_worst_ne=cost_ne,
        cost_optimum=cost_opt,
        poa=cost_ne / cost_opt,
        ne_set=tuple(ne_set),
        p_opt=p_opt,
    )


def _sweep_cell(cfg_base: GameConfig, c: float, gamma: float) -> SweepRow:
    cfg = replace(cfg_base, c=c, gamma=gamma)
    p_opt, u_opt = solve_social_optimum(cfg)
    ne_set = solve_symmetric_ne(cfg)
    if not ne_set:
        return SweepRow(c, gamma, None, p_opt, None, u_opt, None, "no_ne")
    worst = _worst(ne_set)
    cost_ne, cost_opt = worst.cost, -u_opt
    if cost_ne <= 0.0 or cost_opt <= 0.0:
        return SweepRow(c, gamma, worst.p_star, p_opt, worst.utility_at_ne,
                        u_opt, None, "poa_undefined")
    return SweepRow(c, gamma, worst.p_star, p_opt, worst.utility_at_ne,
                    u_opt, cost_ne / cost_opt, "")


def sweep(cfg_base: GameConfig, c_values, gamma_values, workers: int = 1) -> list[SweepRow]:
    """Equilibrium/optimum/PoA table over a grid of prices and incentives.

    One row per ``(c, gamma)`` pair in input order.  Cells without an
    equilibrium or with an undefined cost ratio carry a sentinel flag and
    empty numeric fields instead of fabricated values.  Rows are
    independent; ``workers > 1`` computes them in a thread pool with output
    order fixed by the input grid.
    """
    c_values = list(c_values)
    gamma_values = list(gamma_values)
    if not c_values or not gamma_values:
        raise ValueError("sweep needs non-empty c and gamma value lists")
    cells = [(c, g) for c in c_values for g in gamma_values]
    if workers <= 1:
        return [_sweep_cell(cfg_base, c, g) for c, g in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_cell, cfg_base, c, g) for c, g in cells]
        return [f.result() for f in futures]


def best_gamma(cfg_base: GameConfig, gamma_values, at_c: float) -> float:
    """Incentive weight giving the highest worst-equilibrium participation.

    Gammas whose game has no equilibrium are skipped; exact participation
    ties resolve to the smaller gamma.
    """
    gamma_values = list(gamma_values)
    if not gamma_values:
        raise ValueError("best_gamma needs a non-empty gamma list")
    best_g: float | None = None
    best_p = -math.inf
    for g in sorted(gamma_values):
        cfg = replace(cfg_base, c=at_c, gamma=g)
        ne_set = solve_symmetric_ne(cfg)
        if not ne_set:
            continue
        p_star = _worst(ne_set).p_star
        if p_star > best_p:
            best_p, best_g = p_star, g
    if best_g is None:
        raise NoEquilibriumError("no gamma in the list admits an equilibrium")
    return float(best_g)
