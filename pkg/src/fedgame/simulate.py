"""Seeded Monte-Carlo simulation of the participation process.

Every round, each node joins independently with its own probability; the
run's length comes from one of two convergence stand-ins:

* ``static_draw`` -- a single participant-count draw in the first round
  fixes the duration through the fitted model, and the remaining rounds are
  replayed only for their energy.  Its mean duration converges to the
  analytic Poisson-Binomial expectation, which makes it the
  validation-against-analytics mode.
* ``progress`` -- each round with ``k`` participants contributes ``1/d(k)``
  of the remaining work (empty rounds contribute ``1/d_cap``), and the run
  converges when the accumulated progress reaches one.

Reproducibility: a run is a pure function of its config; replication seeds
are spawned deterministically from the master seed, so summaries do not
depend on execution order or worker count.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .empirics import DurationModel
from .energy import EnergyParams, WifiParams, tx_energy
from .pbdist import as_profile

__all__ = [
    "SimConfig",
    "SimResult",
    "MonteCarloSummary",
    "simulate_run",
    "run_many",
    "monte_carlo",
    "results_to_csv",
]

# Guards against float round-off in the progress accumulator: a run whose
# contributions sum to exactly one must not take an extra round.
_PROGRESS_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    profile: np.ndarray
    dm: DurationModel
    ep: EnergyParams
    wifi: WifiParams
    mode: str = "progress"         # "static_draw" or "progress"
    seed: int = 0
    max_rounds: int | None = None  # defaults to 10 * d_cap
    reps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "profile", as_profile(self.profile))
        if self.mode not in ("static_draw", "progress"):
            raise ValueError(f"unknown simulation mode {self.mode!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.dm.n_nodes < self.profile.size:
            raise ValueError("duration model not defined up to the profile size")

    @property
    def effective_max_rounds(self) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        return int(math.ceil(10.0 * self.dm.d_cap))


@dataclass(frozen=True)
class SimResult:
    rounds: int
    energy_total_j: float
    per_node_energy_j: np.ndarray
    participants_per_round: np.ndarray
    truncated: bool

    @property
    def energy_total_wh(self) -> float:
        return self.energy_total_j / 3600.0


@dataclass(frozen=True)
class MonteCarloSummary:
    reps: int
    completed: int
    mean_rounds: float
    std_rounds: float
    mean_energy_wh: float
    std_energy_wh: float
    truncation_rate: float
    valid: bool


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _energy_accumulate(cfg: SimConfig, part: np.ndarray, tt: np.ndarray,
                       etx: float) -> np.ndarray:
    """Per-node energy (J) for a block of rounds.

    ``part`` is a (rounds, N) participation mask and ``tt`` the matching
    training times; both follow the per-node accounting of the energy
    module (train + upload + idle for participants, idle-only otherwise).
    """
    ep = cfg.ep
    active = ep.p_hw_w * tt + etx + ep.p_idle_w * (ep.t_round_s - tt)
    idle_only = ep.p_idle_w * ep.t_round_s
    per_round = np.where(part, active, idle_only)
    return per_round.sum(axis=0)


def simulate_run(cfg: SimConfig, rng: np.random.Generator | None = None) -> SimResult:
    """One seeded run; bit-identical for identical config and generator state."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    probs = cfg.profile
    n = probs.size
    cap = cfg.effective_max_rounds
    etx = tx_energy(cfg.wifi, cfg.ep)
    lo, hi = cfg.ep.t_train_min_s, cfg.ep.t_train_max_s

    if cfg.mode == "static_draw":
        first = rng.random(n) < probs
        m = int(first.sum())
        target = _round_half_up(cfg.dm.eval(m))
        truncated = target > cap
        rounds = min(target, cap)
        part = np.empty((rounds, n), dtype=bool)
        part[0] = first
        if rounds > 1:
            part[1:] = rng.random((rounds - 1, n)) < probs
        tt = rng.uniform(lo, hi, size=(rounds, n))
        per_node = _energy_accumulate(cfg, part, tt, etx)
        counts = part.sum(axis=1)
    else:
        progress = 0.0
        rows, tts, counts_list = [], [], []
        truncated = True
        rounds = cap
        for t in range(1, cap + 1):
            joined = rng.random(n) < probs
            tts.append(rng.uniform(lo, hi, size=n))
            rows.append(joined)
            k = int(joined.sum())
            counts_list.append(k)
            progress += 1.0 / cfg.dm.eval(k) if k > 0 else 1.0 / cfg.dm.d_cap
            if progress >= 1.0 - _PROGRESS_EPS:
                rounds, truncated = t, False
                break
        part = np.array(rows)
        tt = np.array(tts)
        per_node = _energy_accumulate(cfg, part, tt, etx)
        counts = np.array(counts_list)

    return SimResult(
        rounds=rounds,
        energy_total_j=float(per_node.sum()),
        per_node_energy_j=per_node,
        participants_per_round=counts.astype(int),
        truncated=truncated,
    )


def run_many(cfg: SimConfig, reps: int | None = None, workers: int = 1) -> list[SimResult]:
    """Independent replications with per-rep generators spawned from the seed."""
    reps = cfg.reps if reps is None else reps
    if reps < 1:
        raise ValueError("reps must be >= 1")
    children = np.random.SeedSequence(cfg.seed).spawn(reps)
    if workers <= 1:
        return [simulate_run(cfg, np.random.default_rng(s)) for s in children]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(simulate_run, cfg, np.random.default_rng(s)) for s in children
        ]
        return [f.result() for f in futures]


def monte_carlo(cfg: SimConfig, reps: int | None = None, workers: int = 1) -> MonteCarloSummary:
    """Summary statistics over completed replications.

    Truncated runs are excluded from the moments and reported through
    ``truncation_rate``; a summary with every run truncated is flagged
    invalid and carries NaN moments.
    """
    results = run_many(cfg, reps, workers)
    return summarize(results)


def summarize(results) -> MonteCarloSummary:
    results = list(results)
    done = [r for r in results if not r.truncated]
    rate = 1.0 - len(done) / len(results)
    if not done:
        return MonteCarloSummary(
            reps=len(results), completed=0, mean_rounds=math.nan,
            std_rounds=math.nan, mean_energy_wh=math.nan,
            std_energy_wh=math.nan, truncation_rate=1.0, valid=False,
        )
    rounds = np.array([r.rounds for r in done], dtype=float)
    wh = np.array([r.energy_total_wh for r in done])
    return MonteCarloSummary(
        reps=len(results),
        completed=len(done),
        mean_rounds=float(rounds.mean()),
        std_rounds=float(rounds.std()),
        mean_energy_wh=float(wh.mean()),
        std_energy_wh=float(wh.std()),
        truncation_rate=rate,
        valid=True,
    )


def results_to_csv(results, summary: MonteCarloSummary | None = None) -> str:
    """Per-rep rows plus one summary row, in the export schema."""
    if summary is None:
        summary = summarize(results)
    buf = io.StringIO()
    buf.write("rep,rounds,energy_wh,truncated\n")
    for i, r in enumerate(results):
        buf.write(f"{i},{r.rounds},{r.energy_total_wh:.10g},{int(r.truncated)}\n")
    buf.write(
        f"summary,{summary.mean_rounds:.10g},{summary.mean_energy_wh:.10g},"
        f"{summary.truncation_rate:.10g}\n"
    )
    return buf.getvalue()
