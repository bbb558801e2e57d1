"""Seeded battles: random placement, the time-shared fitness split, and
win/loss/tie outcomes averaged over seeds.

Fitness distributes N units evenly over the cycle budget: at each timestep
the living warriors share N/T.  Battles that end early are settled by
convention: a sole survivor collects the remaining share outright, and once
everyone is dead the per-step share is split equally among all N, so the
per-seed fitness vector always sums to N.
"""

from __future__ import annotations

import hashlib
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .mars import BattleTrace, Mars, MarsConfig
from .redcode import Warrior


class Infeasible(Exception):
    pass


class Outcome(Enum):
    A_WINS = "a"
    B_WINS = "b"
    TIE = "tie"


@dataclass(frozen=True)
class BattleConfig:
    mars: MarsConfig = field(default_factory=MarsConfig)
    seeds_per_battle: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if self.seeds_per_battle < 1:
            raise ValueError("seeds_per_battle must be >= 1")


@dataclass
class FitnessReport:
    """Per-warrior means over seeds plus the raw per-seed vectors."""

    mean_fitness: list[float]
    per_seed_fitness: list[list[float]]  # [seed][warrior]
    mean_spawned_threads: list[float]
    mean_memory_coverage: list[float]


def stable_u64(*parts) -> int:
    """Deterministic 64-bit hash of a mixed tuple (process-independent)."""
    h = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def random_placements(n: int, cfg: MarsConfig, seed: int) -> list[int]:
    """Uniform start addresses with cyclic pairwise separation of at least
    max_length + min_separation; deterministic in the seed."""
    m = cfg.core_size
    rng = random.Random(seed)
    if n < 1:
        raise Infeasible("need at least one placement")
    if n == 1:
        return [rng.randrange(m)]
    gap = cfg.max_length + cfg.min_separation
    slack = m - n * gap
    if slack < 0:
        raise Infeasible(f"{n} warriors with separation {gap} cannot fit a core of {m}")
    # Uniform composition of the slack into n parts (stars and bars), added
    # on top of the mandatory gap between cyclically consecutive starts.
    cuts = sorted(rng.sample(range(slack + n - 1), n - 1))
    bounds = [-1] + cuts + [slack + n - 1]
    parts = [bounds[i + 1] - bounds[i] - 1 for i in range(n)]
    starts = [rng.randrange(m)]
    for k in range(n - 1):
        starts.append((starts[-1] + gap + parts[k]) % m)
    rng.shuffle(starts)
    return starts


def fitness_from_trace(trace: BattleTrace, n: int, max_cycles: int) -> list[float]:
    """Evaluate the time-shared fitness split for one battle trace."""
    if trace.n_warriors != n:
        raise ValueError("trace warrior count mismatch")
    if trace.end_cycle > max_cycles:
        raise ValueError("trace longer than the cycle budget")
    deaths = trace.death_cycle
    unit = n / max_cycles
    fit = [0.0] * n
    boundaries = sorted(set(d for d in deaths if d is not None))
    alive_now = n
    seg_start = 1
    for e in boundaries + [max_cycles + 1]:
        seg_end = min(e - 1, max_cycles)
        if seg_start <= seg_end:
            length = seg_end - seg_start + 1
            if alive_now > 0:
                share = unit * length / alive_now
                for i in range(n):
                    d = deaths[i]
                    if d is None or d > seg_end:
                        fit[i] += share
            else:
                share = unit * length / n
                for i in range(n):
                    fit[i] += share
        if e > max_cycles:
            break
        alive_now -= sum(1 for d in deaths if d == e)
        seg_start = e
    return fit


def battle_seed(rng_seed: int, digests: list[str], index: int) -> int:
    """Seed for one battle, keyed by the unordered participant set so that
    swapping argument order replays the same simulations."""
    return stable_u64("battle", rng_seed, tuple(sorted(digests)), index)


def run_battle(warriors: list[Warrior], cfg: MarsConfig, seed: int) -> BattleTrace:
    placements = random_placements(len(warriors), cfg, seed)
    return Mars(warriors, placements, cfg).run(cfg.max_cycles)


def _battle_worker(args) -> tuple[list[float], list[int], list[int]]:
    warriors, cfg, seed = args
    trace = run_battle(warriors, cfg, seed)
    fit = fitness_from_trace(trace, len(warriors), cfg.max_cycles)
    return fit, trace.spawned_threads, trace.memory_coverage


def evaluate(warriors: list[Warrior], bc: BattleConfig, jobs: int = 1) -> FitnessReport:
    """Run seeds_per_battle independent battles and average.

    Warriors are simulated in a canonical order (sorted by content digest) so
    that the report depends only on the set of participants; results are
    mapped back to the caller's order.
    """
    n = len(warriors)
    if n < 1:
        raise ValueError("no warriors to evaluate")
    order = sorted(range(n), key=lambda i: (warriors[i].digest, i))
    canon = [warriors[i] for i in order]
    digests = [w.digest for w in canon]
    seeds = [battle_seed(bc.rng_seed, digests, s) for s in range(bc.seeds_per_battle)]
    tasks = [(canon, bc.mars, seed) for seed in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_battle_worker, tasks))
    else:
        results = [_battle_worker(t) for t in tasks]

    per_seed = []
    sum_fit = [0.0] * n
    sum_thr = [0.0] * n
    sum_cov = [0.0] * n
    for fit_c, thr_c, cov_c in results:
        fit = [0.0] * n
        for k, i in enumerate(order):
            fit[i] = fit_c[k]
            sum_thr[i] += thr_c[k]
            sum_cov[i] += cov_c[k]
        per_seed.append(fit)
        for i in range(n):
            sum_fit[i] += fit[i]
    s = bc.seeds_per_battle
    return FitnessReport(
        mean_fitness=[v / s for v in sum_fit],
        per_seed_fitness=per_seed,
        mean_spawned_threads=[v / s for v in sum_thr],
        mean_memory_coverage=[v / s for v in sum_cov],
    )


def outcome(a: Warrior, b: Warrior, bc: BattleConfig, tie_epsilon: float = 1e-9, jobs: int = 1) -> Outcome:
    """Defeat relation: strictly higher mean fitness in the 1-on-1 battle."""
    report = evaluate([a, b], bc, jobs=jobs)
    fa, fb = report.mean_fitness
    if fa > fb + tie_epsilon:
        return Outcome.A_WINS
    if fb > fa + tie_epsilon:
        return Outcome.B_WINS
    return Outcome.TIE
