"""MAP-Elites over the (spawned threads, memory coverage) behavior space.

Cells are indexed in log space; each holds at most one elite and is only
replaced on strict fitness improvement.  A 1x1 grid degenerates into plain
hill climbing (the single-cell ablation).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .battle import BattleConfig, evaluate
from .redcode import ParseError, Warrior, emit, parse


class EmptyArchive(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Log-space discretization: axis 0 is spawned threads, axis 1 is
    memory coverage."""

    bins: tuple[int, int] = (16, 16)
    max_values: tuple[float, float] = (8000.0, 8000.0)

    def __post_init__(self):
        if any(b < 1 for b in self.bins):
            raise ValueError("bin counts must be >= 1")
        if any(v <= 0 for v in self.max_values):
            raise ValueError("max values must be > 0")


def cell_index(bd: tuple[float, float], grid: GridSpec) -> tuple[int, int]:
    """floor(bins * log2(1+x) / log2(1+max)) per axis, clamped into range."""
    coords = []
    for x, bins, mx in zip(bd, grid.bins, grid.max_values):
        x = max(0.0, float(x))
        i = int(bins * math.log2(1.0 + x) / math.log2(1.0 + mx))
        coords.append(min(max(i, 0), bins - 1))
    return tuple(coords)


@dataclass
class Elite:
    warrior: Warrior
    fitness: float
    bd: tuple[float, float]
    round: int
    iteration: int
    provenance: str


class Archive:
    """Behavior cell -> elite record, plus insertion bookkeeping."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.cells: dict[tuple[int, int], Elite] = {}
        self.inserted = 0
        self.rejected = 0
        self.invalid = 0
        self.events: list[dict] = []

    def __len__(self) -> int:
        return len(self.cells)

    def elites(self) -> list[Elite]:
        return [self.cells[c] for c in sorted(self.cells)]

    def best(self) -> Elite:
        if not self.cells:
            raise EmptyArchive("archive is empty")
        return max(self.elites(), key=lambda e: e.fitness)

    def try_insert(
        self,
        warrior: Warrior,
        fitness: float,
        bd: tuple[float, float],
        round: int = 0,
        iteration: int = -1,
        provenance: str = "",
    ) -> bool:
        """Insert iff the cell is empty or the fitness strictly improves."""
        if not math.isfinite(fitness):
            raise ValueError("fitness must be finite")
        cell = cell_index(bd, self.grid)
        incumbent = self.cells.get(cell)
        if incumbent is None or fitness > incumbent.fitness:
            self.cells[cell] = Elite(warrior, fitness, bd, round, iteration, provenance)
            self.inserted += 1
            return True
        self.rejected += 1
        return False

    def sample(self, rng: random.Random) -> Elite:
        """Uniform over occupied cells."""
        if not self.cells:
            raise EmptyArchive("archive is empty")
        cell = rng.choice(sorted(self.cells))
        return self.cells[cell]


def optimize(
    env: list[Warrior],
    init: list[Warrior],
    iterations: int,
    mutator,
    grid: GridSpec,
    bc: BattleConfig,
    rng: random.Random,
    round_index: int = 0,
    jobs: int = 1,
) -> Archive:
    """The intra-round loop: sample an elite (or generate while the archive
    is empty), mutate, evaluate the candidate in one melee against the whole
    environment, and insert on strict improvement.

    Candidate fitness and behavior come from the candidate's own metrics in
    that same evaluation.  Invalid proposals consume budget but are never
    assigned a fitness.  Identical candidates are evaluated once (evaluation
    is deterministic in the participant set).
    """
    archive = Archive(grid)
    core_size = bc.mars.core_size
    max_length = bc.mars.max_length
    cache: dict[str, tuple[float, tuple[float, float]]] = {}

    def assess(w: Warrior) -> tuple[float, tuple[float, float]]:
        key = w.digest
        if key not in cache:
            report = evaluate([w] + env, bc, jobs=jobs)
            cache[key] = (
                report.mean_fitness[0],
                (report.mean_spawned_threads[0], report.mean_memory_coverage[0]),
            )
        return cache[key]

    for w in init:
        fitness, bd = assess(w)
        ok = archive.try_insert(w, fitness, bd, round_index, -1, "init")
        archive.events.append(
            {
                "iteration": -1,
                "action": "init",
                "digest": w.digest,
                "name": w.name,
                "fitness": fitness,
                "bd": list(bd),
                "inserted": ok,
            }
        )

    for it in range(iterations):
        if len(archive) == 0:
            proposal = mutator.generate(rng)
            parent_digest = None
        else:
            parent = archive.sample(rng).warrior
            parent_digest = parent.digest
            proposal = mutator.mutate(parent, rng)
        try:
            candidate = parse(proposal.source, core_size, max_length)
        except ParseError as err:
            archive.invalid += 1
            archive.events.append(
                {
                    "iteration": it,
                    "action": "propose",
                    "parent": parent_digest,
                    "provenance": proposal.provenance,
                    "valid": False,
                    "error": str(err),
                }
            )
            continue
        if not candidate.name:
            candidate.name = f"w-{candidate.digest[:8]}"
        fitness, bd = assess(candidate)
        ok = archive.try_insert(candidate, fitness, bd, round_index, it, proposal.provenance)
        archive.events.append(
            {
                "iteration": it,
                "action": "propose",
                "parent": parent_digest,
                "provenance": proposal.provenance,
                "valid": True,
                "digest": candidate.digest,
                "name": candidate.name,
                "fitness": fitness,
                "bd": list(bd),
                "inserted": ok,
            }
        )
    return archive


# --------------------------------------------------------------------------
# Snapshot persistence (line-delimited records with a format-version header)
# --------------------------------------------------------------------------

SNAPSHOT_FORMAT = "drq-archive"
SNAPSHOT_MAJOR = 1


def snapshot_lines(archive: Archive) -> list[str]:
    header = {
        "format": SNAPSHOT_FORMAT,
        "major": SNAPSHOT_MAJOR,
        "minor": 0,
        "bins": list(archive.grid.bins),
        "max_values": list(archive.grid.max_values),
        "inserted": archive.inserted,
        "rejected": archive.rejected,
        "invalid": archive.invalid,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for cell in sorted(archive.cells):
        e = archive.cells[cell]
        lines.append(
            json.dumps(
                {
                    "cell": list(cell),
                    "name": e.warrior.name,
                    "digest": e.warrior.digest,
                    "fitness": e.fitness,
                    "bd": list(e.bd),
                    "round": e.round,
                    "iteration": e.iteration,
                    "provenance": e.provenance,
                    "source": emit(e.warrior),
                },
                sort_keys=True,
            )
        )
    return lines


def save_snapshot(archive: Archive, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(snapshot_lines(archive)) + "\n")


def load_snapshot(path, core_size: int, max_length: int) -> Archive:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty snapshot")
    header = json.loads(lines[0])
    if header.get("format") != SNAPSHOT_FORMAT or header.get("major") != SNAPSHOT_MAJOR:
        raise ValueError(f"{path}: unsupported snapshot format {header.get('format')!r} "
                         f"major {header.get('major')!r}")
    grid = GridSpec(bins=tuple(header["bins"]), max_values=tuple(header["max_values"]))
    archive = Archive(grid)
    for line in lines[1:]:
        rec = json.loads(line)
        warrior = parse(rec["source"], core_size, max_length, default_name=rec["name"])
        elite = Elite(
            warrior,
            rec["fitness"],
            tuple(rec["bd"]),
            rec.get("round", 0),
            rec.get("iteration", -1),
            rec.get("provenance", ""),
        )
        archive.cells[tuple(rec["cell"])] = elite
    archive.inserted = header.get("inserted", 0)
    archive.rejected = header.get("rejected", 0)
    archive.invalid = header.get("invalid", 0)
    return archive
