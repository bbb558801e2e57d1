"""MARS: circular-core simulator executing N warriors round-robin.

The core is held as six parallel lists of ints (opcode, modifier, modes,
values) rather than instruction objects: the hot path is the per-timestep
execution loop, and battles at full scale run for 80,000 timesteps.

Semantics follow the ICWS'94 draft: the instruction register is snapshotted
at fetch, the A-operand is fully evaluated (pre-decrement before the
indirection, post-increment after the operand instruction is read) before
the B-operand, and all arithmetic wraps modulo the core size.  DAT and
division by zero terminate the executing process.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .redcode import Field, Instruction, Mode, Modifier, Opcode, Warrior

# The VM relies on the enum integer layout; guard against accidental edits.
assert Opcode.DAT == 0 and Opcode.NOP == 15
assert Mode.IMMEDIATE == 0 and Mode.B_POSTINC == 7
assert Modifier.A == 0 and Modifier.I == 6


class PlacementOverlap(Exception):
    pass


class TooManyWarriors(Exception):
    pass


@dataclass(frozen=True)
class MarsConfig:
    core_size: int = 8000
    max_cycles: int = 80000
    max_processes: int = 8000
    min_separation: int = 100
    max_length: int = 100

    def __post_init__(self):
        for name in ("core_size", "max_cycles", "max_processes", "min_separation", "max_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class BattleTrace:
    """Execution record: death times, spawn counts, and memory coverage.

    ``death_cycle[i]`` is the first timestep at whose end warrior ``i`` was
    recorded dead (None if still alive at ``end_cycle``).  The per-timestep
    alive mask is recovered from it on demand.
    """

    n_warriors: int
    death_cycle: list[int | None]
    end_cycle: int
    spawned_threads: list[int]
    memory_coverage: list[int]

    def alive_at(self, warrior: int, tau: int) -> bool:
        d = self.death_cycle[warrior]
        return d is None or tau < d

    def alive_mask(self) -> list[list[bool]]:
        return [
            [self.alive_at(i, tau) for tau in range(1, self.end_cycle + 1)]
            for i in range(self.n_warriors)
        ]


def min_cyclic_gap(a: int, b: int, m: int) -> int:
    d = (a - b) % m
    return min(d, m - d)


class Mars:
    """A loaded core plus per-warrior process queues; single-threaded."""

    def __init__(self, warriors: list[Warrior], placements: list[int], cfg: MarsConfig):
        n = len(warriors)
        if n < 1:
            raise TooManyWarriors("need at least one warrior")
        if len(placements) != n:
            raise ValueError("one placement per warrior required")
        m = cfg.core_size
        if n > 1 and n * (cfg.max_length + cfg.min_separation) > m:
            raise TooManyWarriors(
                f"{n} warriors cannot be separated by "
                f"{cfg.max_length + cfg.min_separation} in a core of {m}"
            )
        for w in warriors:
            if len(w.instructions) > cfg.max_length:
                raise ValueError(f"warrior {w.name!r} exceeds max length {cfg.max_length}")
        placements = [p % m for p in placements]
        if n > 1:
            gap = cfg.max_length + cfg.min_separation
            for i in range(n):
                for j in range(i + 1, n):
                    if min_cyclic_gap(placements[i], placements[j], m) < gap:
                        raise PlacementOverlap(
                            f"placements {placements[i]} and {placements[j]} closer than {gap}"
                        )

        self.cfg = cfg
        self.core_size = m
        self.warriors = list(warriors)
        self.placements = placements
        # Core cells, initialized to DAT.F #0, #0.
        self._op = [0] * m
        self._mo = [int(Modifier.F)] * m
        self._am = [0] * m
        self._av = [0] * m
        self._bm = [0] * m
        self._bv = [0] * m
        self.last_writer = [-1] * m
        self.touched = [bytearray(m) for _ in range(n)]
        self.spawned = [0] * n
        self.queues: list[deque[int]] = []
        self.death_cycle: list[int | None] = [None] * n
        self.cycle = 0
        for wi, (w, p) in enumerate(zip(warriors, placements)):
            for off, ins in enumerate(w.instructions):
                addr = (p + off) % m
                self._op[addr] = int(ins.opcode)
                self._mo[addr] = int(ins.modifier)
                self._am[addr] = int(ins.a.mode)
                self._av[addr] = ins.a.value
                self._bm[addr] = int(ins.b.mode)
                self._bv[addr] = ins.b.value
                self.last_writer[addr] = wi
            self.queues.append(deque([(p + w.start) % m]))

    # -- inspection ---------------------------------------------------------

    def instruction_at(self, addr: int) -> Instruction:
        addr %= self.core_size
        return Instruction(
            Opcode(self._op[addr]),
            Modifier(self._mo[addr]),
            Field(Mode(self._am[addr]), self._av[addr]),
            Field(Mode(self._bm[addr]), self._bv[addr]),
        )

    def core_arrays(self) -> tuple[list[int], ...]:
        """Live views of (opcode, modifier, amode, avalue, bmode, bvalue)."""
        return (self._op, self._mo, self._am, self._av, self._bm, self._bv)

    def alive_count(self) -> int:
        return sum(1 for q in self.queues if q)

    def coverage(self, warrior: int) -> int:
        t = self.touched[warrior]
        return len(t) - t.count(0)

    # -- execution ----------------------------------------------------------

    def step(self) -> int:
        """Run one timestep: each living warrior executes one instruction.

        Returns the number of warriors alive after the step.  Deaths are
        recorded against this timestep's index.
        """
        m = self.core_size
        op = self._op
        mo = self._mo
        am = self._am
        av = self._av
        bm = self._bm
        bv = self._bv
        lw = self.last_writer
        maxp = self.cfg.max_processes
        spawned = self.spawned
        self.cycle += 1
        alive = 0

        for w, q in enumerate(self.queues):
            if not q:
                continue
            touched = self.touched[w]
            pc = q.popleft()
            touched[pc] = 1
            ir_op = op[pc]
            ir_mo = mo[pc]
            ir_am = am[pc]
            ir_av = av[pc]
            ir_bm = bm[pc]
            ir_bv = bv[pc]

            # ---- A operand ----
            if ir_am == 0:
                rpa = pc
            elif ir_am == 1:
                rpa = (pc + ir_av) % m
                touched[rpa] = 1
            else:
                ind = (pc + ir_av) % m
                touched[ind] = 1
                if ir_am == 4:
                    av[ind] = (av[ind] - 1) % m
                    lw[ind] = w
                elif ir_am == 5:
                    bv[ind] = (bv[ind] - 1) % m
                    lw[ind] = w
                if ir_am == 2 or ir_am == 4 or ir_am == 6:
                    rpa = (ind + av[ind]) % m
                else:
                    rpa = (ind + bv[ind]) % m
                touched[rpa] = 1
            a_op = op[rpa]
            a_mo = mo[rpa]
            a_am = am[rpa]
            a_av = av[rpa]
            a_bm = bm[rpa]
            a_bv = bv[rpa]
            if ir_am == 6:
                ind = (pc + ir_av) % m
                av[ind] = (av[ind] + 1) % m
                lw[ind] = w
            elif ir_am == 7:
                ind = (pc + ir_av) % m
                bv[ind] = (bv[ind] + 1) % m
                lw[ind] = w

            # ---- B operand ----
            if ir_bm == 0:
                rpb = pc
            elif ir_bm == 1:
                rpb = (pc + ir_bv) % m
                touched[rpb] = 1
            else:
                ind = (pc + ir_bv) % m
                touched[ind] = 1
                if ir_bm == 4:
                    av[ind] = (av[ind] - 1) % m
                    lw[ind] = w
                elif ir_bm == 5:
                    bv[ind] = (bv[ind] - 1) % m
                    lw[ind] = w
                if ir_bm == 2 or ir_bm == 4 or ir_bm == 6:
                    rpb = (ind + av[ind]) % m
                else:
                    rpb = (ind + bv[ind]) % m
                touched[rpb] = 1
            b_op = op[rpb]
            b_mo = mo[rpb]
            b_am = am[rpb]
            b_av = av[rpb]
            b_bm = bm[rpb]
            b_bv = bv[rpb]
            if ir_bm == 6:
                ind = (pc + ir_bv) % m
                av[ind] = (av[ind] + 1) % m
                lw[ind] = w
            elif ir_bm == 7:
                ind = (pc + ir_bv) % m
                bv[ind] = (bv[ind] + 1) % m
                lw[ind] = w

            # ---- execute ----
            o = ir_op
            if o == 1:  # MOV
                x = ir_mo
                if x == 6:
                    op[rpb] = a_op
                    mo[rpb] = a_mo
                    am[rpb] = a_am
                    av[rpb] = a_av
                    bm[rpb] = a_bm
                    bv[rpb] = a_bv
                elif x == 0:
                    av[rpb] = a_av
                elif x == 1:
                    bv[rpb] = a_bv
                elif x == 2:
                    bv[rpb] = a_av
                elif x == 3:
                    av[rpb] = a_bv
                elif x == 4:
                    av[rpb] = a_av
                    bv[rpb] = a_bv
                else:  # X
                    av[rpb] = a_bv
                    bv[rpb] = a_av
                lw[rpb] = w
                touched[rpb] = 1
                q.append((pc + 1) % m)
            elif o == 0:  # DAT: process dies
                pass
            elif o == 2 or o == 3 or o == 4:  # ADD, SUB, MUL
                x = ir_mo
                if o == 2:
                    ra = (b_av + a_av) % m
                    rb = (b_bv + a_bv) % m
                    rab = (b_bv + a_av) % m
                    rba = (b_av + a_bv) % m
                elif o == 3:
                    ra = (b_av - a_av) % m
                    rb = (b_bv - a_bv) % m
                    rab = (b_bv - a_av) % m
                    rba = (b_av - a_bv) % m
                else:
                    ra = (b_av * a_av) % m
                    rb = (b_bv * a_bv) % m
                    rab = (b_bv * a_av) % m
                    rba = (b_av * a_bv) % m
                if x == 0:
                    av[rpb] = ra
                elif x == 1:
                    bv[rpb] = rb
                elif x == 2:
                    bv[rpb] = rab
                elif x == 3:
                    av[rpb] = rba
                elif x == 4 or x == 6:
                    av[rpb] = ra
                    bv[rpb] = rb
                else:  # X
                    av[rpb] = rba
                    bv[rpb] = rab
                lw[rpb] = w
                touched[rpb] = 1
                q.append((pc + 1) % m)
            elif o == 5 or o == 6:  # DIV, MOD: zero divisor kills
                x = ir_mo
                died = False
                wrote = False
                if x == 0:
                    if a_av:
                        av[rpb] = b_av // a_av if o == 5 else b_av % a_av
                        wrote = True
                    else:
                        died = True
                elif x == 1:
                    if a_bv:
                        bv[rpb] = b_bv // a_bv if o == 5 else b_bv % a_bv
                        wrote = True
                    else:
                        died = True
                elif x == 2:
                    if a_av:
                        bv[rpb] = b_bv // a_av if o == 5 else b_bv % a_av
                        wrote = True
                    else:
                        died = True
                elif x == 3:
                    if a_bv:
                        av[rpb] = b_av // a_bv if o == 5 else b_av % a_bv
                        wrote = True
                    else:
                        died = True
                elif x == 4 or x == 6:
                    if a_av:
                        av[rpb] = b_av // a_av if o == 5 else b_av % a_av
                        wrote = True
                    else:
                        died = True
                    if a_bv:
                        bv[rpb] = b_bv // a_bv if o == 5 else b_bv % a_bv
                        wrote = True
                    else:
                        died = True
                else:  # X: divisors swap fields
                    if a_bv:
                        av[rpb] = b_av // a_bv if o == 5 else b_av % a_bv
                        wrote = True
                    else:
                        died = True
                    if a_av:
                        bv[rpb] = b_bv // a_av if o == 5 else b_bv % a_av
                        wrote = True
                    else:
                        died = True
                if wrote:
                    lw[rpb] = w
                    touched[rpb] = 1
                if not died:
                    q.append((pc + 1) % m)
            elif o == 7:  # JMP
                q.append(rpa)
            elif o == 8:  # JMZ
                x = ir_mo
                if x == 0 or x == 3:
                    cond = b_av == 0
                elif x == 1 or x == 2:
                    cond = b_bv == 0
                else:
                    cond = b_av == 0 and b_bv == 0
                q.append(rpa if cond else (pc + 1) % m)
            elif o == 9:  # JMN
                x = ir_mo
                if x == 0 or x == 3:
                    cond = b_av != 0
                elif x == 1 or x == 2:
                    cond = b_bv != 0
                else:
                    cond = b_av != 0 or b_bv != 0
                q.append(rpa if cond else (pc + 1) % m)
            elif o == 10:  # DJN: decrement B-target, then test the core value
                x = ir_mo
                if x == 0 or x == 3:
                    av[rpb] = (av[rpb] - 1) % m
                    cond = av[rpb] != 0
                elif x == 1 or x == 2:
                    bv[rpb] = (bv[rpb] - 1) % m
                    cond = bv[rpb] != 0
                else:
                    av[rpb] = (av[rpb] - 1) % m
                    bv[rpb] = (bv[rpb] - 1) % m
                    cond = av[rpb] != 0 or bv[rpb] != 0
                lw[rpb] = w
                touched[rpb] = 1
                q.append(rpa if cond else (pc + 1) % m)
            elif o == 11:  # SPL: continuation first, then the new process
                q.append((pc + 1) % m)
                if len(q) < maxp:
                    q.append(rpa)
                    spawned[w] += 1
            elif o == 12 or o == 13:  # SEQ, SNE
                x = ir_mo
                if x == 0:
                    eq = a_av == b_av
                elif x == 1:
                    eq = a_bv == b_bv
                elif x == 2:
                    eq = a_av == b_bv
                elif x == 3:
                    eq = a_bv == b_av
                elif x == 4:
                    eq = a_av == b_av and a_bv == b_bv
                elif x == 5:
                    eq = a_av == b_bv and a_bv == b_av
                else:  # I: whole-instruction equality
                    eq = (
                        a_op == b_op
                        and a_mo == b_mo
                        and a_am == b_am
                        and a_av == b_av
                        and a_bm == b_bm
                        and a_bv == b_bv
                    )
                skip = eq if o == 12 else not eq
                q.append((pc + 2) % m if skip else (pc + 1) % m)
            elif o == 14:  # SLT
                x = ir_mo
                if x == 0:
                    cond = a_av < b_av
                elif x == 1:
                    cond = a_bv < b_bv
                elif x == 2:
                    cond = a_av < b_bv
                elif x == 3:
                    cond = a_bv < b_av
                elif x == 5:
                    cond = a_av < b_bv and a_bv < b_av
                else:  # F and I
                    cond = a_av < b_av and a_bv < b_bv
                q.append((pc + 2) % m if cond else (pc + 1) % m)
            else:  # NOP
                q.append((pc + 1) % m)

            if q:
                alive += 1

        cycle = self.cycle
        dc = self.death_cycle
        for w, q in enumerate(self.queues):
            if not q and dc[w] is None:
                dc[w] = cycle
        return alive

    def run(self, max_cycles: int | None = None) -> BattleTrace:
        """Step until one survivor remains (or none, for a lone warrior) or
        the cycle budget is exhausted; return the trace."""
        if max_cycles is None:
            max_cycles = self.cfg.max_cycles
        n = len(self.warriors)
        stop_at = 1 if n >= 2 else 0
        while self.cycle < max_cycles:
            alive = self.step()
            if alive <= stop_at:
                break
        return self.trace()

    def trace(self) -> BattleTrace:
        return BattleTrace(
            n_warriors=len(self.warriors),
            death_cycle=list(self.death_cycle),
            end_cycle=self.cycle,
            spawned_threads=list(self.spawned),
            memory_coverage=[self.coverage(i) for i in range(len(self.warriors))],
        )
