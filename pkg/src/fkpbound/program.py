"""Shared-memory program structures and the fkp2013 instance family.

A structure is the tuple (events, preserved program order, write values,
guards) over a single address here, plus the assertion being checked.  The
operational oracle enumerates every sequentially consistent interleaving and
simulates it on one memory cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator


class ProgramError(Exception):
    pass


class UnsupportedInOracle(ProgramError):
    pass


class Kind(enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class Event:
    id: int
    kind: Kind
    address: int
    thread: int
    name: str

    @property
    def is_read(self) -> bool:
        return self.kind is Kind.READ

    @property
    def is_write(self) -> bool:
        return self.kind is Kind.WRITE


@dataclass(frozen=True)
class ConstZero:
    pass


@dataclass(frozen=True)
class SuccOfRead:
    read: int


WriteValueTerm = ConstZero | SuccOfRead


@dataclass(frozen=True)
class ProgramStructure:
    events: tuple[Event, ...]
    ppo: frozenset[tuple[int, int]]  # generator pairs only
    val: dict[int, WriteValueTerm] = field(hash=False)
    guard: dict[int, bool] = field(hash=False)
    n: int
    assertion: tuple[int, int]  # (read id, bound k): the goal is value > k

    @property
    def reads(self) -> list[Event]:
        return [e for e in self.events if e.is_read]

    @property
    def writes(self) -> list[Event]:
        return [e for e in self.events if e.is_write]

    @property
    def assert_read(self) -> int:
        return self.assertion[0]

    @property
    def bound(self) -> int:
        return self.assertion[1]

    @property
    def addresses(self) -> set[int]:
        return {e.address for e in self.events}

    def event(self, name: str) -> Event:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def name(self, event_id: int) -> str:
        return self.events[event_id].name

    def with_bound(self, k: int) -> "ProgramStructure":
        """Same program, assertion bound replaced (used to build satisfiable mutants)."""
        return replace(self, assertion=(self.assert_read, k))

    def ppo_closure(self) -> set[tuple[int, int]]:
        succ: dict[int, set[int]] = {e.id: set() for e in self.events}
        for a, b in self.ppo:
            succ.setdefault(a, set()).add(b)
        closure = set()
        for start in succ:
            stack, seen = list(succ[start]), set()
            while stack:
                x = stack.pop()
                if x in seen:
                    continue
                seen.add(x)
                closure.add((start, x))
                stack.extend(succ.get(x, ()))
        return closure

    # fkp-specific accessors; ids follow the layout of build_fkp.
    @property
    def w_init(self) -> int:
        return 0

    def r(self, i: int) -> int:
        return 2 * i - 1

    def w(self, i: int) -> int:
        return 2 * i


def build_fkp(n: int) -> ProgramStructure:
    """The fkp2013 program with ``n`` incrementer threads.

    Event ids: w_init = 0, r_i = 2i-1, w_i = 2i, r_assert = 2n+1.
    Thread 0 holds w_init and r_assert; thread i holds r_i and w_i.
    """
    if n < 1:
        raise ProgramError("n must be at least 1")
    events = [Event(0, Kind.WRITE, 0, 0, "winit")]
    for i in range(1, n + 1):
        events.append(Event(2 * i - 1, Kind.READ, 0, i, f"r{i}"))
        events.append(Event(2 * i, Kind.WRITE, 0, i, f"w{i}"))
    ra = 2 * n + 1
    events.append(Event(ra, Kind.READ, 0, 0, "rassert"))
    ppo = set()
    for i in range(1, n + 1):
        ppo.add((0, 2 * i - 1))
        ppo.add((2 * i - 1, 2 * i))
    ppo.add((0, ra))
    val: dict[int, WriteValueTerm] = {0: ConstZero()}
    for i in range(1, n + 1):
        val[2 * i] = SuccOfRead(2 * i - 1)
    return ProgramStructure(
        events=tuple(events),
        ppo=frozenset(ppo),
        val=val,
        guard={e.id: True for e in events},
        n=n,
        assertion=(ra, n),
    )


def validate_structure(p: ProgramStructure) -> list[str]:
    """Return human-readable diagnostics; an empty list means well formed."""
    diags = []
    ids = [e.id for e in p.events]
    if ids != list(range(len(ids))):
        diags.append("event ids not dense")
    idset = set(ids)
    if any(a == b for a, b in p.ppo):
        diags.append("ppo not irreflexive")
    if any(a not in idset or b not in idset for a, b in p.ppo):
        diags.append("ppo references unknown event")
    elif any(a == b for a, b in p.ppo_closure()):
        diags.append("ppo not acyclic")
    writes = {e.id for e in p.events if e.is_write}
    reads = {e.id for e in p.events if e.is_read}
    if writes | reads != idset or writes & reads:
        diags.append("events not partitioned into reads and writes")
    if set(p.val) - writes:
        diags.append("val defined on non-write events")
    if not writes <= set(p.val):
        diags.append("val not total on writes")
    for term in p.val.values():
        if isinstance(term, SuccOfRead) and term.read not in reads:
            diags.append("val refers to a non-read event")
            break
    if set(p.guard) != idset or not all(g is True for g in p.guard.values()):
        diags.append("guards must be the constant True on every event")
    if p.assert_read not in reads:
        diags.append("assertion read does not exist")
    return diags


def linear_extensions(p: ProgramStructure) -> Iterator[list[int]]:
    """All linear extensions of ppo, in lexicographic order of event ids."""
    ids = [e.id for e in p.events]
    preds = {i: set() for i in ids}
    for a, b in p.ppo:
        preds[b].add(a)
    placed: list[int] = []
    done: set[int] = set()

    def rec():
        if len(placed) == len(ids):
            yield list(placed)
            return
        for e in ids:
            if e not in done and preds[e] <= done:
                placed.append(e)
                done.add(e)
                yield from rec()
                done.discard(e)
                placed.pop()

    yield from rec()


@dataclass(frozen=True)
class SafetyReport:
    interleaving_count: int
    violations: int
    reachable_values: frozenset[int]


def _write_value(term: WriteValueTerm, read_vals: dict[int, int]) -> int:
    if isinstance(term, ConstZero):
        return 0
    return read_vals[term.read] + 1


def check_safety_operational(p: ProgramStructure) -> SafetyReport:
    """Simulate every linear extension of ppo under sequential consistency.

    The memory cell starts at 0.  A violation is an interleaving where the
    assertion read observes a value above the bound.  Interleavings and
    simulation share one depth-first walk so prefixes are simulated once.
    """
    if len(p.addresses) != 1:
        raise UnsupportedInOracle("the operational oracle simulates a single memory cell")
    diags = validate_structure(p)
    if diags:
        raise ProgramError("; ".join(diags))
    ids = [e.id for e in p.events]
    preds = {i: set() for i in ids}
    for a, b in p.ppo:
        preds[b].add(a)
    total = 0
    bad = 0
    seen_values: set[int] = set()
    done: set[int] = set()
    read_vals: dict[int, int] = {}
    ra, k = p.assertion

    def rec(mem: int, depth: int):
        nonlocal total, bad
        if depth == len(ids):
            total += 1
            v = read_vals[ra]
            seen_values.add(v)
            if v > k:
                bad += 1
            return
        for e in ids:
            if e in done or not preds[e] <= done:
                continue
            done.add(e)
            ev = p.events[e]
            if ev.is_read:
                read_vals[e] = mem
                rec(mem, depth + 1)
                del read_vals[e]
            else:
                rec(_write_value(p.val[e], read_vals), depth + 1)
            done.discard(e)

    rec(0, 0)
    return SafetyReport(total, bad, frozenset(seen_values))
