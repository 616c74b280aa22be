"""Program model: locations, guarded probabilistic transitions, and the
general transitions that group probability-weighted branches sharing one
source location and guard.

Construction is permissive; :func:`validate` reports every violated
well-formedness rule instead of failing, so malformed inputs surface as
diagnostics.  Validated programs are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .linear import Satisfiability, constraint_satisfiability
from .syntax import Constraint, Update, Variable


@dataclass(frozen=True)
class Location:
    """A control location; refined programs carry a base name and label."""

    name: str
    base: str | None = field(default=None, compare=False)
    label: Constraint | None = field(default=None, compare=False)

    def display(self) -> str:
        if self.label is not None and not self.label.is_true():
            return f"{self.base}[{self.label.render(compact=True)}]"
        return self.name

    def __str__(self) -> str:
        return self.display()


#: Synthetic absorbing location entered when no transition applies.
TERMINAL = Location("<terminal>")


@dataclass(frozen=True)
class Transition:
    name: str
    source: Location
    guard: Constraint
    prob: Fraction
    update: Update
    target: Location

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class GeneralTransition:
    name: str
    members: tuple[Transition, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"general transition '{self.name}' has no members")

    @property
    def source(self) -> Location:
        return self.members[0].source

    @property
    def guard(self) -> Constraint:
        return self.members[0].guard

    def total_probability(self) -> Fraction:
        return sum((t.prob for t in self.members), Fraction(0))

    def __iter__(self):
        return iter(self.members)

    def __str__(self) -> str:
        return self.name


class PIP:
    """A probabilistic integer program over a fixed set of program variables."""

    def __init__(
        self,
        program_vars: Iterable[Variable],
        locations: Iterable[Location],
        initial: Location,
        gts: Iterable[GeneralTransition],
    ):
        self.program_vars = tuple(sorted(set(program_vars)))
        self.locations = tuple(locations)
        self.initial = initial
        self.gts = tuple(gts)
        self.transitions = tuple(t for g in self.gts for t in g.members)
        self._temporaries: tuple[Variable, ...] | None = None
        self._by_name = {t.name: t for t in self.transitions}
        self._gt_by_name = {g.name: g for g in self.gts}
        self._loc_by_name = {l.name: l for l in self.locations}
        names = [t.name for t in self.transitions]
        if len(set(names)) != len(names):
            raise ValueError("transition names must be unique")
        if len(self._gt_by_name) != len(self.gts):
            raise ValueError("general transition names must be unique")
        if len(self._loc_by_name) != len(self.locations):
            raise ValueError("location names must be unique")

    # -- lookups ---------------------------------------------------------

    def transition(self, name: str) -> Transition:
        return self._by_name[name]

    def gt(self, name: str) -> GeneralTransition:
        return self._gt_by_name[name]

    def location(self, name: str) -> Location:
        return self._loc_by_name[name]

    def gt_of(self, t: Transition) -> GeneralTransition:
        for g in self.gts:
            if t in g.members:
                return g
        raise KeyError(t.name)

    def temporaries(self) -> tuple[Variable, ...]:
        """All non-program variables mentioned by guards or updates."""
        if self._temporaries is None:
            pvs = set(self.program_vars)
            seen: set[Variable] = set()
            for t in self.transitions:
                seen |= t.guard.variables()
                seen |= t.update.variables_used()
            self._temporaries = tuple(sorted(v for v in seen if v not in pvs))
        return self._temporaries

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PIP)
            and self.program_vars == other.program_vars
            and self.locations == other.locations
            and self.initial == other.initial
            and self.gts == other.gts
        )

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"PIP(vars={[v.name for v in self.program_vars]}, "
            f"locations={[l.name for l in self.locations]}, "
            f"gts={[g.name for g in self.gts]})"
        )


def validate(p: PIP) -> list[str]:
    """All well-formedness violations; an empty list means the program is ok."""
    issues: list[str] = []
    loc_set = set(p.locations)
    if p.initial not in loc_set:
        issues.append(f"initial location '{p.initial.name}' not among locations")
    pv_set = set(p.program_vars)
    for v in pv_set:
        if not v.is_program:
            issues.append(f"program variable '{v.name}' declared with kind temporary")
    seen_members: set[str] = set()
    for g in p.gts:
        total = g.total_probability()
        if total != 1:
            issues.append(f"gt {{{_member_names(g)}}} sums to {total}")
        sources = {t.source for t in g.members}
        if len(sources) != 1:
            issues.append(f"gt {{{_member_names(g)}}} members have differing sources")
        guards = {t.guard for t in g.members}
        if len(guards) != 1:
            issues.append(f"gt {{{_member_names(g)}}} members have differing guards")
        for t in g.members:
            if t.name in seen_members:
                issues.append(f"transition '{t.name}' appears in more than one gt")
            seen_members.add(t.name)
            if t.prob <= 0 or t.prob > 1:
                issues.append(f"transition '{t.name}' has probability {t.prob}")
            if t.target == p.initial:
                issues.append(f"transition '{t.name}': target is initial location")
            if t.source not in loc_set:
                issues.append(f"transition '{t.name}': unknown source '{t.source.name}'")
            if t.target not in loc_set:
                issues.append(f"transition '{t.name}': unknown target '{t.target.name}'")
            extra = t.update.assigned() - pv_set
            if extra:
                names = ", ".join(sorted(v.name for v in extra))
                issues.append(f"transition '{t.name}': update assigns unknown variables {names}")
    return issues


def _member_names(g: GeneralTransition) -> str:
    return ",".join(t.name for t in g.members)


def outgoing(p: PIP, location: Location) -> tuple[GeneralTransition, ...]:
    return tuple(g for g in p.gts if g.source == location)


def incoming(p: PIP, location: Location) -> tuple[Transition, ...]:
    return tuple(t for t in p.transitions if t.target == location)


def location_sccs(p: PIP) -> dict[Location, int]:
    """Strongly connected components of the location graph (Tarjan).

    Returns a component id per location; ids follow discovery order.
    """
    edges: dict[Location, list[Location]] = {loc: [] for loc in p.locations}
    for t in p.transitions:
        edges[t.source].append(t.target)
    index: dict[Location, int] = {}
    low: dict[Location, int] = {}
    on_stack: set[Location] = set()
    stack: list[Location] = []
    comp: dict[Location, int] = {}
    counter = [0]
    comp_counter = [0]

    def strongconnect(root: Location) -> None:
        work = [(root, iter(edges[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = counter[0]
                    counter[0] += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(edges[succ])))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp[member] = comp_counter[0]
                    if member == node:
                        break
                comp_counter[0] += 1

    for loc in p.locations:
        if loc not in index:
            strongconnect(loc)
    return comp


def isomorphic(a: PIP, b: PIP) -> bool:
    """Structural equality modulo renaming of locations and transitions.

    A bijection between location sets must carry every general
    transition of ``a`` onto one of ``b`` with identical guards,
    probabilities and updates, and must map initial to initial.
    Backtracking over signature-compatible candidates; exact, intended
    for desk-sized programs.
    """
    if (
        len(a.locations) != len(b.locations)
        or len(a.transitions) != len(b.transitions)
        or len(a.gts) != len(b.gts)
        or a.program_vars != b.program_vars
    ):
        return False

    def gt_shape(g: GeneralTransition):
        return (g.guard, tuple(sorted((t.prob, t.update.render()) for t in g.members)))

    if sorted(map(gt_shape, a.gts), key=repr) != sorted(map(gt_shape, b.gts), key=repr):
        return False

    def signature(p: PIP, loc: Location):
        outs = sorted(repr(gt_shape(g)) for g in p.gts if g.source == loc)
        ins = sorted(
            repr((t.guard, t.prob, t.update.render()))
            for t in p.transitions
            if t.target == loc
        )
        return (loc == p.initial, tuple(outs), tuple(ins))

    sig_a = {l: signature(a, l) for l in a.locations}
    sig_b = {l: signature(b, l) for l in b.locations}
    candidates = {
        la: [lb for lb in b.locations if sig_b[lb] == sig_a[la]]
        for la in a.locations
    }
    order = sorted(a.locations, key=lambda l: len(candidates[l]))

    def edges(p: PIP):
        out = {}
        for g in p.gts:
            key = (g.source, g.guard)
            out.setdefault(key, []).append(
                sorted((t.prob, t.update.render(), t.target.name) for t in g.members)
            )
        return out

    def check(mapping: dict[Location, Location]) -> bool:
        renamed = {}
        for g in a.gts:
            key = (mapping[g.source].name, g.guard)
            renamed.setdefault(key, []).append(
                sorted(
                    (t.prob, t.update.render(), mapping[t.target].name)
                    for t in g.members
                )
            )
        actual = {}
        for g in b.gts:
            key = (g.source.name, g.guard)
            actual.setdefault(key, []).append(
                sorted((t.prob, t.update.render(), t.target.name) for t in g.members)
            )
        return {k: sorted(v) for k, v in renamed.items()} == {
            k: sorted(v) for k, v in actual.items()
        }

    def backtrack(i: int, mapping: dict[Location, Location], used: set[Location]) -> bool:
        if i == len(order):
            return check(mapping)
        la = order[i]
        for lb in candidates[la]:
            if lb in used:
                continue
            mapping[la] = lb
            used.add(lb)
            if backtrack(i + 1, mapping, used):
                return True
            used.discard(lb)
            del mapping[la]
        return False

    return backtrack(0, {}, set())


def reachable_locations(p: PIP) -> set[Location]:
    """Locations reachable from the initial one via transitions whose guard
    is satisfiable on its own (a state-insensitive over-approximation)."""
    reached = {p.initial}
    frontier = [p.initial]
    while frontier:
        loc = frontier.pop()
        for g in p.gts:
            if g.source != loc:
                continue
            if constraint_satisfiability(g.guard) is Satisfiability.UNSAT:
                continue
            for t in g.members:
                if t.target not in reached:
                    reached.add(t.target)
                    frontier.append(t.target)
    return reached
