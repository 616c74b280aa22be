"""Per-location invariants by forward propagation over a finite atom universe.

The abstract domain is conjunctions of atoms drawn from a fixed finite
universe (guard atoms plus their post-states under the owning
transition's update).  Inference runs a greatest-fixpoint iteration:
every non-initial location starts with the full universe and an atom is
dropped as soon as some incoming transition cannot prove it.  The join
is atom-set intersection, the initial location stays ``true``, and
locations without incoming transitions keep the full (typically
contradictory) universe, which is exactly what unreachable-location
pruning wants.
"""

from __future__ import annotations

from dataclasses import dataclass

from .linear import entails, project
from .model import PIP, Location, Transition, incoming
from .syntax import TRUE, Atom, Constraint, Polynomial, Update, Variable


@dataclass(frozen=True)
class InvariantMap:
    inv: dict[Location, Constraint]

    def of(self, location: Location) -> Constraint:
        return self.inv.get(location, TRUE)

    def __getitem__(self, location: Location) -> Constraint:
        return self.of(location)


def post_image_atoms(atom_in: Atom, update: Update, program_vars) -> list[Atom]:
    """Strongest linear post-state of one atom under an update.

    Encodes ``atom(old) and new_v = eta_v(old)`` and projects onto the
    new variables.  Temporaries in update images are projected away.
    Returns [] when anything goes nonlinear.
    """
    if not atom_in.is_linear():
        return []
    primed = {v: Variable(f"{v.name}__post", v.kind) for v in program_vars}
    atoms = [atom_in]
    for v in program_vars:
        image = update.image_of(v)
        if not image.is_linear():
            return []
        atoms.append(Atom(Polynomial.var(primed[v]), "=", image))
    shadow = project(Constraint(atoms), primed.values())
    if shadow is None:
        return []
    back = {primed[v]: Polynomial.var(v) for v in program_vars}
    return [a.substitute(back) for a in shadow]


def atom_universe(p: PIP) -> frozenset[Atom]:
    """Guard atoms over program variables plus their one-step post-images."""
    pv_set = set(p.program_vars)
    seeds: set[Atom] = set()
    for t in p.transitions:
        for a in t.guard.atoms:
            if a.is_linear() and a.variables() <= pv_set:
                seeds.add(a)
    universe = set(seeds)
    for t in p.transitions:
        for a in t.guard.atoms:
            if not (a.is_linear() and a.variables() <= pv_set):
                continue
            for image in post_image_atoms(a, t.update, p.program_vars):
                if image.is_trivially_true():
                    continue
                if image.variables() <= pv_set:
                    universe.add(image)
    return frozenset(universe)


def infer(p: PIP, universe: frozenset[Atom] | None = None) -> InvariantMap:
    """Greatest fixpoint of provable universe atoms at every location."""
    if universe is None:
        universe = atom_universe(p)
    current: dict[Location, set[Atom]] = {
        loc: (set() if loc == p.initial else set(universe)) for loc in p.locations
    }
    incoming_index: dict[Location, tuple[Transition, ...]] = {
        loc: incoming(p, loc) for loc in p.locations
    }
    changed = True
    while changed:
        changed = False
        for loc in p.locations:
            if loc == p.initial or not current[loc]:
                continue
            for t in incoming_index[loc]:
                premise = Constraint(
                    tuple(current[t.source]) + t.guard.atoms
                )
                kept = {
                    psi
                    for psi in current[loc]
                    if entails(premise, t.update.apply_to_atom(psi))
                }
                if kept != current[loc]:
                    current[loc] = kept
                    changed = True
    return InvariantMap({loc: Constraint(atoms) for loc, atoms in current.items()})
