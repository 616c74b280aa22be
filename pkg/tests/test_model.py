import random
from dataclasses import replace
from fractions import Fraction

import pytest

import _corpus
from pcfr.model import (
    PIP,
    GeneralTransition,
    Location,
    Transition,
    incoming,
    isomorphic,
    location_sccs,
    outgoing,
    reachable_locations,
    validate,
)
from pcfr.syntax import Atom, Constraint, Polynomial, Update, pv


def test_worked_example_validates(fig1):
    assert validate(fig1) == []


def test_broken_probability_sum_reported(fig1):
    coin = fig1.gt("coin")
    t1a = replace(coin.members[0], prob=Fraction(1, 3))
    broken = PIP(
        fig1.program_vars,
        fig1.locations,
        fig1.initial,
        [
            g if g.name != "coin" else GeneralTransition("coin", (t1a, coin.members[1]))
            for g in fig1.gts
        ],
    )
    issues = validate(broken)
    assert any("sums to 5/6" in issue for issue in issues)


def test_target_is_initial_reported(fig1):
    t0 = fig1.transition("t0")
    bad_t0 = replace(t0, target=fig1.initial)
    broken = PIP(
        fig1.program_vars,
        fig1.locations,
        fig1.initial,
        [
            g if g.name != "t0" else GeneralTransition("t0", (bad_t0,))
            for g in fig1.gts
        ],
    )
    issues = validate(broken)
    assert any("target is initial location" in issue for issue in issues)


def test_transition_in_two_gts_rejected_at_construction(fig1):
    t0 = fig1.transition("t0")
    with pytest.raises(ValueError):
        PIP(
            fig1.program_vars,
            fig1.locations,
            fig1.initial,
            list(fig1.gts) + [GeneralTransition("dup", (t0,))],
        )


def test_reachability_whole_example(fig1):
    assert {l.name for l in reachable_locations(fig1)} == {"l0", "l1", "l2"}


def test_reachability_refined_program(fig2):
    assert reachable_locations(fig2) == set(fig2.locations)


def test_reachability_excludes_orphan(fig1):
    orphan = Location("l9")
    extended = PIP(
        fig1.program_vars,
        list(fig1.locations) + [orphan],
        fig1.initial,
        fig1.gts,
    )
    assert orphan not in reachable_locations(extended)


def test_reachability_skips_unsat_guards(fig1):
    x = pv("x")
    dead_guard = Constraint([Atom(Polynomial.var(x), ">", 0), Atom(Polynomial.var(x), "<", 0)])
    lx = Location("lx")
    dead = Transition("dead", fig1.location("l0"), dead_guard, Fraction(1), Update(), lx)
    extended = PIP(
        fig1.program_vars,
        list(fig1.locations) + [lx],
        fig1.initial,
        list(fig1.gts) + [GeneralTransition("gdead", (dead,))],
    )
    assert lx not in reachable_locations(extended)


def test_reachability_monotone_under_added_transitions():
    rng = random.Random(5)
    for _ in range(20):
        p = _corpus.random_pip(rng)
        base = reachable_locations(p)
        if len(p.gts) < 2:
            continue
        smaller = PIP(p.program_vars, p.locations, p.initial, p.gts[:-1])
        assert reachable_locations(smaller) <= base


def test_outgoing_indices(fig1):
    l1, l2 = fig1.location("l1"), fig1.location("l2")
    assert {g.name for g in outgoing(fig1, l1)} == {"coin", "t2"}
    assert {g.name for g in outgoing(fig1, l2)} == {"t3"}
    assert outgoing(fig1, fig1.location("l0"))[0].name == "t0"
    assert [t.name for t in incoming(fig1, fig1.location("l0"))] == []


def test_temporaries_detected(fig1):
    assert [v.name for v in fig1.temporaries()] == ["u"]


def test_location_sccs(fig1, fig2):
    comp1 = location_sccs(fig1)
    assert comp1[fig1.location("l1")] == comp1[fig1.location("l2")]
    assert comp1[fig1.location("l0")] != comp1[fig1.location("l1")]
    comp2 = location_sccs(fig2)
    by_name = {l.name: l for l in fig2.locations}
    split = [n for n in by_name if n.startswith("l1__")][0]
    tail = [n for n in by_name if n.startswith("l2__")][0]
    assert comp2[by_name[split]] == comp2[by_name[tail]]
    assert comp2[by_name["l1"]] != comp2[by_name[split]]


def test_isomorphic_accepts_renaming(fig1):
    renamed_locs = {l.name: Location(f"n_{l.name}") for l in fig1.locations}
    gts = []
    for g in fig1.gts:
        members = tuple(
            Transition(
                f"r_{t.name}",
                renamed_locs[t.source.name],
                t.guard,
                t.prob,
                t.update,
                renamed_locs[t.target.name],
            )
            for t in g.members
        )
        gts.append(GeneralTransition(f"r_{g.name}", members))
    renamed = PIP(
        fig1.program_vars,
        [renamed_locs[l.name] for l in fig1.locations],
        renamed_locs[fig1.initial.name],
        gts,
    )
    assert isomorphic(fig1, renamed)


def test_isomorphic_rejects_structural_change(fig1, fig2):
    assert not isomorphic(fig1, fig2)
