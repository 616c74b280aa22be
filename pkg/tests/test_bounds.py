import random
from fractions import Fraction

import pytest

import _corpus
from pcfr.bounds import (
    AffineExpr,
    CoverError,
    TaintedCertificateError,
    bound_program,
    compose_bound,
    default_cover,
    find_constant_plrf,
    find_linear_plrf,
    verify_plrf,
)
from pcfr.invariants import infer
from pcfr.model import PIP, GeneralTransition, Location, Transition
from pcfr.semantics import SeededPolicy, expected_runtime_estimate
from pcfr.syntax import TRUE, Atom, Constraint, Polynomial, Update, pv

X, Y = pv("x"), pv("y")
PX, PY = Polynomial.var(X), Polynomial.var(Y)


def _coin_gt(fig2):
    return [g for g in fig2.gts if len(g.members) == 2][0]


def _tail_gts(fig2):
    return [g.name for g in fig2.gts if g.name.split("__")[0] in ("t2", "t3")]


# --- constant ranking functions ------------------------------------------------


def test_constant_ranking_on_refined_coin(fig2):
    inv = infer(fig2)
    plrf = find_constant_plrf(fig2, inv, [_coin_gt(fig2).name])
    assert plrf is not None and not plrf.taints
    values = {loc.display(): expr for loc, expr in plrf.values.items()}
    assert values["l1"].const == 2
    assert values["l1[x=0]"].const == 0
    assert values["l0"].const == 2
    assert values["l2[x=0]"].const == 0


def test_no_constant_ranking_on_original_coin(fig1):
    # both coin members return to the same location, so no constant value
    # can drop by one in expectation
    assert find_constant_plrf(fig1, infer(fig1), ["coin"]) is None


def test_empty_targets_all_zero(fig1):
    plrf = find_constant_plrf(fig1, infer(fig1), [])
    assert all(expr.is_zero() for expr in plrf.values.values())


def test_constant_scaling_preserves_all_but_decrease_tightness(fig2):
    """Scaled-up constants stay feasible for non-increase and nonnegativity,
    so only the canonical minimal objective pins the output."""
    inv = infer(fig2)
    plrf = find_constant_plrf(fig2, inv, [_coin_gt(fig2).name])
    doubled = type(plrf)(
        {loc: expr.scale(Fraction(2)) for loc, expr in plrf.values.items()},
        plrf.targets,
        plrf.kind,
    )
    failures, taints = verify_plrf(fig2, inv, doubled)
    assert not failures and not taints  # conditions hold, but it is not minimal
    again = find_constant_plrf(fig2, inv, [_coin_gt(fig2).name])
    assert {l.name: e.const for l, e in again.values.items()} == {
        l.name: e.const for l, e in plrf.values.items()
    }


# --- linear ranking functions -----------------------------------------------


def test_linear_ranking_on_tail_loop(fig2):
    inv = infer(fig2)
    plrf = find_linear_plrf(fig2, inv, _tail_gts(fig2))
    assert plrf is not None and not plrf.taints
    values = {loc.display(): expr for loc, expr in plrf.values.items()}
    assert values["l0"].render() == "2*y"
    assert values["l1"].render() == "2*y"
    assert values["l1[x=0]"].render() == "2*y"
    assert values["l2[x=0]"].render() == "-1 + 2*y"


def test_linear_candidate_on_original_coin_is_tainted(fig1):
    plrf = find_linear_plrf(fig1, infer(fig1), ["coin"])
    assert plrf is not None
    l1_value = plrf.values[fig1.location("l1")]
    assert l1_value.render() == "2*x"
    assert "t0" in plrf.taints  # x is instantiated from the temporary u


def test_textbook_countdown_loop():
    head, start = Location("head"), Location("start")
    enter = Transition("enter", start, TRUE, Fraction(1), Update(), head)
    dec = Transition(
        "dec", head, Constraint([Atom(PY, ">", 0)]), Fraction(1), Update({Y: PY - 1}), head
    )
    p = PIP(
        [Y], [start, head], start,
        [GeneralTransition("enter", (enter,)), GeneralTransition("dec", (dec,))],
    )
    plrf = find_linear_plrf(p, infer(p), ["dec"])
    assert plrf.values[head].render() == "y"
    # enumeration agrees at small depths: the loop fires exactly y0 times
    for y0 in range(0, 6):
        est = expected_runtime_estimate(
            p, SeededPolicy(0, (0,)), {Y: y0}, 30
        )
        assert est.per_gt["dec"] == y0
        assert plrf.values[start].evaluate({Y: y0}) >= y0


def test_nonlinear_update_reported():
    from pcfr.bounds import UnsupportedProgram

    head, start = Location("h"), Location("s")
    enter = Transition("enter", start, TRUE, Fraction(1), Update(), head)
    square = Transition(
        "square", head, Constraint([Atom(PY, ">", 0)]), Fraction(1),
        Update({Y: PY * PY - 1}), head,
    )
    p = PIP(
        [Y], [start, head], start,
        [GeneralTransition("enter", (enter,)), GeneralTransition("square", (square,))],
    )
    with pytest.raises(UnsupportedProgram):
        find_linear_plrf(p, infer(p), ["square"])


# --- composition --------------------------------------------------------------


def test_default_cover_shapes(fig1, fig2):
    assert default_cover(fig1) == [("t0",), ("coin", "t2", "t3")]
    cover2 = default_cover(fig2)
    assert ("t0",) in cover2
    assert ("coin",) in cover2
    assert any(len(group) == 2 for group in cover2)


def test_worked_example_bound(fig2):
    report = bound_program(fig2)
    assert report.ok
    assert report.bound.render_total() == "3 + 2*y"
    kinds = sorted((e.kind if hasattr(e, "kind") else e.plrf.kind) for e in report.bound.entries)
    assert kinds == ["constant", "constant", "linear"]
    assert report.bound.evaluate_total({X: 0, Y: 2}) == 7
    # entries clamp at zero individually, so negative y keeps the bound sound
    assert report.bound.evaluate_total({X: 0, Y: -5}) == 3


def test_original_program_has_no_finite_bound(fig1):
    report = bound_program(fig1)
    assert not report.ok
    assert report.bound is None
    assert report.failures


def test_straight_line_charges_one_each():
    locs = [Location(f"p{i}") for i in range(4)]
    gts = []
    for i in range(3):
        t = Transition(f"w{i}", locs[i], TRUE, Fraction(1), Update(), locs[i + 1])
        gts.append(GeneralTransition(f"w{i}", (t,)))
    p = PIP([Y], locs, locs[0], gts)
    report = bound_program(p)
    assert report.ok
    assert report.bound.render_total() == "3"
    assert all(e.bound.const == 1 for e in report.bound.entries)


def test_compose_rejects_uncovered(fig2):
    inv = infer(fig2)
    coin = _coin_gt(fig2).name
    plrf = find_constant_plrf(fig2, inv, [coin])
    with pytest.raises(CoverError, match="not covered"):
        compose_bound(fig2, [((coin,), plrf)])


def test_compose_rejects_double_cover(fig2):
    inv = infer(fig2)
    coin = _coin_gt(fig2).name
    plrf = find_constant_plrf(fig2, inv, [coin])
    with pytest.raises(CoverError, match="covered by entries"):
        compose_bound(fig2, [((coin,), plrf), ((coin,), plrf)])


def test_compose_rejects_tainted_certificate(fig1):
    plrf = find_linear_plrf(fig1, infer(fig1), ["coin"])
    with pytest.raises(TaintedCertificateError, match="temporary"):
        compose_bound(fig1, [(("coin",), plrf)])


def test_certificates_reverified_independently(fig2):
    inv = infer(fig2)
    report = bound_program(fig2)
    for entry in report.bound.entries:
        failures, taints = verify_plrf(fig2, inv, entry.plrf)
        assert not failures and not taints


# --- empirical soundness -------------------------------------------------------


def test_bound_dominates_truncated_expectation(fig2):
    report = bound_program(fig2)
    for y0 in range(0, 6):
        for seed in range(3):
            policy = SeededPolicy(seed, temp_values=(1, 2))
            est = expected_runtime_estimate(fig2, policy, {X: 0, Y: y0}, 40)
            total = report.bound.evaluate_total({X: 0, Y: y0})
            assert est.lower <= total
            per_entry = {e.targets: e for e in report.bound.entries}
            for targets, entry in per_entry.items():
                count = sum(est.per_gt[name] for name in targets)
                assert count <= entry.evaluate({X: 0, Y: y0})


def test_bounds_sound_on_random_corpus():
    rng = random.Random(777)
    bounded = 0
    for _ in range(20):
        p = _corpus.random_pip(rng)
        report = bound_program(p)
        if not report.ok:
            continue
        bounded += 1
        for _ in range(3):
            sigma0 = _corpus.random_sigma0(rng, p)
            policy = SeededPolicy(rng.randint(0, 9), temp_values=(0, 1))
            est = expected_runtime_estimate(p, policy, sigma0, 12, path_cap=50_000)
            assert est.lower <= report.bound.evaluate_total(sigma0), (
                f"bound violated for {p!r} at {sigma0}"
            )
    assert bounded >= 3  # the generator produces enough bounded programs


def test_affine_expr_rendering():
    e = AffineExpr.make({Y: Fraction(2)}, Fraction(3))
    assert e.render() == "3 + 2*y"
    assert AffineExpr.make({}, 0).render() == "0"
    assert AffineExpr.make({Y: Fraction(-1, 2)}, 0).render() == "-1/2*y"
    assert AffineExpr.make({X: 1, Y: -2}, -1).render() == "-1 + x - 2*y"
