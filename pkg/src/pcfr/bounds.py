"""Expected-runtime bounds via probabilistic linear ranking functions.

A ranking function assigns every location a constant or affine value
over the program variables such that, under the location invariant and
guard, (i) every target general transition decreases the value by at
least one in expectation, (ii) no other general transition increases it
in expectation, (iii) the value is nonnegative wherever a target is
enabled, and (iv) stays nonnegative right after a target fires.  Then
``max(0, value at the initial location)`` bounds the expected number of
target firings, and summing one such certificate per cover entry bounds
the whole program's expected runtime.

Synthesis turns each universally quantified condition into the
existence of nonnegative Farkas multipliers over the premise rows and
solves the resulting system with the exact rational simplex.  Every
certificate is then re-verified through the independent elimination
engine.  Non-increase conditions whose composed value would mention a
temporary variable (the value of the target location depends on a
variable the transition overwrites with scheduler input) cannot be
encoded as affine facts; they are skipped during synthesis, re-checked
against the solved certificate, and poison bound composition if they
remain unproven.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Sequence

from . import ratlp
from .invariants import InvariantMap, infer
from .linear import expression_bounds
from .model import PIP, GeneralTransition, Location, location_sccs
from .syntax import Constraint, Polynomial, Update, Variable


class UnsupportedProgram(ValueError):
    """Raised when a construct cannot be encoded (nonlinear update or guard)."""


class CoverError(ValueError):
    """The cover is not a partition of the general transitions."""


class TaintedCertificateError(ValueError):
    """A cover entry's ranking function has unproven non-increase conditions."""


_LIT = None  # literal key inside linear forms over template unknowns


@dataclass(frozen=True)
class AffineExpr:
    """Affine expression with rational coefficients over variables."""

    coeffs: tuple[tuple[Variable, Fraction], ...]
    const: Fraction

    @staticmethod
    def make(coeffs: Mapping[Variable, Fraction | int], const: Fraction | int = 0):
        cleaned = tuple(
            sorted(
                ((v, Fraction(c)) for v, c in coeffs.items() if c),
                key=lambda vc: vc[0].name,
            )
        )
        return AffineExpr(cleaned, Fraction(const))

    @staticmethod
    def constant(value: Fraction | int) -> "AffineExpr":
        return AffineExpr((), Fraction(value))

    def variables(self) -> frozenset[Variable]:
        return frozenset(v for v, _ in self.coeffs)

    def evaluate(self, state: Mapping[Variable, int]) -> Fraction:
        return self.const + sum(
            (c * state[v] for v, c in self.coeffs), Fraction(0)
        )

    def scale(self, factor: Fraction) -> "AffineExpr":
        return AffineExpr.make({v: c * factor for v, c in self.coeffs}, self.const * factor)

    def __add__(self, other: "AffineExpr") -> "AffineExpr":
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs:
            coeffs[v] = coeffs.get(v, Fraction(0)) + c
        return AffineExpr.make(coeffs, self.const + other.const)

    def __sub__(self, other: "AffineExpr") -> "AffineExpr":
        return self + other.scale(Fraction(-1))

    def compose(self, update: Update) -> "AffineExpr":
        """The expression's value after the update (substitution).

        Raises UnsupportedProgram when an update image is nonlinear.
        The result may mention temporary variables.
        """
        coeffs: dict[Variable, Fraction] = {}
        const = self.const
        for v, c in self.coeffs:
            image = update.image_of(v)
            if not image.is_linear():
                raise UnsupportedProgram(
                    f"nonlinear update image for '{v.name}'"
                )
            lin, b = image.linear_form()
            const += c * b
            for w, a in lin.items():
                coeffs[w] = coeffs.get(w, Fraction(0)) + c * a
        return AffineExpr.make(coeffs, const)

    def scaled_integer_poly(self) -> Polynomial:
        """The expression times the LCD of its coefficients, as an integer
        polynomial (same sign everywhere)."""
        lcd = self.const.denominator
        for _, c in self.coeffs:
            lcd = lcd * c.denominator // gcd(lcd, c.denominator)
        poly = Polynomial.const(int(self.const * lcd))
        for v, c in self.coeffs:
            poly = poly + int(c * lcd) * Polynomial.var(v)
        return poly

    def is_zero(self) -> bool:
        return not self.coeffs and self.const == 0

    def render(self) -> str:
        parts: list[str] = []
        if self.const or not self.coeffs:
            parts.append(str(self.const))
        for v, c in self.coeffs:
            if c < 0:
                sign, mag = "-", -c
            else:
                sign, mag = "+", c
            body = v.name if mag == 1 else f"{mag}*{v.name}"
            if not parts:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class PLRF:
    """A verified probabilistic linear ranking function."""

    values: dict[Location, AffineExpr]
    targets: frozenset[str]
    kind: str  # "constant" | "linear"
    taints: dict[str, str] = field(default_factory=dict)

    def of(self, location: Location) -> AffineExpr:
        return self.values.get(location, AffineExpr.constant(0))

    def render(self) -> str:
        inner = ", ".join(
            f"{loc.display()} -> {expr}" for loc, expr in sorted(
                self.values.items(), key=lambda kv: kv[0].name
            )
        )
        return "{" + inner + "}"


# ---------------------------------------------------------------------------
# Condition plumbing shared by synthesis and verification


def _premise_atoms(inv: InvariantMap, g: GeneralTransition, strict: bool):
    atoms = []
    for a in (inv.of(g.source) & g.guard).atoms:
        if a.is_linear():
            atoms.append(a)
        elif strict:
            raise UnsupportedProgram(
                f"nonlinear guard or invariant atom on '{g.name}': {a}"
            )
    return Constraint(atoms)


def _gt_conditions(
    p: PIP, inv: InvariantMap, g: GeneralTransition, is_target: bool, strict: bool
) -> list[tuple[str, Constraint, list[tuple[Fraction, Location, Update | None]]]]:
    """Conditions for one general transition as (tag, premise, combination)
    entries; a combination sums ``factor * f(location) (after update)`` terms,
    with ``None`` update meaning the bare source value, and must prove
    ``combination + (1 if decrease) <= 0`` under the premise."""
    premise = _premise_atoms(inv, g, strict)
    out = []
    if is_target:
        decrease = [(t.prob, t.target, t.update) for t in g.members]
        decrease.append((Fraction(-1), g.source, None))
        out.append(("decrease", premise, decrease))
        out.append(("bounded", premise, [(Fraction(-1), g.source, None)]))
        for t in g.members:
            out.append(
                (f"post:{t.name}", premise, [(Fraction(-1), t.target, t.update)])
            )
    else:
        non_increase = [(t.prob, t.target, t.update) for t in g.members]
        non_increase.append((Fraction(-1), g.source, None))
        out.append(("non-increase", premise, non_increase))
    return out


def _combination_expr(
    plrf_values: Mapping[Location, AffineExpr],
    combination: Sequence[tuple[Fraction, Location, Update | None]],
    extra_const: Fraction,
) -> AffineExpr:
    total = AffineExpr.constant(extra_const)
    for factor, location, update in combination:
        expr = plrf_values[location]
        if update is not None:
            expr = expr.compose(update)
        total = total + expr.scale(factor)
    return total


def _update_temporaries(p: PIP, g: GeneralTransition) -> list[str]:
    pv_set = set(p.program_vars)
    return sorted(
        {
            v.name
            for t in g.members
            for v in t.update.variables_used()
            if v not in pv_set
        }
    )


def verify_plrf(
    p: PIP, inv: InvariantMap, plrf: PLRF
) -> tuple[list[str], dict[str, str]]:
    """Re-check all ranking conditions with the elimination engine.

    Returns (hard failures, taints).  A taint is a non-increase
    condition that cannot be established because the transition feeds
    scheduler-chosen temporaries into variables the ranking value reads;
    such certificates exist but cannot be charged at composition.  The
    check is independent of the simplex-based synthesis: each
    condition's expression is bounded over the premise polyhedron
    exactly.
    """
    failures: list[str] = []
    taints: dict[str, str] = {}
    for g in p.gts:
        is_target = g.name in plrf.targets
        try:
            conditions = _gt_conditions(p, inv, g, is_target, strict=False)
        except UnsupportedProgram as exc:  # pragma: no cover - strict=False
            failures.append(str(exc))
            continue
        for tag, premise, combination in conditions:
            extra = Fraction(1) if tag == "decrease" else Fraction(0)
            try:
                expr = _combination_expr(plrf.values, combination, extra)
            except UnsupportedProgram as exc:
                failures.append(f"{g.name}/{tag}: {exc}")
                continue
            bounds = expression_bounds(premise, expr.scaled_integer_poly())
            holds = bounds is None or (
                bounds[1] is not None and bounds[1] <= 0
            )
            if holds:
                continue
            update_temps = _update_temporaries(p, g)
            if tag == "non-increase" and update_temps:
                taints[g.name] = (
                    f"'{g.name}' assigns temporary variable(s) "
                    f"{', '.join(update_temps)}, so non-increase of the "
                    "ranking value cannot be established"
                )
            else:
                failures.append(f"condition {tag} fails for '{g.name}'")
    return failures, taints


# ---------------------------------------------------------------------------
# Farkas-based synthesis


def _template_expr(
    location: Location, program_vars: Sequence[Variable], linear: bool
) -> tuple[dict[Variable, dict], dict]:
    """Template value at a location: per-variable and constant linear forms
    over the template unknowns."""
    var_forms: dict[Variable, dict] = {}
    if linear:
        for v in program_vars:
            var_forms[v] = {("a", location.name, v.name): Fraction(1)}
    const_form = {("c", location.name): Fraction(1)}
    return var_forms, const_form


def _form_add(dst: dict, src: dict, factor: Fraction) -> None:
    for key, value in src.items():
        dst[key] = dst.get(key, Fraction(0)) + factor * value


def _composed_template(
    location: Location,
    update: Update | None,
    program_vars: Sequence[Variable],
    linear: bool,
) -> tuple[dict[Variable, dict], dict]:
    var_forms, const_form = _template_expr(location, program_vars, linear)
    if update is None or not linear:
        return var_forms, dict(const_form)
    out_vars: dict[Variable, dict] = {}
    out_const = dict(const_form)
    for v, form in var_forms.items():
        image = update.image_of(v)
        if not image.is_linear():
            raise UnsupportedProgram(f"nonlinear update image for '{v.name}'")
        lin, b = image.linear_form()
        if b:
            _form_add(out_const, form, Fraction(b))
        for w, a in lin.items():
            target = out_vars.setdefault(w, {})
            _form_add(target, form, Fraction(a))
    return out_vars, out_const


def _farkas_block(
    block_id: int,
    premise: Constraint,
    conclusion_vars: Mapping[Variable, dict],
    conclusion_const: Mapping,
    constraints: list[ratlp.LinearConstraint],
) -> None:
    """Encode ``premise |= conclusion <= 0`` as multiplier existence."""
    variables = sorted(set(premise.variables()) | set(conclusion_vars))
    rows = []
    for i, a in enumerate(premise.atoms):
        lin, const = a.expr.linear_form()
        rows.append((i, lin, Fraction(const), a.is_eq))
        if not a.is_eq:
            constraints.append(
                ratlp.LinearConstraint.of({("lam", block_id, i): 1}, ">=", 0)
            )
    for v in variables:
        combo: dict = {}
        for i, lin, _, _ in rows:
            if lin.get(v):
                combo[("lam", block_id, i)] = Fraction(lin[v])
        lit = Fraction(0)
        for key, value in conclusion_vars.get(v, {}).items():
            if key is _LIT:
                lit += value
            else:
                combo[key] = combo.get(key, Fraction(0)) - value
        constraints.append(ratlp.LinearConstraint.of(combo, "=", lit))
    combo = {}
    for i, _, const, _ in rows:
        if const:
            combo[("lam", block_id, i)] = const
    lit = Fraction(0)
    for key, value in conclusion_const.items():
        if key is _LIT:
            lit += value
        else:
            combo[key] = combo.get(key, Fraction(0)) - value
    constraints.append(ratlp.LinearConstraint.of(combo, ">=", lit))


def _synthesize(
    p: PIP,
    inv: InvariantMap,
    targets: Iterable[GeneralTransition | str],
    linear: bool,
    skip_temp_nonincrease: bool = False,
) -> PLRF | None:
    target_names = set()
    for item in targets:
        name = item if isinstance(item, str) else item.name
        p.gt(name)  # raises KeyError on unknown targets
        target_names.add(name)

    constraints: list[ratlp.LinearConstraint] = []
    template_keys: list = [("c", loc.name) for loc in p.locations]
    if linear:
        template_keys.extend(
            ("a", loc.name, v.name) for loc in p.locations for v in p.program_vars
        )
    skipped: set[str] = set()
    block_id = 0
    for g in p.gts:
        is_target = g.name in target_names
        if (
            linear
            and not is_target
            and skip_temp_nonincrease
            and _update_temporaries(p, g)
        ):
            # The non-increase fact cannot be required without also
            # forbidding any dependence of the ranking value on the
            # overwritten variables; leave it to the re-check, which
            # will taint the certificate if it stays unprovable.
            skipped.add(g.name)
            continue
        for tag, premise, combination in _gt_conditions(
            p, inv, g, is_target, strict=linear
        ):
            conclusion_vars: dict[Variable, dict] = {}
            conclusion_const: dict = {
                _LIT: Fraction(1) if tag == "decrease" else Fraction(0)
            }
            for factor, location, update in combination:
                var_forms, const_form = _composed_template(
                    location, update, p.program_vars, linear
                )
                _form_add(conclusion_const, const_form, factor)
                for v, form in var_forms.items():
                    target = conclusion_vars.setdefault(v, {})
                    _form_add(target, form, factor)
            _farkas_block(
                block_id, premise, conclusion_vars, conclusion_const, constraints
            )
            block_id += 1

    init_key = ("c", p.initial.name)
    if linear:
        solution = _solve_min_abs(constraints, template_keys)
    else:
        solution = _solve_constant(constraints, template_keys, init_key)
    if solution is None:
        return None

    values: dict[Location, AffineExpr] = {}
    for loc in p.locations:
        coeffs = {}
        if linear:
            for v in p.program_vars:
                coeffs[v] = solution.get(("a", loc.name, v.name), Fraction(0))
        values[loc] = AffineExpr.make(coeffs, solution.get(("c", loc.name), Fraction(0)))

    plrf = PLRF(values, frozenset(target_names), "linear" if linear else "constant")
    failures, taints = verify_plrf(p, inv, plrf)
    assert not failures, (
        "synthesized ranking function failed independent verification: "
        + "; ".join(failures)
    )
    assert set(taints) <= skipped, f"unexpected taints {sorted(taints)}"
    return PLRF(plrf.values, plrf.targets, plrf.kind, taints)


def _abs_objective(
    constraints: list[ratlp.LinearConstraint], keys: Sequence
) -> dict:
    objective: dict = {}
    for key in keys:
        bound_key = ("abs", *key) if isinstance(key, tuple) else ("abs", key)
        constraints.append(
            ratlp.LinearConstraint.of({bound_key: 1, key: -1}, ">=", 0)
        )
        constraints.append(
            ratlp.LinearConstraint.of({bound_key: 1, key: 1}, ">=", 0)
        )
        objective[bound_key] = Fraction(1)
    return objective


def _solve_min_abs(
    constraints: list[ratlp.LinearConstraint], keys: Sequence
) -> dict | None:
    work = list(constraints)
    objective = _abs_objective(work, keys)
    result = ratlp.solve_lp(work, objective, extra_variables=keys)
    if result.status != ratlp.OPTIMAL:
        return None
    return result.assignment


def _solve_constant(
    constraints: list[ratlp.LinearConstraint], keys: Sequence, init_key
) -> dict | None:
    """Two-phase canonical solve: minimal value at the initial location
    first, then minimal total magnitude."""
    first = ratlp.solve_lp(constraints, {init_key: Fraction(1)}, extra_variables=keys)
    if first.status == ratlp.INFEASIBLE:
        return None
    if first.status == ratlp.OPTIMAL:
        init_value = first.assignment[init_key]
    else:
        # Unbounded below: any nonpositive value gives the same zero bound;
        # pick the largest feasible one up to zero.
        capped = list(constraints)
        capped.append(ratlp.LinearConstraint.of({init_key: 1}, "<=", 0))
        second = ratlp.solve_lp(capped, {init_key: Fraction(-1)}, extra_variables=keys)
        assert second.status == ratlp.OPTIMAL
        init_value = second.assignment[init_key]
    pinned = list(constraints)
    pinned.append(ratlp.LinearConstraint.of({init_key: 1}, "=", init_value))
    result = _solve_min_abs(pinned, keys)
    assert result is not None
    return result


def find_constant_plrf(
    p: PIP, inv: InvariantMap, targets: Iterable[GeneralTransition | str]
) -> PLRF | None:
    """Location constants with expected decrease on the targets, or None."""
    return _synthesize(p, inv, targets, linear=False)


def find_linear_plrf(
    p: PIP, inv: InvariantMap, targets: Iterable[GeneralTransition | str]
) -> PLRF | None:
    """Affine ranking values per location, or None if infeasible.

    Tries the fully-verified system first (temporaries universally
    quantified everywhere); if that is infeasible, retries with
    temporary-assigning non-increase conditions deferred, which can
    only produce a tainted certificate.  Raises UnsupportedProgram on
    nonlinear guards or updates.
    """
    plrf = _synthesize(p, inv, targets, linear=True)
    if plrf is not None:
        return plrf
    return _synthesize(p, inv, targets, linear=True, skip_temp_nonincrease=True)


# ---------------------------------------------------------------------------
# Bound composition


@dataclass(frozen=True)
class BoundEntry:
    targets: tuple[str, ...]
    plrf: PLRF
    bound: AffineExpr  # ranking value at the initial location

    def evaluate(self, state: Mapping[Variable, int]) -> Fraction:
        return max(Fraction(0), self.bound.evaluate(state))


@dataclass(frozen=True)
class RuntimeBound:
    entries: tuple[BoundEntry, ...]

    def per_gt(self) -> dict[str, AffineExpr]:
        return {name: e.bound for e in self.entries for name in e.targets}

    def total_affine(self) -> AffineExpr:
        total = AffineExpr.constant(0)
        for e in self.entries:
            total = total + e.bound
        return total

    def evaluate_total(self, state: Mapping[Variable, int]) -> Fraction:
        """Sound evaluation: entries clamp at zero individually."""
        return sum((e.evaluate(state) for e in self.entries), Fraction(0))

    def render_total(self) -> str:
        return self.total_affine().render()


def compose_bound(
    p: PIP, cover: Sequence[tuple[Iterable[GeneralTransition | str], PLRF]]
) -> RuntimeBound:
    """Charge each cover entry's ranking value at the initial location to
    the summed firing count of its targets; the total is the entry sum.

    The cover must partition the general transitions; entries whose
    certificate carries unproven conditions are rejected.
    """
    seen: dict[str, int] = {}
    entries: list[BoundEntry] = []
    for index, (targets, plrf) in enumerate(cover):
        names = tuple(
            item if isinstance(item, str) else item.name for item in targets
        )
        for name in names:
            p.gt(name)
            if name in seen:
                raise CoverError(
                    f"general transition '{name}' covered by entries {seen[name]} and {index}"
                )
            seen[name] = index
        if set(names) != set(plrf.targets):
            raise CoverError(
                f"entry {index}: targets {sorted(names)} do not match the "
                f"certificate's targets {sorted(plrf.targets)}"
            )
        if plrf.taints:
            detail = "; ".join(f"{k}: {v}" for k, v in sorted(plrf.taints.items()))
            raise TaintedCertificateError(
                f"ranking function {plrf.render()} cannot be charged: {detail}"
            )
        bound = plrf.of(p.initial)
        temps = [v.name for v in bound.variables() if not v.is_program]
        assert not temps, f"bound mentions temporaries {temps}"
        entries.append(BoundEntry(names, plrf, bound))
    uncovered = [g.name for g in p.gts if g.name not in seen]
    if uncovered:
        raise CoverError(
            "general transitions not covered: " + ", ".join(sorted(uncovered))
        )
    return RuntimeBound(tuple(entries))


def default_cover(p: PIP) -> list[tuple[str, ...]]:
    """One entry per location component containing cyclic general
    transitions, plus a singleton entry per acyclic general transition
    (those can fire at most once)."""
    comp = location_sccs(p)
    groups: dict[int, list[str]] = {}
    singles: list[tuple[str, ...]] = []
    order: list[tuple[str, ...] | int] = []
    for g in p.gts:
        cyclic = any(comp[t.source] == comp[t.target] for t in g.members)
        if cyclic:
            scc = comp[g.source]
            if scc not in groups:
                groups[scc] = []
                order.append(scc)
            groups[scc].append(g.name)
        else:
            singles.append((g.name,))
            order.append((g.name,))
    out: list[tuple[str, ...]] = []
    for item in order:
        if isinstance(item, int):
            out.append(tuple(groups[item]))
        else:
            out.append(item)
    return out


@dataclass(frozen=True)
class BoundReport:
    ok: bool
    bound: RuntimeBound | None
    failures: tuple[str, ...]


def bound_program(
    p: PIP,
    cover_groups: Sequence[Iterable[str]] | None = None,
    inv: InvariantMap | None = None,
) -> BoundReport:
    """Synthesize a certificate per cover group (constant first, affine as
    fallback) and compose; reports every group that admits no bound."""
    if inv is None:
        inv = infer(p)
    groups = [tuple(g) for g in (cover_groups or default_cover(p))]
    failures: list[str] = []
    cover: list[tuple[tuple[str, ...], PLRF]] = []
    for group in groups:
        plrf = find_constant_plrf(p, inv, group)
        if plrf is None or plrf.taints:
            try:
                linear_plrf = find_linear_plrf(p, inv, group)
            except UnsupportedProgram as exc:
                linear_plrf = None
                failures.append(f"{{{', '.join(group)}}}: {exc}")
                continue
            plrf = linear_plrf if linear_plrf is not None else plrf
        if plrf is None:
            failures.append(
                f"{{{', '.join(group)}}}: no constant or affine ranking certificate"
            )
            continue
        if plrf.taints:
            detail = "; ".join(sorted(plrf.taints.values()))
            failures.append(f"{{{', '.join(group)}}}: {detail}")
            continue
        cover.append((group, plrf))
    if failures:
        return BoundReport(False, None, tuple(failures))
    return BoundReport(True, compose_bound(p, cover), ())
