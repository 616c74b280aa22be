"""Program text format, canonical printer, and DOT export.

A program document declares its program variables, the start location,
and a sequence of transitions; any identifier that is not a declared
program variable is a temporary (scheduler-chosen) variable.  Singleton
general transitions use the ``trans`` sugar, probabilistic ones a
``gt`` block with ``branch`` members.  Location tokens may carry a
constraint label in brackets (``l1[x=0]``), which is how refined
programs serialize.  ``docs/format.md`` has the full grammar.

The printer emits the canonical form: normalized atoms, guards omitted
when ``true``, singleton transitions as ``trans``, fixed orderings
everywhere, so equal programs print byte-identically and
``parse(print(p))`` reproduces ``p``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from .model import PIP, GeneralTransition, Location, Transition, validate
from .refine import labeled_location
from .syntax import (
    TRUE,
    Atom,
    Constraint,
    Polynomial,
    Update,
    Variable,
    pv,
    tmp,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class ProgramError(ValueError):
    """A syntactically valid document with well-formedness violations."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<sym>:=|->|&&|<=|>=|==|[{}()\[\];,=<>+\-*/^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int" | "ident" | "sym" | "eof"
    text: str
    line: int
    column: int


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser

_RELS = ("<", "<=", "=", "==", ">=", ">")


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0
        self.program_vars: dict[str, Variable] = {}
        self.locations: dict[str, Location] = {}

    # token helpers -------------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.column)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text:
            raise self.fail(f"expected {text!r}, found {tok.text!r}")
        return self.next()

    def expect_ident(self) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.fail(f"expected an identifier, found {tok.text!r}")
        return self.next().text

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    # variables and locations ---------------------------------------------

    def variable(self, name: str) -> Variable:
        return self.program_vars.get(name, tmp(name))

    def location_token(self) -> Location:
        base = self.expect_ident()
        if self.peek().text != "[":
            loc = self.locations.get(base)
            if loc is None:
                loc = Location(base)
                self.locations[base] = loc
            return loc
        self.expect("[")
        constraint = self.constraint(stop="]")
        self.expect("]")
        loc = labeled_location(Location(base), constraint)
        existing = self.locations.get(loc.name)
        if existing is None:
            self.locations[loc.name] = loc
            return loc
        return existing

    # expressions ----------------------------------------------------------

    def polynomial(self) -> Polynomial:
        value = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> Polynomial:
        value = self.factor()
        while self.peek().text == "*":
            self.next()
            value = value * self.factor()
        return value

    def factor(self) -> Polynomial:
        tok = self.peek()
        if tok.text == "-":
            self.next()
            return -self.factor()
        if tok.text == "(":
            self.next()
            value = self.polynomial()
            self.expect(")")
        elif tok.kind == "int":
            self.next()
            value = Polynomial.const(int(tok.text))
        elif tok.kind == "ident":
            self.next()
            value = Polynomial.var(self.variable(tok.text))
        else:
            raise self.fail(f"expected a polynomial, found {tok.text!r}")
        if self.peek().text == "^":
            self.next()
            exp = self.peek()
            if exp.kind != "int":
                raise self.fail("exponent must be an integer literal")
            self.next()
            value = value ** int(exp.text)
        return value

    def atom(self) -> Atom:
        lhs = self.polynomial()
        rel = self.peek().text
        if rel not in _RELS:
            raise self.fail(f"expected a relation, found {rel!r}")
        self.next()
        rhs = self.polynomial()
        return Atom(lhs, "=" if rel == "==" else rel, rhs)

    def constraint(self, stop: str | None = None) -> Constraint:
        if self.peek().text == "true":
            self.next()
            return TRUE
        atoms = [self.atom()]
        while self.accept("&&"):
            atoms.append(self.atom())
        if stop is not None and self.peek().text != stop:
            raise self.fail(f"expected {stop!r} after constraint")
        return Constraint(atoms)

    def rational(self) -> Fraction:
        tok = self.peek()
        if tok.kind != "int":
            raise self.fail("expected a probability")
        self.next()
        num = int(tok.text)
        if self.accept("/"):
            den_tok = self.peek()
            if den_tok.kind != "int":
                raise self.fail("expected a denominator")
            self.next()
            return Fraction(num, int(den_tok.text))
        return Fraction(num)

    def updates(self) -> Update:
        images: dict[Variable, Polynomial] = {}
        while True:
            name = self.expect_ident()
            var = self.variable(name)
            self.expect(":=")
            images[var if var.is_program else pv(name)] = self.polynomial()
            if not self.accept(","):
                break
        return Update(images)

    # program items --------------------------------------------------------

    def parse_program(self) -> PIP:
        initial_name: str | None = None
        gts: list[GeneralTransition] = []
        auto_branch = 0
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "vars":
                self.next()
                while True:
                    name = self.expect_ident()
                    self.program_vars[name] = pv(name)
                    if not self.accept(","):
                        break
                self.expect(";")
            elif tok.text == "start":
                self.next()
                initial_name = self.location_token().name
                self.expect(";")
            elif tok.text == "loc":
                self.next()
                self.location_token()
                self.expect(";")
            elif tok.text == "trans":
                self.next()
                name = self.expect_ident()
                self.expect("{")
                self.expect("from")
                source = self.location_token()
                self.expect(";")
                guard = TRUE
                if self.accept("guard"):
                    guard = self.constraint(stop=";")
                    self.expect(";")
                update = Update()
                if self.accept("update"):
                    update = self.updates()
                    self.expect(";")
                self.expect("to")
                target = self.location_token()
                self.expect(";")
                self.expect("}")
                member = Transition(name, source, guard, Fraction(1), update, target)
                gts.append(GeneralTransition(name, (member,)))
            elif tok.text == "gt":
                self.next()
                gt_name = self.expect_ident()
                self.expect("{")
                self.expect("from")
                source = self.location_token()
                self.expect(";")
                guard = TRUE
                if self.accept("guard"):
                    guard = self.constraint(stop=";")
                    self.expect(";")
                members: list[Transition] = []
                while self.peek().text == "branch":
                    self.next()
                    if self.peek().kind == "ident" and self.peek().text != "p":
                        branch_name = self.expect_ident()
                    else:
                        branch_name = f"{gt_name}_{auto_branch}"
                        auto_branch += 1
                    self.expect("p")
                    self.expect("=")
                    prob = self.rational()
                    update = Update()
                    self.expect("{")
                    if self.peek().text != "}":
                        update = self.updates()
                    self.expect("}")
                    self.expect("->")
                    target = self.location_token()
                    self.expect(";")
                    members.append(
                        Transition(branch_name, source, guard, prob, update, target)
                    )
                self.expect("}")
                if not members:
                    raise self.fail(f"gt '{gt_name}' has no branches")
                gts.append(GeneralTransition(gt_name, tuple(members)))
            else:
                raise self.fail(
                    f"expected 'vars', 'start', 'gt' or 'trans', found {tok.text!r}"
                )
        if initial_name is None:
            raise self.fail("program has no 'start' declaration")
        program = PIP(
            self.program_vars.values(),
            tuple(self.locations.values()),
            self.locations[initial_name],
            tuple(gts),
        )
        issues = validate(program)
        if issues:
            raise ProgramError(issues)
        return program


def parse_program(text: str) -> PIP:
    """Parse and validate a program document."""
    return _Parser(text).parse_program()


def parse_constraint(text: str, program: PIP) -> Constraint:
    """Parse a standalone constraint with the program's variable kinds."""
    parser = _Parser(text)
    parser.program_vars = {v.name: v for v in program.program_vars}
    constraint = parser.constraint()
    if parser.peek().kind != "eof":
        raise parser.fail("trailing input after constraint")
    return constraint


def parse_atom(text: str, program: PIP) -> Atom:
    constraint = parse_constraint(text, program)
    if len(constraint.atoms) != 1:
        raise ValueError(f"expected a single atom, got {text!r}")
    return constraint.atoms[0]


def parse_state(text: str, program: PIP) -> dict[Variable, int]:
    """Parse ``x=0, y=2`` style assignments over the program's variables."""
    known = {v.name: v for v in program.program_vars}
    for v in program.temporaries():
        known[v.name] = v
    out: dict[Variable, int] = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(-?\d+)", piece)
        if m is None:
            raise ValueError(f"cannot parse state assignment {piece!r}")
        name, value = m.group(1), int(m.group(2))
        out[known.get(name, tmp(name))] = value
    return out


# ---------------------------------------------------------------------------
# Printer


def print_program(p: PIP) -> str:
    lines: list[str] = []
    if p.program_vars:
        lines.append("vars " + ", ".join(v.name for v in p.program_vars) + ";")
    lines.append(f"start {_loc(p.initial)};")
    mentioned = {p.initial}
    for t in p.transitions:
        mentioned.add(t.source)
        mentioned.add(t.target)
    for loc in p.locations:
        if loc not in mentioned:
            lines.append(f"loc {_loc(loc)};")
    lines.append("")
    for g in p.gts:
        if len(g.members) == 1:
            t = g.members[0]
            parts = [f"trans {t.name} {{ from {_loc(t.source)};"]
            if not t.guard.is_true():
                parts.append(f"guard {t.guard};")
            if not t.update.is_identity():
                parts.append(f"update {t.update};")
            parts.append(f"to {_loc(t.target)}; }}")
            lines.append(" ".join(parts))
        else:
            lines.append(f"gt {g.name} {{")
            lines.append(f"  from {_loc(g.source)};")
            if not g.guard.is_true():
                lines.append(f"  guard {g.guard};")
            for t in g.members:
                update = "" if t.update.is_identity() else f" {t.update} "
                lines.append(
                    f"  branch {t.name} p={t.prob} {{{update}}} -> {_loc(t.target)};"
                )
            lines.append("}")
    return "\n".join(lines) + "\n"


def _loc(location: Location) -> str:
    return location.display()


# ---------------------------------------------------------------------------
# DOT export


def print_dot(p: PIP, name: str = "pip") -> str:
    """GraphViz rendering: one node per location, one edge per transition,
    members of probabilistic general transitions drawn dashed."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    lines.append('  __start [shape=point, label=""];')
    for loc in p.locations:
        lines.append(f'  "{loc.name}" [label="{loc.display()}"];')
    lines.append(f'  __start -> "{p.initial.name}";')
    for g in p.gts:
        dashed = len(g.members) > 1
        for t in g.members:
            pieces = [t.name]
            if not t.guard.is_true():
                pieces.append(str(t.guard))
            if t.prob != 1:
                pieces.append(f"p={t.prob}")
            if not t.update.is_identity():
                pieces.append(str(t.update))
            attrs = [f'label="{"; ".join(pieces)}"']
            if dashed:
                attrs.append("style=dashed")
            lines.append(
                f'  "{t.source.name}" -> "{t.target.name}" [{", ".join(attrs)}];'
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
