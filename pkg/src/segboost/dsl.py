"""Line-oriented text format for rule bases.

Grammar (``#`` starts a comment, blank lines ignored)::

    rule       := "rule" ID ":" SUBJECT ANTECEDENT "=>" CONSEQUENT
    SUBJECT    := ("mis" | "ok") CLASSSET
    ANTECEDENT := "surroundedBy" CLASSSET
                | "noNeighborOf" CLASSSET
                | "neighborhoodContains" CLASSSET
                | "always"
    CONSEQUENT := "adoptSurroundClass" | "adoptMaxClass"
                | "shadow" ("+1" | "-1")
                | "elevation" ("0" | "1" | "2")
    CLASSSET   := "{" NAME ("," NAME)* "}" | NAME

Rule priority is the order of appearance in the file.
"""
from __future__ import annotations

import re

from .core import Taxonomy
from .rules import (
    AdoptMaxClass,
    AdoptSurroundClass,
    Always,
    Antecedent,
    AssertElevation,
    AssertShadow,
    Consequent,
    NeighborhoodContains,
    NoNeighborOf,
    Rule,
    RuleBase,
    SubjectStatus,
    SurroundedBy,
)


class DslError(ValueError):
    """Parse or semantic error, carrying the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|[{}:,]|=>|[+-]?\d+)")


class _Lexer:
    def __init__(self, text: str, line_no: int):
        self.text = text
        self.line_no = line_no
        self.pos = 0

    def _column(self) -> int:
        return self.pos + 1

    def error(self, message: str) -> DslError:
        return DslError(message, self.line_no, self._column())

    def peek(self) -> str | None:
        m = _TOKEN.match(self.text, self.pos)
        return m.group(1) if m else None

    def next(self) -> str:
        m = _TOKEN.match(self.text, self.pos)
        if not m:
            raise self.error("unexpected character" if self.pos < len(self.text) else "unexpected end of rule")
        self.pos = m.end()
        return m.group(1)

    def expect(self, token: str) -> None:
        got = self.next()
        if got != token:
            raise self.error(f"expected {token!r}, got {got!r}")

    def done(self) -> bool:
        return not self.text[self.pos :].strip()


def _parse_class_set(lex: _Lexer, taxonomy: Taxonomy) -> frozenset[int]:
    names = taxonomy.names()

    def resolve(name: str) -> int:
        if name not in names:
            raise lex.error(f"unknown class name {name!r}")
        return names[name]

    tok = lex.next()
    if tok != "{":
        return frozenset({resolve(tok)})
    ids = set()
    while True:
        ids.add(resolve(lex.next()))
        tok = lex.next()
        if tok == "}":
            return frozenset(ids)
        if tok != ",":
            raise lex.error(f"expected ',' or '}}', got {tok!r}")


def _parse_rule_line(text: str, line_no: int, taxonomy: Taxonomy, priority: int) -> Rule:
    lex = _Lexer(text, line_no)
    lex.expect("rule")
    rule_id = lex.next()
    lex.expect(":")

    status_tok = lex.next()
    if status_tok == "mis":
        status = SubjectStatus.MISCLASSIFIED
    elif status_tok == "ok":
        status = SubjectStatus.CLASSIFIED
    else:
        raise lex.error(f"expected 'mis' or 'ok', got {status_tok!r}")
    subject = _parse_class_set(lex, taxonomy)

    ant_tok = lex.next()
    antecedent: Antecedent
    if ant_tok == "surroundedBy":
        antecedent = SurroundedBy(_parse_class_set(lex, taxonomy))
    elif ant_tok == "noNeighborOf":
        antecedent = NoNeighborOf(_parse_class_set(lex, taxonomy))
    elif ant_tok == "neighborhoodContains":
        antecedent = NeighborhoodContains(_parse_class_set(lex, taxonomy))
    elif ant_tok == "always":
        antecedent = Always()
    else:
        raise lex.error(f"unknown antecedent {ant_tok!r}")

    lex.expect("=>")
    cons_tok = lex.next()
    consequent: Consequent
    if cons_tok == "adoptSurroundClass":
        consequent = AdoptSurroundClass()
    elif cons_tok == "adoptMaxClass":
        consequent = AdoptMaxClass()
    elif cons_tok == "shadow":
        value_tok = lex.next()
        if value_tok not in ("+1", "-1"):
            raise lex.error(f"shadow value must be +1 or -1, got {value_tok!r}")
        consequent = AssertShadow(int(value_tok))
    elif cons_tok == "elevation":
        value_tok = lex.next()
        if value_tok not in ("0", "1", "2"):
            raise lex.error(f"elevation value must be 0, 1 or 2, got {value_tok!r}")
        consequent = AssertElevation(int(value_tok))
    else:
        raise lex.error(f"unknown consequent {cons_tok!r}")

    if not lex.done():
        raise lex.error("trailing input after rule")
    if isinstance(consequent, (AdoptSurroundClass, AdoptMaxClass)) and status is not SubjectStatus.MISCLASSIFIED:
        raise lex.error(f"rule {rule_id!r}: relabeling consequents require a 'mis' subject")
    return Rule(rule_id, status, subject, antecedent, consequent, priority)


def parse_rules(text: str, taxonomy: Taxonomy) -> RuleBase:
    """Parse rule DSL source into a rule base against the given taxonomy."""
    rules: list[Rule] = []
    seen: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        rule = _parse_rule_line(line, line_no, taxonomy, priority=len(rules))
        if rule.id in seen:
            raise DslError(f"duplicate rule id {rule.id!r} (first defined on line {seen[rule.id]})", line_no, 1)
        seen[rule.id] = line_no
        rules.append(rule)
    return RuleBase(rules=tuple(rules), taxonomy=taxonomy)


def _format_class_set(ids: frozenset[int], taxonomy: Taxonomy) -> str:
    names = sorted(taxonomy.name_of(i) for i in ids)
    if len(names) == 1:
        return names[0]
    return "{" + ", ".join(names) + "}"


def serialize_rules(base: RuleBase) -> str:
    """Render a rule base back into DSL text (one rule per line, in order)."""
    lines = []
    for rule in base.rules:
        status = "mis" if rule.subject_status is SubjectStatus.MISCLASSIFIED else "ok"
        subject = _format_class_set(rule.subject_classes, base.taxonomy)
        ant = rule.antecedent
        if isinstance(ant, SurroundedBy):
            antecedent = f"surroundedBy {_format_class_set(ant.allowed, base.taxonomy)}"
        elif isinstance(ant, NoNeighborOf):
            antecedent = f"noNeighborOf {_format_class_set(ant.required, base.taxonomy)}"
        elif isinstance(ant, NeighborhoodContains):
            antecedent = f"neighborhoodContains {_format_class_set(ant.present, base.taxonomy)}"
        else:
            antecedent = "always"
        cons = rule.consequent
        if isinstance(cons, AdoptSurroundClass):
            consequent = "adoptSurroundClass"
        elif isinstance(cons, AdoptMaxClass):
            consequent = "adoptMaxClass"
        elif isinstance(cons, AssertShadow):
            consequent = f"shadow {cons.value:+d}"
        else:
            consequent = f"elevation {cons.value}"
        lines.append(f"rule {rule.id}: {status} {subject} {antecedent} => {consequent}")
    return "\n".join(lines) + ("\n" if lines else "")
