"""Symbolic rule model plus the built-in correction and channel rule bases.

A rule tests a subject unit (status + class set) and a neighborhood
antecedent against the region graph, then either relabels the unit or asserts
a shadow/elevation value over its pixels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

from .core import ElevationBand, Taxonomy, TaxonomyError


class RuleKind(Enum):
    CORRECTION = "correction"
    SHADOW = "shadow"
    ELEVATION = "elevation"


class SubjectStatus(Enum):
    CLASSIFIED = "ok"
    MISCLASSIFIED = "mis"


@dataclass(frozen=True)
class SurroundedBy:
    allowed: frozenset[int]


@dataclass(frozen=True)
class NoNeighborOf:
    required: frozenset[int]


@dataclass(frozen=True)
class NeighborhoodContains:
    present: frozenset[int]


@dataclass(frozen=True)
class Always:
    pass


Antecedent = Union[SurroundedBy, NoNeighborOf, NeighborhoodContains, Always]


@dataclass(frozen=True)
class AdoptSurroundClass:
    pass


@dataclass(frozen=True)
class AdoptMaxClass:
    pass


@dataclass(frozen=True)
class AssertShadow:
    value: int  # +1 or -1

    def __post_init__(self) -> None:
        if self.value not in (-1, 1):
            raise ValueError("shadow assertion must be +1 or -1")


@dataclass(frozen=True)
class AssertElevation:
    value: int  # 0, 1 or 2

    def __post_init__(self) -> None:
        if self.value not in (0, 1, 2):
            raise ValueError("elevation assertion must be 0, 1 or 2")


Consequent = Union[AdoptSurroundClass, AdoptMaxClass, AssertShadow, AssertElevation]


class RuleError(ValueError):
    """A rule or rule base violates its structural constraints."""


def _kind_of(consequent: Consequent) -> RuleKind:
    if isinstance(consequent, (AdoptSurroundClass, AdoptMaxClass)):
        return RuleKind.CORRECTION
    if isinstance(consequent, AssertShadow):
        return RuleKind.SHADOW
    return RuleKind.ELEVATION


@dataclass(frozen=True)
class Rule:
    id: str
    subject_status: SubjectStatus
    subject_classes: frozenset[int]
    antecedent: Antecedent
    consequent: Consequent
    priority: int

    def __post_init__(self) -> None:
        if self.kind is RuleKind.CORRECTION and self.subject_status is not SubjectStatus.MISCLASSIFIED:
            raise RuleError(f"rule {self.id}: relabeling rules require a misclassified subject")

    @property
    def kind(self) -> RuleKind:
        return _kind_of(self.consequent)

    def semantic_key(self) -> tuple:
        return (self.id, self.subject_status, self.subject_classes, self.antecedent, self.consequent)


@dataclass(frozen=True)
class RuleBase:
    """Rules in priority order (ties resolved by lexical id)."""

    rules: tuple[Rule, ...]
    taxonomy: Taxonomy

    def __post_init__(self) -> None:
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise RuleError("duplicate rule ids in rule base")
        ordered = tuple(sorted(self.rules, key=lambda r: (r.priority, r.id)))
        object.__setattr__(self, "rules", ordered)

    def of_kind(self, kind: RuleKind) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind is kind)

    def semantic_key(self) -> tuple:
        """Per-kind ordered rule content; priorities matter as order only."""
        return tuple(
            tuple(r.semantic_key() for r in self.of_kind(kind))
            for kind in (RuleKind.CORRECTION, RuleKind.SHADOW, RuleKind.ELEVATION)
        )

    def merged_with(self, other: "RuleBase") -> "RuleBase":
        offset = max((r.priority for r in self.rules), default=-1) + 1
        shifted = tuple(
            Rule(r.id, r.subject_status, r.subject_classes, r.antecedent, r.consequent, r.priority + offset)
            for r in other.rules
        )
        return RuleBase(rules=self.rules + shifted, taxonomy=self.taxonomy)


def _resolve(names: list[str], bindings: Mapping[str, int]) -> frozenset[int] | None:
    """Class ids for the names present in the taxonomy; None when none resolve."""
    ids = frozenset(bindings[n] for n in names if n in bindings)
    return ids or None


def build_correction_rules(taxonomy: Taxonomy, name_bindings: Mapping[str, int] | None = None) -> RuleBase:
    """Built-in relabeling rules for misclassified units.

    Rules whose subject class, or whose entire antecedent class set, is absent
    from the taxonomy are dropped; antecedent sets resolve partially otherwise.
    ``name_bindings`` maps the canonical class names (Ground, Vegetation,
    Pavement, Building, Water, Airplane, Car, Ship) onto taxonomy ids; it
    defaults to the taxonomy's own names.
    """
    if taxonomy.n == 0:
        raise TaxonomyError("taxonomy has no classes")
    bind = dict(name_bindings) if name_bindings is not None else taxonomy.names()

    surround_specs = [
        ("c1", "Vegetation", ["Ground", "Pavement", "Building", "Water"]),
        ("c2", "Ground", ["Pavement", "Building", "Water"]),
        ("c3", "Building", ["Ground", "Water"]),
        ("c4", "Water", ["Vegetation", "Building", "Pavement"]),
        ("c5", "Airplane", ["Vegetation", "Building", "Water"]),
        ("c6", "Car", ["Vegetation", "Water"]),
    ]
    maxclass_specs = [
        ("c7", "Airplane", ["Pavement"]),
        ("c8", "Car", ["Pavement"]),
        ("c9", "Ship", ["Water"]),
    ]

    rules: list[Rule] = []
    priority = 0
    for rid, subject, allowed in surround_specs:
        if subject not in bind:
            continue
        ids = _resolve(allowed, bind)
        if ids is None:
            continue
        rules.append(
            Rule(rid, SubjectStatus.MISCLASSIFIED, frozenset({bind[subject]}), SurroundedBy(ids), AdoptSurroundClass(), priority)
        )
        priority += 1
    for rid, subject, barred in maxclass_specs:
        if subject not in bind:
            continue
        ids = _resolve(barred, bind)
        if ids is None:
            continue
        rules.append(
            Rule(rid, SubjectStatus.MISCLASSIFIED, frozenset({bind[subject]}), NoNeighborOf(ids), AdoptMaxClass(), priority)
        )
        priority += 1
    return RuleBase(rules=tuple(rules), taxonomy=taxonomy)


def build_channel_rules(taxonomy: Taxonomy, name_bindings: Mapping[str, int] | None = None) -> RuleBase:
    """Built-in shadow and elevation assertion rules.

    Shadow rules follow fixed class roles; elevation rules are derived from
    each class's elevation band, so they adapt to any taxonomy.
    """
    if taxonomy.n == 0:
        raise TaxonomyError("taxonomy has no classes")
    bind = dict(name_bindings) if name_bindings is not None else taxonomy.names()

    rules: list[Rule] = []
    priority = 0

    shadow_specs = [
        ("s1", SubjectStatus.MISCLASSIFIED, ["Pavement", "Ground", "Water", "Car"], NeighborhoodContains, ["Building"], 1),
        ("s2", SubjectStatus.MISCLASSIFIED, ["Vegetation", "Car", "Ship", "Airplane"], NoNeighborOf, ["Building"], -1),
        ("s3", SubjectStatus.CLASSIFIED, ["Ground"], NoNeighborOf, ["Building", "Vegetation"], -1),
        ("s4", SubjectStatus.CLASSIFIED, ["Building"], None, None, -1),
    ]
    for rid, status, subjects, ant_cls, ant_names, value in shadow_specs:
        subject_ids = _resolve(subjects, bind)
        if subject_ids is None:
            continue
        if ant_cls is None:
            antecedent: Antecedent = Always()
        else:
            ant_ids = _resolve(ant_names, bind)
            if ant_ids is None:
                continue
            antecedent = ant_cls(ant_ids)
        rules.append(Rule(rid, status, subject_ids, antecedent, AssertShadow(value), priority))
        priority += 1

    band_values = [
        ("e1", ElevationBand.LOW, 0),
        ("e2", ElevationBand.MEDIUM, 1),
        ("e3", ElevationBand.HIGH, 2),
    ]
    for rid, band, value in band_values:
        ids = taxonomy.band_ids(band)
        if not ids:
            continue
        rules.append(
            Rule(rid, SubjectStatus.CLASSIFIED, ids, Always(), AssertElevation(value), priority)
        )
        priority += 1
    return RuleBase(rules=tuple(rules), taxonomy=taxonomy)
