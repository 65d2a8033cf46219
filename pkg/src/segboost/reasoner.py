"""Rule application over the region graph.

Two passes: label correction relabels low-confidence units, then channel
inference derives shadow/elevation rasters from the corrected classes. Both
passes evaluate every antecedent against a fixed pre-pass snapshot, so results
do not depend on the order units are visited in.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ExtraChannels, LabelMap
from .rules import (
    AdoptMaxClass,
    AdoptSurroundClass,
    Always,
    NeighborhoodContains,
    NoNeighborOf,
    Rule,
    RuleBase,
    RuleError,
    RuleKind,
    SubjectStatus,
    SurroundedBy,
)
from .spatial import RegionGraph, UnitState, is_surrounded_by, max_class, neighbors, snapshot_from_units
from .superpixel import InferenceUnit, UnitStatus


class StateError(ValueError):
    """A unit snapshot does not match the units it is applied to."""


@dataclass(frozen=True)
class LogEntry:
    unit_id: int
    old_class: int
    new_class: int
    rule_id: str


@dataclass(frozen=True)
class CorrectionLog:
    """Which rule relabeled which unit; each unit appears at most once."""

    entries: tuple[LogEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)


def _antecedent_holds(rule: Rule, graph: RegionGraph, unit: int, state: UnitState) -> bool:
    ant = rule.antecedent
    if isinstance(ant, Always):
        return True
    if isinstance(ant, SurroundedBy):
        return is_surrounded_by(graph, unit, ant.allowed, state)
    if isinstance(ant, NoNeighborOf):
        return not any(
            state.classified[nb] and int(state.classes[nb]) in ant.required
            for nb in neighbors(graph, unit)
        )
    if isinstance(ant, NeighborhoodContains):
        return any(
            state.classified[nb] and int(state.classes[nb]) in ant.present
            for nb in neighbors(graph, unit)
        )
    raise RuleError(f"rule {rule.id}: unknown antecedent {ant!r}")


def _subject_matches(rule: Rule, unit: int, state: UnitState) -> bool:
    want_classified = rule.subject_status is SubjectStatus.CLASSIFIED
    if bool(state.classified[unit]) != want_classified:
        return False
    return int(state.classes[unit]) in rule.subject_classes


def correct_labels(
    units: Sequence[InferenceUnit],
    graph: RegionGraph,
    rules: RuleBase,
    labels: LabelMap,
    unit_order: Sequence[int] | None = None,
) -> tuple[LabelMap, CorrectionLog]:
    """Single correction pass over all misclassified units.

    For each misclassified unit the first rule (priority order) whose subject
    and antecedent match determines its new class: the dominant class of its
    classified neighbors. Snapshot semantics: corrections made during the pass
    never become witnesses within the same pass. ``unit_order`` overrides the
    evaluation order; the output is identical for any permutation, which the
    test suite exercises.
    """
    applicable = rules.of_kind(RuleKind.CORRECTION)
    if len(applicable) != len(rules.rules):
        raise RuleError("correction pass received non-relabeling rules")
    state = snapshot_from_units(units)
    if len(units) != graph.n_units:
        raise StateError("units do not match the graph they were built into")

    order = range(len(units)) if unit_order is None else unit_order
    new_labels = labels.labels.copy()
    entries = []
    for uid in order:
        unit = units[uid]
        if unit.status is not UnitStatus.MISCLASSIFIED:
            continue
        for rule in applicable:
            if not _subject_matches(rule, uid, state):
                continue
            if not _antecedent_holds(rule, graph, uid, state):
                continue
            # Both consequents adopt the area-dominant classified neighbor
            # class; for a surround rule the antecedent already guarantees
            # every witness is in the allowed set.
            new_class = max_class(graph, uid, state)
            if new_class is None:
                if isinstance(rule.consequent, AdoptMaxClass):
                    continue  # no classified neighborhood to adopt from
                break
            entries.append(LogEntry(uid, unit.unit_class, new_class, rule.id))
            new_labels.ravel()[unit.pixels] = new_class
            break
    entries.sort(key=lambda e: e.unit_id)
    corrected = LabelMap(labels=new_labels, taxonomy=labels.taxonomy)
    return corrected, CorrectionLog(entries=tuple(entries))


def post_correction_state(units: Sequence[InferenceUnit], log: CorrectionLog) -> UnitState:
    """Snapshot after a correction pass.

    Corrected units carry their new class and count as classified; unchanged
    units keep their original class and status.
    """
    state = snapshot_from_units(units)
    classes = state.classes.copy()
    classified = state.classified.copy()
    for entry in log.entries:
        classes[entry.unit_id] = entry.new_class
        classified[entry.unit_id] = True
    return UnitState(classes=classes, classified=classified)


def infer_channels(
    units: Sequence[InferenceUnit],
    graph: RegionGraph,
    rules: RuleBase,
    state: UnitState,
) -> ExtraChannels:
    """Derive shadow and elevation rasters from the corrected unit state.

    Per unit and per channel, the first matching rule in priority order wins.
    Units no shadow rule covers stay 0 (uncertain); units no elevation rule
    covers stay 0 (low).
    """
    if len(units) != len(state.classes) or len(units) != graph.n_units:
        raise StateError("unit state does not match the unit list")
    shadow_rules = rules.of_kind(RuleKind.SHADOW)
    elevation_rules = rules.of_kind(RuleKind.ELEVATION)

    h, w = graph.unit_map.shape
    shadow = np.zeros((h, w), dtype=np.int8)
    elevation = np.zeros((h, w), dtype=np.int8)
    for uid, unit in enumerate(units):
        for rule in shadow_rules:
            if _subject_matches(rule, uid, state) and _antecedent_holds(rule, graph, uid, state):
                shadow.ravel()[unit.pixels] = rule.consequent.value
                break
        for rule in elevation_rules:
            if _subject_matches(rule, uid, state) and _antecedent_holds(rule, graph, uid, state):
                elevation.ravel()[unit.pixels] = rule.consequent.value
                break
    return ExtraChannels(shadow=shadow, elevation=elevation)
