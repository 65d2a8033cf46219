"""Iterative closed-loop training and the two-stage inference protocol.

Each iteration trains the classifier on image plus inferred channels, lets
the reasoner correct low-confidence units (stage 2), then feeds the inferred
shadow/elevation rasters back as classifier input for the next iteration.
Inference uses the trained classifier plus the label-correction pass only.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import classifier as clf
from .core import (
    ExtraChannels,
    LabelMap,
    ParameterError,
    RasterImage,
    Taxonomy,
    zero_extra_channels,
)
from .metrics import ConfusionMatrix, confusion, mean_iou, overall_accuracy
from .reasoner import CorrectionLog, correct_labels, infer_channels, post_correction_state
from .rules import RuleBase, build_channel_rules, build_correction_rules
from .spatial import RegionGraph, build_graph
from .superpixel import InferenceUnit, SuperpixelMap, aggregate_units, slic_segment
from .core import argmax_labels


@dataclass(frozen=True)
class PipelineConfig:
    k_target: int = 1000
    compactness: float = 10.0
    f_t: float = 0.7
    max_iterations: int = 5
    convergence_epsilon: float = 0.002
    window_radius: int = 1
    hidden: int | None = None
    training: clf.TrainingConfig = field(default_factory=clf.TrainingConfig)
    seed: int = 0
    taxonomy_file: str | None = None
    rules_file: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.f_t < 1.0:
            raise ParameterError("f_t must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    stage1_oa: float
    stage1_miou: float
    stage2_oa: float
    stage2_miou: float
    corrections: int
    wall_time: float


@dataclass(frozen=True)
class Scene:
    name: str
    image: RasterImage
    truth: LabelMap


@dataclass
class Pipeline:
    config: PipelineConfig
    taxonomy: Taxonomy
    correction_rules: RuleBase
    channel_rules: RuleBase
    params: clf.ClassifierParams | None = None
    best_iteration: int = 0

    def require_trained(self) -> clf.ClassifierParams:
        if self.params is None:
            raise RuntimeError("pipeline has not been trained")
        return self.params


@dataclass
class _SceneResult:
    stage1: LabelMap
    stage2: LabelMap
    units: list[InferenceUnit]
    graph: RegionGraph
    log: CorrectionLog


def _reason_scene(
    pipeline: Pipeline,
    spmap: SuperpixelMap,
    probs,
    taxonomy: Taxonomy,
) -> _SceneResult:
    labels, conf = argmax_labels(probs, taxonomy)
    units = aggregate_units(spmap, labels, conf, pipeline.config.f_t)
    graph = build_graph(units, labels.width, labels.height)
    corrected, log = correct_labels(units, graph, pipeline.correction_rules, labels)
    return _SceneResult(stage1=labels, stage2=corrected, units=units, graph=graph, log=log)


def _next_channels(result: _SceneResult, pipeline: Pipeline) -> ExtraChannels:
    state = post_correction_state(result.units, result.log)
    return infer_channels(result.units, result.graph, pipeline.channel_rules, state)


def train_pipeline(
    train: Sequence[Scene],
    val: Sequence[Scene],
    cfg: PipelineConfig,
    taxonomy: Taxonomy | None = None,
    correction_rules: RuleBase | None = None,
    channel_rules: RuleBase | None = None,
    jobs: int = 1,
    on_iteration: Callable[[IterationRecord, clf.ClassifierParams, list[tuple[str, CorrectionLog]]], None]
    | None = None,
) -> tuple[Pipeline, list[IterationRecord]]:
    """Run the closed training loop and keep the best-scoring classifier.

    Stops at ``max_iterations`` or as soon as validation stage-2 accuracy
    improves by less than ``convergence_epsilon`` over the best previous
    iteration. The returned pipeline carries the parameters of the iteration
    with the highest stage-2 accuracy (earliest on ties). The correction count
    per record covers all processed scenes (training and validation).
    """
    if not train or not val:
        raise ParameterError("training and validation sets must be non-empty")
    taxonomy = taxonomy or train[0].truth.taxonomy
    for scene in list(train) + list(val):
        if scene.truth.taxonomy != taxonomy:
            raise ParameterError(f"scene {scene.name} uses a different taxonomy")
    correction_rules = correction_rules or build_correction_rules(taxonomy)
    channel_rules = channel_rules or build_channel_rules(taxonomy)
    pipeline = Pipeline(cfg, taxonomy, correction_rules, channel_rules)

    scenes = list(train) + list(val)
    n_train = len(train)

    def map_scenes(fn, items):
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    spmaps = map_scenes(
        lambda s: slic_segment(s.image, cfg.k_target, cfg.compactness, seed=cfg.seed), scenes
    )
    channels: list[ExtraChannels] = [
        zero_extra_channels(s.image.width, s.image.height) for s in scenes
    ]

    history: list[IterationRecord] = []
    best_oa = -1.0
    best_params: clf.ClassifierParams | None = None
    best_iteration = 0

    for iteration in range(1, cfg.max_iterations + 1):
        started = time.perf_counter()
        feats = map_scenes(
            lambda i: clf.extract_features(scenes[i].image, channels[i], cfg.window_radius),
            range(len(scenes)),
        )
        params = clf.init_params(
            feats[0].shape[1], taxonomy.n, hidden=cfg.hidden, seed=cfg.seed
        )
        params, _ = clf.train(
            params, [(feats[i], scenes[i].truth) for i in range(n_train)], cfg.training
        )
        pipeline.params = params

        def process(i: int) -> _SceneResult:
            probs = clf.predict(params, scenes[i].image, channels[i], cfg.window_radius)
            return _reason_scene(pipeline, spmaps[i], probs, taxonomy)

        results = map_scenes(process, range(len(scenes)))

        stage1_cm = stage2_cm = None
        for i in range(n_train, len(scenes)):
            cm1 = confusion(results[i].stage1, scenes[i].truth)
            cm2 = confusion(results[i].stage2, scenes[i].truth)
            stage1_cm = cm1 if stage1_cm is None else stage1_cm + cm1
            stage2_cm = cm2 if stage2_cm is None else stage2_cm + cm2
        assert stage1_cm is not None and stage2_cm is not None

        record = IterationRecord(
            iteration=iteration,
            stage1_oa=overall_accuracy(stage1_cm),
            stage1_miou=mean_iou(stage1_cm)[0],
            stage2_oa=overall_accuracy(stage2_cm),
            stage2_miou=mean_iou(stage2_cm)[0],
            corrections=sum(len(r.log) for r in results),
            wall_time=time.perf_counter() - started,
        )
        history.append(record)
        if on_iteration is not None:
            on_iteration(record, params, [(scenes[i].name, results[i].log) for i in range(len(scenes))])

        improvement = record.stage2_oa - best_oa
        if record.stage2_oa > best_oa:
            best_oa = record.stage2_oa
            best_params = params
            best_iteration = iteration
        if iteration == cfg.max_iterations:
            break
        if iteration >= 2 and improvement < cfg.convergence_epsilon:
            break

        channels = map_scenes(lambda r: _next_channels(r, pipeline), results)

    pipeline.params = best_params
    pipeline.best_iteration = best_iteration
    return pipeline, history


def infer(pipeline: Pipeline, image: RasterImage) -> tuple[LabelMap, LabelMap, CorrectionLog]:
    """Two-stage inference on one image.

    The inferred channels are bootstrapped with a first predict/reason pass
    under zero channels, mirroring the input distribution seen in training;
    stage 1 is the re-prediction under those channels and stage 2 applies the
    label corrections to it. Channel rasters are not part of the result.
    """
    params = pipeline.require_trained()
    cfg = pipeline.config
    taxonomy = pipeline.taxonomy
    spmap = slic_segment(image, cfg.k_target, cfg.compactness, seed=cfg.seed)

    blank = zero_extra_channels(image.width, image.height)
    probs = clf.predict(params, image, blank, cfg.window_radius)
    bootstrap = _reason_scene(pipeline, spmap, probs, taxonomy)
    channels = _next_channels(bootstrap, pipeline)

    probs = clf.predict(params, image, channels, cfg.window_radius)
    final = _reason_scene(pipeline, spmap, probs, taxonomy)
    return final.stage1, final.stage2, final.log
