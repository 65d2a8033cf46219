"""Closed-loop segmentation refinement.

A trainable per-pixel classifier and a knowledge-rule reasoner over a region
adjacency graph improve each other iteratively: the reasoner relabels
low-confidence regions via spatial rules and derives shadow/elevation rasters
that feed back into the classifier's input.
"""
from .core import (
    ClassDef,
    DimensionError,
    ElevationBand,
    ExtraChannels,
    LabelMap,
    ParameterError,
    ProbMap,
    RasterImage,
    Taxonomy,
    TaxonomyError,
    argmax_labels,
    default_taxonomy,
    zero_extra_channels,
)
from .superpixel import (
    InferenceUnit,
    SuperpixelMap,
    UnitStatus,
    aggregate_units,
    majority_label,
    slic_segment,
    units_from_labels,
)
from .spatial import RegionGraph, UnitState, build_graph, is_surrounded_by, max_class, neighbors
from .rules import Rule, RuleBase, RuleKind, build_channel_rules, build_correction_rules
from .dsl import DslError, parse_rules, serialize_rules
from .reasoner import CorrectionLog, correct_labels, infer_channels, post_correction_state
from .classifier import (
    ClassifierParams,
    TrainingConfig,
    TrainingDivergenceError,
    extract_features,
    ingest_probmap,
    init_params,
    predict,
    train,
)
from .metrics import ConfusionMatrix, Metrics, confusion, evaluate, mean_iou, overall_accuracy
from .synth import CorruptionModel, SceneSpec, corrupt_probmap, default_corruption_model, generate_scene
from .loop import IterationRecord, Pipeline, PipelineConfig, Scene, infer, train_pipeline

__version__ = "0.1.0"
