"""Python bindings for the EyeTrans C++ core."""

from ._core import (
    EyeTransError,
    attention_maps,
    bfs_serialize,
    build_dataset,
    classification_report,
    classify_ivt,
    extract_switches,
    fuse,
    gradcheck,
    ingest_ast,
    parse_java,
    passes_tier,
    permute_ast,
    remap_switches,
    rouge,
    run_experiment,
    synthesize_gaze,
)

__all__ = [
    "EyeTransError",
    "attention_maps",
    "bfs_serialize",
    "build_dataset",
    "classification_report",
    "classify_ivt",
    "extract_switches",
    "fuse",
    "gradcheck",
    "ingest_ast",
    "parse_java",
    "passes_tier",
    "permute_ast",
    "remap_switches",
    "rouge",
    "run_experiment",
    "synthesize_gaze",
]
