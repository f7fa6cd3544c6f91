"""Face re-identification toolkit: embedding store, exact k-NN, tracking and evaluation protocols.

The heavy lifting happens in the compiled ``_core`` extension; this package
re-exports it.
"""

from ._core import (
    EmbeddingStore,
    Error,
    GalleryIndex,
    IoError,
    TrackerConfig,
    ValidationError,
    build_reid_split,
    eval_reid,
    evaluate_verification,
    filter_corpus,
    iou,
    load_store,
    normalize,
    roc_auc,
    run_reid_protocol,
    run_tracker,
    save_store,
    solve_assignment,
    synth,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingStore",
    "Error",
    "GalleryIndex",
    "IoError",
    "TrackerConfig",
    "ValidationError",
    "build_reid_split",
    "eval_reid",
    "evaluate_verification",
    "filter_corpus",
    "iou",
    "load_store",
    "normalize",
    "roc_auc",
    "run_reid_protocol",
    "run_tracker",
    "save_store",
    "solve_assignment",
    "synth",
]
