"""Progressive k-NN similarity search with probabilistic quality guarantees."""

import json

from ._pros import (
    Bundle,
    Dataset,
    FitError,
    Index,
    InvalidArgument,
    IoError,
    ModelMismatch,
    brute_force_knn,
    build_index,
    dtw,
    euclidean,
    lb_keogh,
    load_bundle,
    load_dataset,
    load_index,
    make_cbf,
    make_random_walk,
    plan_moments,
    progressive_knn,
    query,
    train,
    write_dataset,
)
from . import _pros


def bench(preset="tiny", config=None, repetitions=None):
    """Runs the benchmark harness; returns the report as a dict."""
    text = json.dumps(config) if config is not None else ""
    return json.loads(_pros._bench_json(preset, text, repetitions))


def preset(name):
    return json.loads(_pros._preset_json(name))


__all__ = [
    "Bundle", "Dataset", "FitError", "Index", "InvalidArgument", "IoError", "ModelMismatch",
    "bench", "brute_force_knn", "build_index", "dtw", "euclidean", "lb_keogh", "load_bundle",
    "load_dataset", "load_index", "make_cbf", "make_random_walk", "plan_moments", "preset",
    "progressive_knn", "query", "train", "write_dataset",
]
