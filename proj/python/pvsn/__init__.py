"""Dual-palm siamese palm-vein verification.

Thin wrapper over the C++ core: synthetic data, training, evaluation,
four-image verification and the gradient self-check.
"""

from ._pvsn import (
    Dataset,
    Params,
    bce_loss,
    contrastive_loss,
    evaluate,
    extract_features,
    gradcheck,
    init_params,
    load_checkpoint,
    load_dataset,
    metrics,
    roi_preprocess,
    run_experiment,
    save_checkpoint,
    split,
    synth_generate,
    verify,
    write_dataset,
)

__all__ = [
    "Dataset",
    "Params",
    "bce_loss",
    "contrastive_loss",
    "evaluate",
    "extract_features",
    "gradcheck",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "metrics",
    "roi_preprocess",
    "run_experiment",
    "save_checkpoint",
    "split",
    "synth_generate",
    "train",
    "verify",
    "write_dataset",
]


def train(dataset, out=None, on_epoch=None, **settings):
    """Runs one experiment. Keyword settings use the config-file keys,
    e.g. ``train(data, n=5, margin=60, max_epochs=6)``."""
    return run_experiment(dataset, {k: str(v) for k, v in settings.items()}, out, on_epoch)
