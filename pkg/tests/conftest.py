"""Session fixtures for the acceptance suite plus per-criterion reporting.

The desk-scale fixtures are expensive (ten short training runs), so they
are session-scoped and lazy: only tests that request them pay the cost,
and every consumer shares the same trained models.
"""

from __future__ import annotations

import time

import pytest

from brahmi_ocr.dataset import Dataset, dataset_to_arrays, render_synthetic_corpus
from brahmi_ocr.model_zoo import build_mobilenet_micro
from brahmi_ocr.tensornet import TrainConfig, train

DESK_CLASSES = 10
DESK_TRAIN_PER_CLASS = 100
DESK_VAL_PER_CLASS = 30
DESK_SIDE = 32
DESK_CORPUS_SEED = 1001
DESK_SEEDS = (1, 2, 3, 4, 5)
# Accuracy saturates around epoch 7 on this corpus; 12 epochs keeps all
# ten runs (5 seeds x 2 pooling modes) well inside the time budget while
# leaving the 50-epoch bound a comfortable a-fortiori margin.
DESK_MAX_EPOCHS = 12
DESK_PATIENCE = 4
DESK_BATCH = 32


def pytest_runtest_logreport(report):
    """One PASS/FAIL line per acceptance criterion, printed as it resolves."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {report.nodeid}: {verdict}")


@pytest.fixture(scope="session")
def desk_corpus():
    """Synthetic 10-class corpus split 100 train / 30 val per class."""
    t0 = time.perf_counter()
    per_class = DESK_TRAIN_PER_CLASS + DESK_VAL_PER_CLASS
    corpus = render_synthetic_corpus(
        DESK_CLASSES, per_class, DESK_SIDE, seed=DESK_CORPUS_SEED
    )
    by_class: dict[int, list] = {}
    for img, idx in corpus.samples:
        by_class.setdefault(idx, []).append((img, idx))
    train_s: list = []
    val_s: list = []
    for idx in sorted(by_class):
        train_s += by_class[idx][:DESK_TRAIN_PER_CLASS]
        val_s += by_class[idx][DESK_TRAIN_PER_CLASS:]
    x_tr, y_tr = dataset_to_arrays(Dataset(tuple(train_s), corpus.label_map))
    x_va, y_va = dataset_to_arrays(Dataset(tuple(val_s), corpus.label_map))
    return {
        "train": (x_tr, y_tr),
        "val": (x_va, y_va),
        "labels": corpus.label_map,
        "seconds": time.perf_counter() - t0,
    }


@pytest.fixture(scope="session")
def desk_runs(desk_corpus):
    """Ten trained mobilenet_micro models: seeds 1-5, avg and max pooling.

    Pooling mode does not change parameter shapes, so a shared seed gives
    both variants identical initial weights and identical batch order; the
    comparison isolates the pooling choice alone.
    """
    t0 = time.perf_counter()
    runs = {}
    for seed in DESK_SEEDS:
        for pooling in ("avg", "max"):
            model = build_mobilenet_micro(DESK_CLASSES, pooling=pooling, seed=seed)
            cfg = TrainConfig(
                max_epochs=DESK_MAX_EPOCHS,
                patience=DESK_PATIENCE,
                batch_size=DESK_BATCH,
                seed=seed,
            )
            model, history = train(
                model, desk_corpus["train"], desk_corpus["val"], cfg
            )
            runs[(seed, pooling)] = (model, history)
    return {
        "runs": runs,
        "seconds": desk_corpus["seconds"] + (time.perf_counter() - t0),
    }


@pytest.fixture(scope="session")
def desk_model(desk_runs, desk_corpus):
    """The seed-1 average-pooling model plus its labels, for reuse downstream."""
    model, history = desk_runs["runs"][(1, "avg")]
    return {"model": model, "history": history, "labels": desk_corpus["labels"]}
