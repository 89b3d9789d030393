import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from convdiag import build_model, evaluate, prepare_dataset, train
from convdiag.fixtures import (two_tone_corpus, two_tone_model,
                               two_tone_train_config)


@pytest.fixture(scope="session")
def trained_two_tone():
    """A converged 2-class model plus its dataset, shared by the
    evaluate/predict/export tests. Window 512 keeps it quick."""
    recordings = two_tone_corpus(seed=11, window=512, windows_per_class=60)
    dataset, label_map, stats = prepare_dataset(recordings, 512, 0.9, seed=11)
    model = build_model(two_tone_model(), (1, 512), label_map=label_map,
                        stats=stats, seed=11)
    cfg = two_tone_train_config(seed=11, max_iterations=150)
    train(model, dataset, cfg)
    report = evaluate(model, dataset.validation)
    assert report.accuracy == 1.0, "fixture model failed to converge"
    return model, dataset
