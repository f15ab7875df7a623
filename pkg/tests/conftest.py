import numpy as np
import pytest

from idsfusion.ingest import extract_labels
from idsfusion.preprocess import encode, select_features
from idsfusion.synthetic import generate_kdd, generate_unsw


@pytest.fixture(scope="session")
def raw_tables():
    return generate_unsw(1500, seed=11), generate_kdd(1500, seed=12)


@pytest.fixture(scope="session")
def selected(raw_tables):
    unsw, kdd = raw_tables
    return select_features(encode(unsw), "UNSW"), select_features(encode(kdd), "KDD")


def blobs(rng, n, d, shift=1.5, frac=0.5):
    """Two overlapping Gaussian classes; a small binary classification problem."""
    y = (rng.random(n) < frac).astype(np.int64)
    X = rng.normal(size=(n, d)) + shift * y[:, None] * (rng.random(d) > 0.5)
    return np.ascontiguousarray(X), y


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
