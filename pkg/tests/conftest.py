import numpy as np
import pytest

from physiobias.dataset import Dataset


def make_dataset(X, y, pids=None, window_indices=None, columns=None) -> Dataset:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = y.size
    if pids is None:
        pids = np.array([f"p{i}" for i in range(n)], dtype=object)
    if window_indices is None:
        window_indices = np.zeros(n, dtype=int)
    if columns is None:
        columns = [f"f{j}" for j in range(X.shape[1])]
    return Dataset(
        X=X,
        y=y,
        participant_ids=np.asarray(pids, dtype=object),
        window_indices=np.asarray(window_indices, dtype=int),
        column_names=list(columns),
    )


@pytest.fixture
def dataset_factory():
    return make_dataset


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance PASS/FAIL lines where capture cannot hide them."""
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
