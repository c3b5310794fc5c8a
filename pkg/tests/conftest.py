import gzip
import os
from pathlib import Path

import numpy as np
import pytest

from logdet import datasets

_ACCEPTANCE_LINES = []


def _mlxtend_mnist_csv():
    try:
        import mlxtend
    except ImportError:
        return None
    path = Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz"
    return path if path.exists() else None


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    """Directory with MNIST IDX files.

    Uses ``LOGDET_MNIST_DIR`` when set; otherwise converts the 5000 real MNIST
    digits shipped with mlxtend (500 per class) into IDX train files.
    """
    env = os.environ.get("LOGDET_MNIST_DIR")
    if env:
        return Path(env)
    src = _mlxtend_mnist_csv()
    if src is None:
        pytest.skip("no MNIST available: set LOGDET_MNIST_DIR or install mlxtend")
    with gzip.open(src, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",").astype(np.uint8)
    out = tmp_path_factory.mktemp("mnist")
    images, labels = table[:, :-1], table[:, -1]
    for split in ("train", "test"):
        img_name, lbl_name = datasets.MNIST_FILES[split]
        datasets.write_idx_images(out / img_name, images)
        datasets.write_idx_labels(out / lbl_name, labels)
    return out


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, ok, detail)``."""

    def record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
