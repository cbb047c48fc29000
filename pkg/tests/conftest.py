import numpy as np
import pytest

from nucleitool.core import LabeledImage


@pytest.fixture
def rng():
    return np.random.default_rng(20221014)


def make_label(inst, cls):
    inst = np.asarray(inst, dtype=np.int32)
    return LabeledImage(rgb=np.zeros(inst.shape + (3,), np.uint8), inst=inst,
                        cls=np.asarray(cls, dtype=np.int32))


def random_label(rng, shape=(24, 24), n=6, classes=True):
    """Random rectangles/ellipse-ish pieces; ids may touch but never overlap."""
    inst = np.zeros(shape, dtype=np.int32)
    for k in range(1, n + 1):
        r0, c0 = rng.integers(0, shape[0] - 2), rng.integers(0, shape[1] - 2)
        h, w = rng.integers(1, 8, size=2)
        block = inst[r0:r0 + h, c0:c0 + w]
        block[block == 0] = k
    cls = np.zeros(shape, dtype=np.int32)
    for k in np.unique(inst[inst > 0]):
        cls[inst == k] = rng.integers(1, 7) if classes else 1
    return make_label(inst, cls)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
